//! Reference plugin: repeats the last history row `horizon` times.
//!
//! Test knobs (all optional params): `sleep_ms` delays the answer,
//! `short = 1` emits one row too few, `exit_code` exits with that status
//! before answering, `garbage = 1` prints a non-JSON line.

use std::io::{self, BufRead, Write};
use std::process::ExitCode;

use easytime_core::forecasters::{PluginRequest, PluginResponse};

fn main() -> ExitCode {
    let mut line = String::new();
    if io::stdin().lock().read_line(&mut line).is_err() {
        return ExitCode::from(3);
    }
    let request: PluginRequest = match serde_json::from_str(&line) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("bad request: {e}");
            return ExitCode::from(4);
        }
    };
    let knob = |name: &str| request.params.get(name).copied().unwrap_or(0.0);

    if knob("sleep_ms") > 0.0 {
        std::thread::sleep(std::time::Duration::from_millis(knob("sleep_ms") as u64));
    }
    if knob("exit_code") > 0.0 {
        eprintln!("exiting on request");
        return ExitCode::from(knob("exit_code") as u8);
    }
    let mut out = io::stdout().lock();
    if knob("garbage") > 0.0 {
        let _ = writeln!(out, "this is not json");
        return ExitCode::SUCCESS;
    }
    let last = request.history.last().cloned().unwrap_or_default();
    let rows = if knob("short") > 0.0 { request.horizon.saturating_sub(1) } else { request.horizon };
    let response = PluginResponse { values: vec![last; rows] };
    let _ = writeln!(out, "{}", serde_json::to_string(&response).expect("serializable"));
    ExitCode::SUCCESS
}
