//! External methods over a subprocess protocol.
//!
//! The plugin receives one newline-terminated JSON request on stdin,
//! `{"history": [[..]..], "horizon": H, "params": {..}, "seed": S}`, and must
//! print one newline-terminated JSON response, `{"values": [[..]..]}`, with
//! `H` rows of the same width as the history rows.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;
use std::process::{Command, Stdio};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use wait_timeout::ChildExt;

use super::ForecastError;

pub const DEFAULT_PLUGIN_TIMEOUT: Duration = Duration::from_secs(60);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PluginRequest {
    pub history: Vec<Vec<f64>>,
    pub horizon: usize,
    pub params: BTreeMap<String, f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PluginResponse {
    pub values: Vec<Vec<f64>>,
}

fn protocol(msg: impl Into<String>) -> ForecastError {
    ForecastError::PluginProtocolError(msg.into())
}

/// Runs one request through the plugin at `path` and returns the validated `h × c` rows.
pub fn run_external_method(
    path: &Path,
    request: &PluginRequest,
    timeout: Duration,
) -> Result<Vec<Vec<f64>>, ForecastError> {
    let mut line = serde_json::to_string(request).map_err(|e| protocol(e.to_string()))?;
    line.push('\n');

    let mut child =
        Command::new(path).stdin(Stdio::piped()).stdout(Stdio::piped()).stderr(Stdio::piped()).spawn().map_err(
            |e| ForecastError::PluginCrash { code: None, stderr: format!("cannot launch {}: {e}", path.display()) },
        )?;

    let mut stdin = child.stdin.take().expect("piped stdin");
    let writer = thread::spawn(move || {
        // A plugin that exits without reading closes the pipe; that surfaces
        // through its exit status or response instead.
        let _ = stdin.write_all(line.as_bytes());
    });
    let mut stdout = child.stdout.take().expect("piped stdout");
    let reader = thread::spawn(move || {
        let mut buf = String::new();
        let _ = stdout.read_to_string(&mut buf);
        buf
    });
    let mut stderr = child.stderr.take().expect("piped stderr");
    let err_reader = thread::spawn(move || {
        let mut buf = String::new();
        let _ = stderr.read_to_string(&mut buf);
        buf
    });

    let status = match child.wait_timeout(timeout) {
        Ok(Some(status)) => status,
        Ok(None) => {
            let _ = child.kill();
            let _ = child.wait();
            return Err(ForecastError::PluginTimeout(timeout));
        }
        Err(e) => {
            let _ = child.kill();
            return Err(ForecastError::PluginCrash { code: None, stderr: e.to_string() });
        }
    };
    let _ = writer.join();
    let out = reader.join().unwrap_or_default();
    let err = err_reader.join().unwrap_or_default();
    if !status.success() {
        return Err(ForecastError::PluginCrash { code: status.code(), stderr: err.trim().to_string() });
    }

    let doc = out.lines().find(|l| !l.trim().is_empty()).ok_or_else(|| protocol("empty response"))?;
    let response: PluginResponse =
        serde_json::from_str(doc).map_err(|e| protocol(format!("malformed response: {e}")))?;
    let width = request.history.first().map_or(0, Vec::len);
    if response.values.len() != request.horizon {
        return Err(protocol(format!("expected {} rows, got {}", request.horizon, response.values.len())));
    }
    if let Some(i) = response.values.iter().position(|r| r.len() != width) {
        return Err(protocol(format!("row {i} has {} values, expected {width}", response.values[i].len())));
    }
    if response.values.iter().flatten().any(|v| !v.is_finite()) {
        return Err(protocol("response contains non-finite values"));
    }
    Ok(response.values)
}
