//! The run report: markdown summary plus a per-dataset CSV. Both depend
//! only on the evaluation results, never on timing.

use std::collections::BTreeMap;
use std::fmt::Write;

use easytime_core::config::RunConfig;
use easytime_core::evaluation::EvalRecord;
use easytime_core::pipeline::FailedRun;
use easytime_store::method_key;

pub struct RunResults<'a> {
    pub config: &'a RunConfig,
    pub n_datasets: usize,
    pub records: &'a [EvalRecord],
    /// Store key of each record's method, aligned with `records`.
    pub method_keys: &'a [String],
    pub failures: &'a [FailedRun],
}

fn metric_names(config: &RunConfig) -> Vec<&'static str> {
    config.eval.metrics.iter().map(|m| m.name()).collect()
}

pub fn markdown(r: &RunResults<'_>) -> String {
    let metrics = metric_names(r.config);
    let mut out = String::new();
    let _ = writeln!(out, "# Benchmark report\n");
    let _ = writeln!(out, "- datasets: {}", r.n_datasets);
    let _ = writeln!(out, "- methods: {}", r.config.methods.len());
    let _ = writeln!(out, "- successful runs: {}", r.records.len());
    let _ = writeln!(out, "- failed runs: {}", r.failures.len());
    let _ = writeln!(
        out,
        "- evaluation: {}, horizon {}, lookback {}, stride {}",
        r.config.eval.strategy.as_str(),
        r.config.eval.horizon,
        r.config.eval.lookback,
        r.config.eval.stride()
    );
    let _ = writeln!(out, "- config digest: {}\n", r.config.eval.digest());

    let _ = writeln!(out, "## Mean scores by method\n");
    let _ = writeln!(out, "| method | runs | {} |", metrics.join(" | "));
    let _ = writeln!(out, "|---|---:|{}", "---:|".repeat(metrics.len()));
    for spec in &r.config.methods {
        let key = method_key(spec);
        let mine: Vec<&EvalRecord> =
            r.records.iter().zip(r.method_keys).filter(|(_, k)| **k == key).map(|(rec, _)| rec).collect();
        let cells: Vec<String> = metrics
            .iter()
            .map(|m| {
                let values: Vec<f64> = mine.iter().filter_map(|rec| rec.metric_values.get(*m).copied()).collect();
                if values.is_empty() {
                    "n/a".to_string()
                } else {
                    format!("{:.4}", values.iter().sum::<f64>() / values.len() as f64)
                }
            })
            .collect();
        let _ = writeln!(out, "| {key} | {} | {} |", mine.len(), cells.join(" | "));
    }

    if !r.failures.is_empty() {
        let _ = writeln!(out, "\n## Failed runs\n");
        let _ = writeln!(out, "| dataset | method | error |");
        let _ = writeln!(out, "|---|---|---|");
        for f in r.failures {
            let error = f.error.replace('|', "\\|").replace('\n', " ");
            let _ = writeln!(out, "| {} | {} | {error} |", f.dataset_id, method_key(&f.method));
        }
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One row per (dataset, method) result, in evaluation order.
pub fn per_dataset_csv(r: &RunResults<'_>) -> String {
    let metrics = metric_names(r.config);
    let mut by_cell: BTreeMap<(&str, &str), &EvalRecord> = BTreeMap::new();
    for (rec, key) in r.records.iter().zip(r.method_keys) {
        by_cell.insert((rec.dataset_id.as_str(), key.as_str()), rec);
    }
    let mut out = format!("dataset_id,method_id,n_windows,{}\n", metrics.join(","));
    for ((dataset, method), rec) in by_cell {
        let values: Vec<String> =
            metrics.iter().map(|m| rec.metric_values.get(*m).map(|v| format!("{v:.6}")).unwrap_or_default()).collect();
        let _ = writeln!(out, "{},{},{},{}", csv_field(dataset), csv_field(method), rec.n_windows, values.join(","));
    }
    out
}
