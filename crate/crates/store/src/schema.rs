//! The fixed relational schema: DDL asset, version stamp and name whitelist.

/// Stored in `PRAGMA user_version`.
pub const SCHEMA_VERSION: i64 = 1;

pub const SCHEMA_SQL: &str = include_str!("../assets/schema_v1.sql");

/// Tables in dependency order, each with its columns in declaration order.
pub const TABLES: [(&str, &[&str]); 4] = [
    (
        "datasets",
        &[
            "dataset_id",
            "name",
            "domain",
            "n_channels",
            "length",
            "frequency",
            "seasonality",
            "trend",
            "transition",
            "shifting",
            "stationarity",
            "correlation",
        ],
    ),
    ("methods", &["method_id", "name", "family"]),
    (
        "runs",
        &[
            "run_id",
            "dataset_id",
            "method_id",
            "strategy",
            "horizon",
            "lookback",
            "stride",
            "status",
            "started_at",
            "config_digest",
            "n_windows",
            "runtime_ms",
            "error_message",
        ],
    ),
    ("scores", &["run_id", "metric", "value"]),
];

/// Characteristic columns of `datasets`, all in `[0, 1]`.
pub const CHARACTERISTIC_COLUMNS: [&str; 6] =
    ["seasonality", "trend", "transition", "shifting", "stationarity", "correlation"];

pub fn is_table(name: &str) -> bool {
    TABLES.iter().any(|(t, _)| t.eq_ignore_ascii_case(name))
}

pub fn is_column(name: &str) -> bool {
    TABLES.iter().any(|(_, cols)| cols.iter().any(|c| c.eq_ignore_ascii_case(name)))
}

pub fn columns(table: &str) -> Option<&'static [&'static str]> {
    TABLES.iter().find(|(t, _)| *t == table).map(|(_, c)| *c)
}

/// Plain-text schema description, as handed to an external SQL translator.
pub fn schema_text() -> String {
    TABLES.iter().map(|(t, cols)| format!("{t}({})", cols.join(", "))).collect::<Vec<_>>().join("\n")
}
