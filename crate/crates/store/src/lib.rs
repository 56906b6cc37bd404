//! Benchmark knowledge base: datasets, methods, runs and scores in one
//! SQLite file, plus the verifier that gates every ad-hoc query.

mod schema;
mod store;
mod verify;

pub use schema::{
    columns, is_column, is_table, schema_text, CHARACTERISTIC_COLUMNS, SCHEMA_SQL, SCHEMA_VERSION, TABLES,
};
pub use store::{
    method_key, run_id, DatasetRow, MethodRow, QueryResult, RunRow, RunStatus, Store, StoreError, Value, QUERY_TIMEOUT,
};
pub use verify::{verify_sql, SqlVerdict, VerifiedSql, Violation, ViolationCode, MAX_LIMIT};
