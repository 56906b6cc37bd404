//! Shipped questions paired with independently written reference SQL.

use serde::{Deserialize, Serialize};

pub const TOP_METHODS_QUESTION: &str =
    "What are the top-8 methods (ordered by MAE) for long-term forecasting on all multivariate datasets with trends?";

const CANONICAL_JSON: &str = include_str!("../assets/canonical_questions.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonicalQuestion {
    pub question: String,
    pub reference_sql: String,
}

pub fn canonical_questions() -> Vec<CanonicalQuestion> {
    serde_json::from_str(CANONICAL_JSON).expect("canonical question asset is valid JSON")
}
