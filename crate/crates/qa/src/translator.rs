//! Optional external NL-to-SQL translator reached over HTTP.
//!
//! Contract: `POST <url>` with `{"prompt": text}`, answered by `{"text": text}`.
//! A bearer credential is sent when configured.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::session::Turn;

pub const PROMPT_TEMPLATE: &str = include_str!("../assets/prompt_template.txt");
pub const ENV_URL: &str = "QA_LLM_URL";
pub const ENV_KEY: &str = "QA_LLM_KEY";
/// History turns included in the prompt.
pub const PROMPT_HISTORY: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TranslatorError {
    #[error("translator unavailable: {0}")]
    TranslatorUnavailable(String),
    #[error("translator returned unusable output: {0}")]
    TranslatorBadOutput(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranslatorConfig {
    pub url: String,
    pub key: Option<String>,
    pub timeout: Duration,
}

impl TranslatorConfig {
    pub fn new(url: impl Into<String>) -> Self {
        Self { url: url.into(), key: None, timeout: Duration::from_secs(20) }
    }

    /// `None` when `QA_LLM_URL` is unset or blank.
    pub fn from_env() -> Option<Self> {
        let url = std::env::var(ENV_URL).ok().filter(|u| !u.trim().is_empty())?;
        let key = std::env::var(ENV_KEY).ok().filter(|k| !k.is_empty());
        Some(Self { key, ..Self::new(url.trim()) })
    }
}

#[derive(Serialize)]
struct Request<'a> {
    prompt: &'a str,
}

#[derive(Deserialize)]
struct Response {
    text: String,
}

/// Fills the shipped template.
pub fn render_prompt(question: &str, schema_text: &str, history: &[Turn]) -> String {
    let start = history.len().saturating_sub(PROMPT_HISTORY);
    let recent: Vec<String> = history[start..]
        .iter()
        .map(|t| match &t.answer.sql {
            Some(sql) => format!("Q: {}\nSQL: {sql}", t.question),
            None => format!("Q: {}\nSQL: (none)", t.question),
        })
        .collect();
    let history_text = if recent.is_empty() { "(none)".to_string() } else { recent.join("\n") };
    PROMPT_TEMPLATE.replace("{schema}", schema_text).replace("{history}", &history_text).replace("{question}", question)
}

/// First statement in a model reply, with markdown fences removed.
///
/// Starts at the first `SELECT` keyword when there is one; otherwise the
/// reply's first statement is returned as is so the verifier can report it.
pub fn extract_sql(reply: &str) -> Option<String> {
    let body: String = reply.lines().filter(|l| !l.trim_start().starts_with("```")).collect::<Vec<_>>().join("\n");
    let lower = body.to_ascii_lowercase();
    let start = lower
        .match_indices("select")
        .find(|(i, _)| {
            let before = lower[..*i].chars().next_back();
            let after = lower[i + 6..].chars().next();
            !before.is_some_and(|c| c.is_ascii_alphanumeric() || c == '_')
                && !after.is_some_and(|c| c.is_ascii_alphanumeric() || c == '_')
        })
        .map_or(0, |(i, _)| i);
    let stmt = &body[start..];
    let stmt = stmt.split(';').next().unwrap_or("").trim();
    (!stmt.is_empty()).then(|| stmt.to_string())
}

#[derive(Debug, Clone)]
pub struct LlmTranslator {
    config: TranslatorConfig,
    agent: ureq::Agent,
}

impl LlmTranslator {
    pub fn new(config: TranslatorConfig) -> Self {
        let agent = ureq::Agent::config_builder().timeout_global(Some(config.timeout)).build().new_agent();
        Self { config, agent }
    }

    pub fn config(&self) -> &TranslatorConfig {
        &self.config
    }

    /// Asks the translator for SQL answering `question`.
    pub fn translate(&self, question: &str, schema_text: &str, history: &[Turn]) -> Result<String, TranslatorError> {
        let prompt = render_prompt(question, schema_text, history);
        let mut request = self.agent.post(&self.config.url);
        if let Some(key) = &self.config.key {
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = request
            .send_json(Request { prompt: &prompt })
            .map_err(|e| TranslatorError::TranslatorUnavailable(e.to_string()))?;
        let reply: Response = response
            .body_mut()
            .read_json()
            .map_err(|e| TranslatorError::TranslatorBadOutput(format!("malformed response body: {e}")))?;
        extract_sql(&reply.text).ok_or_else(|| TranslatorError::TranslatorBadOutput("no SQL in reply".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extraction() {
        assert_eq!(extract_sql("```sql\nSELECT 1 FROM runs;\n```").as_deref(), Some("SELECT 1 FROM runs"));
        assert_eq!(extract_sql("Sure! select name from methods; drop x").as_deref(), Some("select name from methods"));
        assert_eq!(extract_sql("DROP TABLE scores").as_deref(), Some("DROP TABLE scores"));
        assert_eq!(extract_sql("  ;  "), None);
    }

    #[test]
    fn prompt_has_all_parts() {
        let p = render_prompt("top-3 methods", "runs(run_id)", &[]);
        assert!(p.contains("runs(run_id)"));
        assert!(p.contains("Question: top-3 methods"));
        assert!(p.contains("(none)"));
        assert!(p.contains("SQL only"));
        assert!(!p.contains('{'));
    }
}
