//! The question-to-answer chain: translate, verify, execute, describe, chart.

use easytime_store::{schema_text, verify_sql, QueryResult, Store, Value, VerifiedSql};
use serde::{Deserialize, Serialize};

use crate::ast::{QueryAst, QueryKind};
use crate::compile::ast_to_sql;
use crate::grammar::{parse_question, ParseFailed};
use crate::session::{SessionHistory, Turn};
use crate::translator::{LlmTranslator, TranslatorConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChartType {
    Bar,
    Line,
    Pie,
    Table,
}

/// What to draw. Table charts carry no series; the rows are the content.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartSpec {
    pub chart_type: ChartType,
    pub title: String,
    pub x: Vec<String>,
    pub y: Vec<f64>,
    pub y_label: String,
}

impl ChartSpec {
    fn table(title: impl Into<String>) -> Self {
        Self { chart_type: ChartType::Table, title: title.into(), x: vec![], y: vec![], y_label: String::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnswerSource {
    Grammar,
    Llm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaAnswer {
    pub question: String,
    pub text: String,
    /// The verified statement that produced `rows`; absent when no query ran.
    pub sql: Option<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    pub chart: ChartSpec,
    pub source: AnswerSource,
    pub ast: Option<QueryAst>,
    /// Translator fallbacks, rejected statements and verifier notices.
    pub notices: Vec<String>,
    /// Template questions offered when the question could not be parsed.
    pub suggestions: Vec<String>,
    pub error: Option<String>,
}

/// A translated question, ready to run.
#[derive(Debug, Clone)]
pub enum Plan {
    Query { sql: VerifiedSql, ast: Option<QueryAst>, source: AnswerSource, notices: Vec<String> },
    Unparsed { failure: ParseFailed, notices: Vec<String> },
}

#[derive(Debug, Clone, Default)]
pub struct QaEngine {
    translator: Option<LlmTranslator>,
}

impl QaEngine {
    pub fn grammar_only() -> Self {
        Self { translator: None }
    }

    pub fn with_translator(translator: LlmTranslator) -> Self {
        Self { translator: Some(translator) }
    }

    /// Uses the external translator when `QA_LLM_URL` is set.
    pub fn from_env() -> Self {
        Self { translator: TranslatorConfig::from_env().map(LlmTranslator::new) }
    }

    pub fn has_translator(&self) -> bool {
        self.translator.is_some()
    }

    /// Translation and verification; touches no store.
    pub fn plan(&self, question: &str, history: &[Turn]) -> Plan {
        let mut notices = Vec::new();
        if let Some(translator) = &self.translator {
            match translator.translate(question, &schema_text(), history) {
                Ok(sql) => {
                    let verdict = verify_sql(&sql);
                    let verifier_notices = verdict.notices.clone();
                    match verdict.into_verified() {
                        Ok(sql) => {
                            notices.extend(verifier_notices);
                            return Plan::Query { sql, ast: None, source: AnswerSource::Llm, notices };
                        }
                        Err(verdict) => {
                            notices.push(format!("translator SQL rejected ({}); used the grammar", verdict.summary()))
                        }
                    }
                }
                Err(e) => notices.push(format!("{e}; used the grammar")),
            }
        }
        match parse_question(question) {
            Ok(ast) => {
                let verdict = verify_sql(&ast_to_sql(&ast));
                notices.extend(verdict.notices.iter().cloned());
                match verdict.into_verified() {
                    Ok(sql) => Plan::Query { sql, ast: Some(ast), source: AnswerSource::Grammar, notices },
                    Err(verdict) => Plan::Unparsed {
                        failure: ParseFailed { reason: verdict.summary(), suggestions: vec![] },
                        notices,
                    },
                }
            }
            Err(failure) => Plan::Unparsed { failure, notices },
        }
    }

    /// Runs a plan against `store` and renders the answer.
    pub fn execute(&self, question: &str, plan: Plan, store: &Store) -> QaAnswer {
        match plan {
            Plan::Unparsed { failure, notices } => QaAnswer {
                question: question.to_string(),
                text: help_text(&failure),
                sql: None,
                columns: vec![],
                rows: vec![],
                chart: ChartSpec::table("No query"),
                source: AnswerSource::Grammar,
                ast: None,
                notices,
                suggestions: failure.suggestions,
                error: Some(failure.reason),
            },
            Plan::Query { sql, ast, source, notices } => {
                let mut answer = QaAnswer {
                    question: question.to_string(),
                    text: String::new(),
                    sql: Some(sql.as_str().to_string()),
                    columns: vec![],
                    rows: vec![],
                    chart: ChartSpec::table("Query result"),
                    source,
                    ast: ast.clone(),
                    notices,
                    suggestions: vec![],
                    error: None,
                };
                match store.execute_select(&sql) {
                    Ok(result) => {
                        let (text, chart) = match &ast {
                            Some(ast) => describe(ast, &result),
                            None => describe_free(&result),
                        };
                        answer.text = text;
                        answer.chart = chart;
                        answer.columns = result.columns;
                        answer.rows = result.rows;
                    }
                    Err(e) => {
                        answer.text = format!("The query could not be executed: {e}");
                        answer.error = Some(e.to_string());
                    }
                }
                answer
            }
        }
    }

    /// Full chain; the turn is appended to `session`.
    pub fn answer(&self, question: &str, session: &mut SessionHistory, store: &Store) -> QaAnswer {
        let plan = self.plan(question, session.turns());
        let answer = self.execute(question, plan, store);
        session.push(Turn { question: question.to_string(), answer: answer.clone() });
        answer
    }
}

fn help_text(failure: &ParseFailed) -> String {
    let mut text = format!("I could not understand the question ({}).", failure.reason);
    if !failure.suggestions.is_empty() {
        text.push_str(" Try one of these:");
        for s in &failure.suggestions {
            text.push_str(&format!("\n- {s}"));
        }
    }
    text
}

/// `(label, value)` pairs from the first two columns, if every value is numeric.
fn series(result: &QueryResult) -> Option<(Vec<String>, Vec<f64>)> {
    if result.columns.len() < 2 {
        return None;
    }
    let mut x = Vec::with_capacity(result.rows.len());
    let mut y = Vec::with_capacity(result.rows.len());
    for row in &result.rows {
        x.push(row[0].render());
        y.push(row[1].as_f64()?);
    }
    Some((x, y))
}

fn enumerate(x: &[String], y: &[f64]) -> String {
    x.iter().zip(y).enumerate().map(|(i, (n, v))| format!("{}. {n} ({v:.3})", i + 1)).collect::<Vec<_>>().join(", ")
}

fn pairs(x: &[String], y: &[f64], digits: usize) -> String {
    x.iter().zip(y).map(|(n, v)| format!("{n} {v:.digits$}")).collect::<Vec<_>>().join(", ")
}

fn describe(ast: &QueryAst, result: &QueryResult) -> (String, ChartSpec) {
    let metric = ast.metric.name().to_ascii_uppercase();
    let ctx = ast.context();
    let subject = match ast.kind {
        QueryKind::TopK => format!("the top-{} methods by {metric}{ctx}", ast.k),
        QueryKind::BestOnDataset => format!("the best method by {metric}{ctx}"),
        QueryKind::CompareTwo => {
            let (a, b) = ast.methods.as_ref().expect("validated ast");
            format!("a comparison of {a} and {b} by {metric}{ctx}")
        }
        QueryKind::HorizonBreakdown => {
            format!("{} by {metric} across horizons{ctx}", ast.method.as_deref().unwrap_or_default())
        }
        QueryKind::CharacteristicStats => match &ast.characteristic {
            Some(c) => format!("the average {c} of datasets{ctx}"),
            None => format!("datasets{ctx}"),
        },
    };
    let Some((x, y)) = series(result).filter(|(x, _)| !x.is_empty()) else {
        return (format!("No benchmark results match {subject}."), ChartSpec::table(subject));
    };
    let n = x.len();
    let title = capitalize(&subject);
    match ast.kind {
        QueryKind::TopK => {
            let mut text = format!("The top-{n} methods by {metric}{ctx} are: {}.", enumerate(&x, &y));
            if n < ast.k {
                text.push_str(&format!(" Only {n} of the requested {} methods have results.", ast.k));
            }
            (text, ChartSpec { chart_type: ChartType::Bar, title, x, y, y_label: metric })
        }
        QueryKind::BestOnDataset => {
            let text = format!("The best method by {metric}{ctx} is {} ({:.3}).", x[0], y[0]);
            (text, ChartSpec { chart_type: ChartType::Bar, title, x, y, y_label: metric })
        }
        QueryKind::CompareTwo => {
            let text = if n == 2 {
                format!(
                    "By {metric}{ctx}, {} averages {:.3} and {} averages {:.3}, so {} has the lower error.",
                    x[0], y[0], x[1], y[1], x[0]
                )
            } else {
                format!("Only {} has results by {metric}{ctx}: {:.3} on average.", x[0], y[0])
            };
            (text, ChartSpec { chart_type: ChartType::Bar, title, x, y, y_label: metric })
        }
        QueryKind::HorizonBreakdown => {
            let steps = x.iter().zip(&y).map(|(h, v)| format!("horizon {h}: {v:.3}")).collect::<Vec<_>>().join(", ");
            let text = format!("{} by {metric}{ctx}: {steps}.", ast.method.as_deref().unwrap_or_default());
            (text, ChartSpec { chart_type: ChartType::Line, title, x, y, y_label: metric })
        }
        QueryKind::CharacteristicStats => match &ast.characteristic {
            Some(c) => {
                let text = format!("Average {c} of datasets{ctx} by domain: {}.", pairs(&x, &y, 3));
                (text, ChartSpec { chart_type: ChartType::Bar, title, x, y, y_label: c.clone() })
            }
            None => {
                let total: f64 = y.iter().sum();
                let text = format!("Datasets{ctx} per domain: {} ({total} in total).", pairs(&x, &y, 0));
                (text, ChartSpec { chart_type: ChartType::Pie, title, x, y, y_label: "datasets".into() })
            }
        },
    }
}

/// Answer for SQL that came from the external translator.
fn describe_free(result: &QueryResult) -> (String, ChartSpec) {
    if result.rows.is_empty() {
        return ("No benchmark results match the query.".into(), ChartSpec::table("Query result"));
    }
    let n = result.rows.len();
    let plural = if n == 1 { "row" } else { "rows" };
    match series(result) {
        Some((x, y)) => {
            let shown = 10.min(n);
            let mut text = format!("The query returned {n} {plural}: {}", enumerate(&x[..shown], &y[..shown]));
            if shown < n {
                text.push_str(", ...");
            }
            text.push('.');
            let y_label = result.columns[1].clone();
            (text, ChartSpec { chart_type: ChartType::Bar, title: "Query result".into(), x, y, y_label })
        }
        None => (format!("The query returned {n} {plural}."), ChartSpec::table("Query result")),
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}
