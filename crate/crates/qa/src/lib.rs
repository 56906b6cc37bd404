//! Questions about benchmark results, answered from the result store.
//!
//! A question is translated to SQL either by the built-in grammar or by an
//! optional external translator, verified, executed read-only, and turned
//! into text, a chart description, the SQL and the rows.

pub mod answer;
pub mod ast;
pub mod canonical;
pub mod compile;
pub mod demo;
pub mod grammar;
pub mod session;
pub mod translator;

pub use answer::{AnswerSource, ChartSpec, ChartType, Plan, QaAnswer, QaEngine};
pub use ast::{CharacteristicFilter, Direction, HorizonClass, QueryAst, QueryKind, Scope};
pub use canonical::{canonical_questions, CanonicalQuestion, TOP_METHODS_QUESTION};
pub use compile::ast_to_sql;
pub use demo::{build_demo_store, demo_corpus, demo_store_in_memory, DemoError};
pub use grammar::{parse_question, suggestions, ParseFailed, GRAMMAR_EBNF, TEMPLATES};
pub use session::{SessionHistory, Turn, MAX_TURNS};
pub use translator::{extract_sql, render_prompt, LlmTranslator, TranslatorConfig, TranslatorError, PROMPT_TEMPLATE};
