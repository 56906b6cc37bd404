//! The constrained question grammar (see `assets/grammar.ebnf`).

use std::collections::BTreeSet;
use std::sync::LazyLock;

use easytime_core::metrics::Metric;
use regex::{Captures, Regex};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ast::{CharacteristicFilter, HorizonClass, QueryAst, QueryKind, Scope};

pub const GRAMMAR_EBNF: &str = include_str!("../assets/grammar.ebnf");

/// Example questions offered when parsing fails.
pub const TEMPLATES: [&str; 8] = [
    "What are the top-8 methods (ordered by MAE) for long-term forecasting on all multivariate datasets with trends?",
    "top-3 methods by smape on domain traffic",
    "What is the best method on dataset ETTh1-like by mae?",
    "Compare theta and holt_winters by mase for short-term forecasting",
    "How does seasonal_naive perform across horizons by mae?",
    "What is the average trend of datasets per domain?",
    "How many datasets with strong seasonality per domain?",
    "top-5 methods by rmse on univariate datasets with weak trend",
];

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("could not parse question: {reason}")]
pub struct ParseFailed {
    pub reason: String,
    pub suggestions: Vec<String>,
}

const NAME: &str = r"[A-Za-z0-9][A-Za-z0-9_.:\-]*";
const LEAD: &str = r"(?:(?:what\s+are|what\s+is|which\s+are|show(?:\s+me)?|list|give\s+me|find)\s+)?";
const METHOD_NOUN: &str = r"(?:methods?|models?|forecasters?)";
const METRIC: &str = r"(?P<metric>mae|mse|rmse|mape|smape|mase)";
const CHARACTERISTIC: &str = r"(?P<ch>seasonality|trend|transition|shifting|stationarity|correlation)";

fn re(pattern: &str) -> Regex {
    Regex::new(&format!("(?i)^{pattern}")).expect("grammar regex compiles")
}

struct Heads {
    top_k: Regex,
    best: Regex,
    best_which: Regex,
    compare: Regex,
    horizons: Regex,
    average: Regex,
    count: Regex,
}

static HEADS: LazyLock<Heads> = LazyLock::new(|| Heads {
    top_k: re(&format!(r"{LEAD}(?:the\s+)?top\s*-?\s*(?P<k>\d+)\s+{METHOD_NOUN}\b(?P<rest>.*)$")),
    best: re(&format!(
        r"{LEAD}(?:the\s+)?best\s+{METHOD_NOUN}\s+(?:on|for)\s+(?:the\s+)?dataset\s+(?P<name>{NAME})(?P<rest>.*)$"
    )),
    best_which: re(&format!(
        r"which\s+{METHOD_NOUN}\s+is\s+(?:the\s+)?best\s+on\s+(?:the\s+)?dataset\s+(?P<name>{NAME})(?P<rest>.*)$"
    )),
    compare: re(&format!(r"compare\s+(?P<a>{NAME})\s+(?:and|with|vs\.?|versus)\s+(?P<b>{NAME})(?P<rest>.*)$")),
    horizons: re(&format!(r"how\s+does\s+(?P<name>{NAME})\s+perform\s+(?:across|over|by)\s+horizons?\b(?P<rest>.*)$")),
    average: re(&format!(
        r"{LEAD}(?:the\s+)?(?:average|mean)\s+{CHARACTERISTIC}\s+(?:of|across)\s+(?:all\s+)?(?:the\s+)?datasets\b(?P<rest>.*)$"
    )),
    count: re(r"how\s+many\s+datasets(?:\s+are\s+there)?\b(?P<rest>.*)$"),
});

struct Modifiers {
    metric: Regex,
    horizon: Regex,
    scope_variate: Regex,
    scope_all: Regex,
    scope_domain: Regex,
    scope_the_domain: Regex,
    scope_dataset: Regex,
    filter: Regex,
    filter_adjective: Regex,
    per_domain: Regex,
    filler: Regex,
}

static MODIFIERS: LazyLock<Modifiers> = LazyLock::new(|| Modifiers {
    metric: re(&format!(r"(?:(?:(?:ordered|ranked|sorted)\s+)?by|in\s+terms\s+of)\s+{METRIC}\b")),
    horizon: re(r"(?:for\s+)?(?P<h>long|short)\s*-?\s*(?:term|horizon)(?:\s+forecasting)?\b"),
    scope_variate: re(r"(?:on|in|across|for)\s+(?:all\s+)?(?:the\s+)?(?P<v>multivariate|univariate)\s+datasets\b"),
    scope_all: re(r"(?:on|in|across|for)\s+all\s+(?:the\s+)?datasets\b"),
    scope_domain: re(&format!(r"(?:on|in|across|for)\s+(?:the\s+)?domain\s+(?P<name>{NAME})")),
    scope_the_domain: re(&format!(r"(?:on|in|across|for)\s+the\s+(?P<name>{NAME})\s+domain\b")),
    scope_dataset: re(&format!(r"(?:on|in|across|for)\s+(?:the\s+)?dataset\s+(?P<name>{NAME})")),
    filter: re(concat!(
        r"(?:with|that\s+have|having)\s+(?:(?P<s>strong|high|weak|low|little)\s+)?",
        r"(?P<c>seasonality|seasonal\s+patterns|trends?|transitions?|shifting|level\s+shifts|shifts|",
        r"stationarity|correlation|correlated\s+channels)\b"
    )),
    filter_adjective: re(r"(?:that|which)\s+are\s+(?P<a>seasonal|trending|stationary|non-stationary|correlated)\b"),
    per_domain: re(r"(?:per|by|for\s+each)\s+domain\b"),
    filler: re(r"forecasting\b"),
});

/// Lower-cases nothing; strips `( ) , ? ! "` and sentence-final dots, and
/// collapses whitespace.
fn normalize(text: &str) -> String {
    let cleaned: String =
        text.chars().map(|c| if matches!(c, '(' | ')' | ',' | '?' | '!' | '"' | ';') { ' ' } else { c }).collect();
    let joined = cleaned.split_whitespace().collect::<Vec<_>>().join(" ");
    joined.trim_end_matches('.').trim().to_string()
}

fn words(text: &str) -> BTreeSet<String> {
    text.split(|c: char| !c.is_ascii_alphanumeric()).filter(|w| !w.is_empty()).map(|w| w.to_ascii_lowercase()).collect()
}

/// The `n` templates sharing the most words with `question`.
pub fn suggestions(question: &str, n: usize) -> Vec<String> {
    let q = words(question);
    let mut scored: Vec<(f64, usize)> = TEMPLATES
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let t = words(t);
            let inter = q.intersection(&t).count() as f64;
            let union = q.union(&t).count().max(1) as f64;
            (inter / union, i)
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    scored.into_iter().take(n).map(|(_, i)| TEMPLATES[i].to_string()).collect()
}

fn characteristic_of(noun: &str) -> &'static str {
    let n = noun.to_ascii_lowercase();
    if n.starts_with("season") {
        "seasonality"
    } else if n.starts_with("trend") {
        "trend"
    } else if n.starts_with("transition") {
        "transition"
    } else if n.starts_with("shift") || n.starts_with("level") {
        "shifting"
    } else if n.starts_with("stationar") || n.starts_with("non-stationar") {
        "stationarity"
    } else {
        "correlation"
    }
}

#[derive(Default)]
struct Seen {
    metric: bool,
    horizon: bool,
    scope: bool,
    filter: bool,
    per_domain: bool,
}

fn once(flag: &mut bool, what: &str) -> Result<(), String> {
    if std::mem::replace(flag, true) {
        Err(format!("{what} given twice"))
    } else {
        Ok(())
    }
}

/// Consumes the modifier clauses in `rest`, updating `ast`.
fn apply_modifiers(ast: &mut QueryAst, rest: &str) -> Result<(), String> {
    let m = &*MODIFIERS;
    let stats = ast.kind == QueryKind::CharacteristicStats;
    let mut seen = Seen { scope: matches!(ast.scope, Scope::Dataset(_)), ..Seen::default() };
    let mut rest = rest.trim();
    while !rest.is_empty() {
        let step = |r: &Regex| r.captures(rest);
        let consumed;
        if let Some(c) = step(&m.metric) {
            if stats {
                return Err("a metric does not apply to dataset statistics".into());
            }
            once(&mut seen.metric, "the metric")?;
            ast.metric = c["metric"].to_ascii_lowercase().parse::<Metric>().map_err(|e| e.to_string())?;
            consumed = c.get(0).map_or(0, |g| g.end());
        } else if let Some(c) = step(&m.horizon) {
            if stats {
                return Err("a horizon does not apply to dataset statistics".into());
            }
            once(&mut seen.horizon, "the horizon")?;
            ast.horizon_class =
                if c["h"].eq_ignore_ascii_case("long") { HorizonClass::Long } else { HorizonClass::Short };
            consumed = end(&c);
        } else if let Some(c) = step(&m.scope_variate) {
            once(&mut seen.scope, "the scope")?;
            ast.scope =
                if c["v"].eq_ignore_ascii_case("multivariate") { Scope::Multivariate } else { Scope::Univariate };
            consumed = end(&c);
        } else if let Some(c) = step(&m.scope_all) {
            once(&mut seen.scope, "the scope")?;
            ast.scope = Scope::All;
            consumed = end(&c);
        } else if let Some(c) = step(&m.scope_dataset) {
            once(&mut seen.scope, "the scope")?;
            ast.scope = Scope::Dataset(c["name"].to_string());
            consumed = end(&c);
        } else if let Some(c) = step(&m.scope_domain).or_else(|| step(&m.scope_the_domain)) {
            once(&mut seen.scope, "the scope")?;
            ast.scope = Scope::Domain(c["name"].to_string());
            consumed = end(&c);
        } else if let Some(c) = step(&m.filter) {
            once(&mut seen.filter, "a characteristic filter")?;
            let name = characteristic_of(&c["c"]);
            let weak = c
                .name("s")
                .is_some_and(|s| matches!(s.as_str().to_ascii_lowercase().as_str(), "weak" | "low" | "little"));
            ast.characteristic_filter =
                Some(if weak { CharacteristicFilter::weak(name) } else { CharacteristicFilter::strong(name) });
            consumed = end(&c);
        } else if let Some(c) = step(&m.filter_adjective) {
            once(&mut seen.filter, "a characteristic filter")?;
            let adj = c["a"].to_ascii_lowercase();
            let name = characteristic_of(&adj);
            ast.characteristic_filter = Some(if adj.starts_with("non-") {
                CharacteristicFilter::weak(name)
            } else {
                CharacteristicFilter::strong(name)
            });
            consumed = end(&c);
        } else if let Some(c) = step(&m.per_domain) {
            if !stats {
                return Err("per-domain grouping only applies to dataset statistics".into());
            }
            once(&mut seen.per_domain, "per-domain grouping")?;
            consumed = end(&c);
        } else if let Some(c) = step(&m.filler) {
            consumed = end(&c);
        } else {
            return Err(format!("unrecognized text '{rest}'"));
        }
        let after = &rest[consumed..];
        if !after.is_empty() && !after.starts_with(char::is_whitespace) {
            return Err(format!("unrecognized text '{rest}'"));
        }
        rest = after.trim_start();
    }
    Ok(())
}

fn end(c: &Captures<'_>) -> usize {
    c.get(0).map_or(0, |g| g.end())
}

fn head(text: &str) -> Option<(QueryAst, String)> {
    let h = &*HEADS;
    let rest = |c: &Captures<'_>| c.name("rest").map_or(String::new(), |r| r.as_str().to_string());
    if let Some(c) = h.top_k.captures(text) {
        let mut ast = QueryAst::new(QueryKind::TopK);
        ast.k = c["k"].parse().unwrap_or(usize::MAX);
        return Some((ast, rest(&c)));
    }
    if let Some(c) = h.best.captures(text).or_else(|| h.best_which.captures(text)) {
        let mut ast = QueryAst::new(QueryKind::BestOnDataset);
        ast.scope = Scope::Dataset(c["name"].to_string());
        return Some((ast, rest(&c)));
    }
    if let Some(c) = h.compare.captures(text) {
        let mut ast = QueryAst::new(QueryKind::CompareTwo);
        ast.k = 2;
        ast.methods = Some((c["a"].to_string(), c["b"].to_string()));
        return Some((ast, rest(&c)));
    }
    if let Some(c) = h.horizons.captures(text) {
        let mut ast = QueryAst::new(QueryKind::HorizonBreakdown);
        ast.k = crate::ast::MAX_K;
        ast.method = Some(c["name"].to_string());
        return Some((ast, rest(&c)));
    }
    if let Some(c) = h.average.captures(text) {
        let mut ast = QueryAst::new(QueryKind::CharacteristicStats);
        ast.k = crate::ast::MAX_K;
        ast.characteristic = Some(c["ch"].to_ascii_lowercase());
        return Some((ast, rest(&c)));
    }
    if let Some(c) = h.count.captures(text) {
        let mut ast = QueryAst::new(QueryKind::CharacteristicStats);
        ast.k = crate::ast::MAX_K;
        return Some((ast, rest(&c)));
    }
    None
}

/// Parses `text` into a query, or explains why it could not.
pub fn parse_question(text: &str) -> Result<QueryAst, ParseFailed> {
    let fail = |reason: String| ParseFailed { reason, suggestions: suggestions(text, 3) };
    let normalized = normalize(text);
    let Some((mut ast, rest)) = head(&normalized) else {
        return Err(fail("the question does not match any supported form".into()));
    };
    if !rest.is_empty() && !rest.starts_with(char::is_whitespace) {
        return Err(fail(format!("unrecognized text '{}'", rest.trim())));
    }
    apply_modifiers(&mut ast, &rest).map_err(fail)?;
    ast.validate().map_err(fail)?;
    Ok(ast)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::Direction;

    #[test]
    fn top_methods_question() {
        let ast = parse_question(TEMPLATES[0]).unwrap();
        assert_eq!(ast.kind, QueryKind::TopK);
        assert_eq!(ast.k, 8);
        assert_eq!(ast.metric, Metric::Mae);
        assert_eq!(ast.horizon_class, HorizonClass::Long);
        assert_eq!(ast.scope, Scope::Multivariate);
        let f = ast.characteristic_filter.unwrap();
        assert_eq!((f.name.as_str(), f.direction, f.threshold), ("trend", Direction::Greater, 0.6));
    }

    #[test]
    fn domain_question() {
        let ast = parse_question("top-3 methods by smape on domain traffic").unwrap();
        assert_eq!((ast.kind, ast.k, ast.metric), (QueryKind::TopK, 3, Metric::Smape));
        assert_eq!(ast.horizon_class, HorizonClass::Any);
        assert_eq!(ast.scope, Scope::Domain("traffic".into()));
        assert_eq!(ast.characteristic_filter, None);
    }

    #[test]
    fn other_heads() {
        let best = parse_question("Which model is best on dataset ETTh1-like?").unwrap();
        assert_eq!(best.scope, Scope::Dataset("ETTh1-like".into()));
        let cmp = parse_question("compare naive vs theta in terms of MASE for short-term forecasting").unwrap();
        assert_eq!(cmp.methods, Some(("naive".into(), "theta".into())));
        assert_eq!((cmp.metric, cmp.horizon_class), (Metric::Mase, HorizonClass::Short));
        let hz = parse_question("How does holt perform over horizons on the energy domain").unwrap();
        assert_eq!(hz.scope, Scope::Domain("energy".into()));
        let count = parse_question("how many datasets that are non-stationary by domain").unwrap();
        assert_eq!(count.characteristic_filter, Some(CharacteristicFilter::weak("stationarity")));
        assert_eq!(count.characteristic, None);
    }

    #[test]
    fn rejects() {
        let e = parse_question("tell me a joke").unwrap_err();
        assert_eq!(e.suggestions.len(), 3);
        assert!(parse_question("top-0 methods").is_err());
        assert!(parse_question("top-101 methods").is_err());
        assert!(parse_question("top-3 methods by mae by mse").is_err());
        assert!(parse_question("top-3 methods by mae please").is_err());
        assert!(parse_question("how many datasets by mae").is_err());
        assert!(parse_question("top-3 methodsx").is_err());
        assert!(parse_question("best method on dataset a on domain b").is_err());
    }
}
