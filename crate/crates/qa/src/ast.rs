use std::fmt;

use easytime_core::features::{CharacteristicVector, CONSTANTS};
use easytime_core::metrics::Metric;
use serde::{Deserialize, Serialize};

pub const MAX_K: usize = 100;

/// Horizons at or above this are "long-term".
pub const LONG_HORIZON_MIN: usize = 96;
/// Horizons at or below this are "short-term".
pub const SHORT_HORIZON_MAX: usize = 48;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryKind {
    TopK,
    BestOnDataset,
    CompareTwo,
    CharacteristicStats,
    HorizonBreakdown,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HorizonClass {
    Short,
    Long,
    #[default]
    Any,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", content = "name")]
pub enum Scope {
    #[default]
    All,
    Univariate,
    Multivariate,
    Domain(String),
    Dataset(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = ">")]
    Greater,
    #[serde(rename = "<")]
    Less,
}

impl Direction {
    pub fn symbol(self) -> &'static str {
        match self {
            Direction::Greater => ">",
            Direction::Less => "<",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicFilter {
    pub name: String,
    pub threshold: f64,
    pub direction: Direction,
}

impl CharacteristicFilter {
    pub fn strong(name: &str) -> Self {
        Self { name: name.to_string(), threshold: CONSTANTS.strong_threshold, direction: Direction::Greater }
    }

    pub fn weak(name: &str) -> Self {
        Self { name: name.to_string(), threshold: CONSTANTS.weak_threshold, direction: Direction::Less }
    }
}

impl fmt::Display for CharacteristicFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.name, self.direction.symbol(), self.threshold)
    }
}

/// A parsed question.
///
/// `methods` holds the pair of a comparison; `method` the subject of a
/// horizon breakdown; `characteristic` the averaged score of a
/// characteristic-stats query (absent means "count datasets").
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryAst {
    pub kind: QueryKind,
    pub k: usize,
    pub metric: Metric,
    pub horizon_class: HorizonClass,
    pub scope: Scope,
    pub characteristic_filter: Option<CharacteristicFilter>,
    pub methods: Option<(String, String)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub characteristic: Option<String>,
}

impl QueryAst {
    pub fn new(kind: QueryKind) -> Self {
        Self {
            kind,
            k: 1,
            metric: Metric::Mae,
            horizon_class: HorizonClass::Any,
            scope: Scope::All,
            characteristic_filter: None,
            methods: None,
            method: None,
            characteristic: None,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(1..=MAX_K).contains(&self.k) {
            return Err(format!("k must be between 1 and {MAX_K}, got {}", self.k));
        }
        let known = |n: &str| CharacteristicVector::NAMES.contains(&n);
        if let Some(f) = &self.characteristic_filter {
            if !known(&f.name) {
                return Err(format!("unknown characteristic '{}'", f.name));
            }
            if !f.threshold.is_finite() {
                return Err("characteristic threshold must be finite".into());
            }
        }
        if let Some(c) = &self.characteristic {
            if !known(c) {
                return Err(format!("unknown characteristic '{c}'"));
            }
        }
        match self.kind {
            QueryKind::CompareTwo if self.methods.is_none() => Err("compare_two needs two methods".into()),
            QueryKind::HorizonBreakdown if self.method.is_none() => Err("horizon_breakdown needs a method".into()),
            QueryKind::BestOnDataset if !matches!(self.scope, Scope::Dataset(_)) => {
                Err("best_on_dataset needs a dataset scope".into())
            }
            _ => Ok(()),
        }
    }

    /// Trailing qualifier phrase used in answers, e.g.
    /// " for long-term forecasting on multivariate datasets with trend > 0.6".
    pub fn context(&self) -> String {
        let mut out = String::new();
        match self.horizon_class {
            HorizonClass::Long => out.push_str(&format!(" for long-term forecasting (horizon >= {LONG_HORIZON_MIN})")),
            HorizonClass::Short => {
                out.push_str(&format!(" for short-term forecasting (horizon <= {SHORT_HORIZON_MAX})"))
            }
            HorizonClass::Any => {}
        }
        match &self.scope {
            Scope::All => {}
            Scope::Univariate => out.push_str(" on univariate datasets"),
            Scope::Multivariate => out.push_str(" on multivariate datasets"),
            Scope::Domain(d) => out.push_str(&format!(" in domain {d}")),
            Scope::Dataset(d) => out.push_str(&format!(" on dataset {d}")),
        }
        if let Some(f) = &self.characteristic_filter {
            out.push_str(&format!(" with {f}"));
        }
        out
    }
}
