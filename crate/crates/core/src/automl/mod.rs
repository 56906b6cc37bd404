//! Recommend-then-ensemble: offline pretraining of a soft-label classifier
//! over a meta-corpus, then per-series recommendation, candidate training,
//! and convex weight fitting on the validation segment.

mod classifier;
pub mod corpus;
mod ensemble;
mod meta;
mod pretrain;
mod simplex;

use thiserror::Error;

use crate::error::DataError;
use crate::evaluation::EvalError;
use crate::features::FeatureError;

pub use classifier::{
    loss_and_gradient, rank, recommend, train_classifier, ClassifierHyper, ClassifierModel, RankedMethod,
    Recommendation, TrainMeta,
};
pub use ensemble::{build_ensemble, evaluate_ensemble, EnsembleMember, EnsembleModel, MemberValidation};
pub use meta::{build_soft_labels, soft_label, MetaDataset, MetaRow, SoftLabelMatrix};
pub use pretrain::{collect_meta_dataset, pretrain_offline, PretrainOptions, PretrainOutcome};
pub use simplex::{ensemble_loss, fit_ensemble_weights, project_simplex, WeightFit};

/// Number of candidates when the caller does not choose.
pub const DEFAULT_K: usize = 3;

/// The classifier shipped with the workbench: all built-in methods,
/// pretrained on [`corpus::meta_corpus`] with [`corpus::pretrain_eval_config`]
/// and default hyperparameters.
pub const PRETRAINED_MODEL_JSON: &str = include_str!("../../assets/pretrained_model.json");

pub fn pretrained_model() -> ClassifierModel {
    ClassifierModel::from_json(PRETRAINED_MODEL_JSON).expect("shipped model is valid")
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutomlError {
    #[error("invalid meta-dataset: {0}")]
    InvalidMeta(String),
    #[error("invalid hyperparameters: {0}")]
    InvalidHyper(String),
    #[error("invalid classifier model: {0}")]
    InvalidModel(String),
    #[error("model built for representation version {found}, this build uses {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("training loss became non-finite at epoch {epoch} (previous loss {last_loss})")]
    NonFiniteLoss { epoch: usize, last_loss: f64 },
    #[error("k = {k} is outside 1..={methods}")]
    InvalidK { k: usize, methods: usize },
    #[error("invalid ensemble input: {0}")]
    NonFiniteInput(String),
    #[error("every candidate failed: {}", .0.join("; "))]
    AllCandidatesFailed(Vec<String>),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Data(#[from] DataError),
}
