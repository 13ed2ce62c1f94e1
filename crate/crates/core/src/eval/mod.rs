//! Evaluation: end-state accuracy, hits@k, action-level F1, length
//! breakdowns, compositional splits and multi-seed experiment reports.

mod experiment;
mod metrics;
mod split;

pub use metrics::{
    accuracy, accuracy_with, action_f1, breakdown_by_length, gold_rank, hits_at_k, hits_at_ks, mean_std, sequence_f1,
    Bucket,
};
pub use experiment::{
    run_experiment, run_seed, ConditionReport, CurvePoint, EvalReport, ExperimentConfig, SeedOutcome, Summary,
};
pub use split::{combinations, compositional_split, Combination, CompositionalSplit};

use crate::annotators::AnnotatorError;
use crate::models::ModelError;
use crate::mtd::MtdError;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("ranking needs at least {needed} test examples, got {got}")]
    TooFewExamples { needed: usize, got: usize },
    #[error("an experiment needs at least one seed")]
    NoSeeds,
    #[error("a condition finished without a pooled model")]
    NoModel,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Mtd(#[from] MtdError),
    #[error(transparent)]
    Annotator(#[from] AnnotatorError),
}
