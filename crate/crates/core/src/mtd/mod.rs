//! Mechanical Turker Descent: rounds of competitive data collection. Each
//! round every annotator's data trains a model that is scored on everyone
//! else's data, then all of it is merged into shared train and test pools.

mod feedback;
mod round;
mod score;
mod sim;

pub use feedback::{model_feedback, Feedback, FeedbackReport};
pub use round::{
    assign_bonus, filter_poor_data, leaderboard, merge_and_split, pool_fingerprint, run_round, AnnotatorDataset,
    CollectionMode, MtdConfig, RoundState, SharedPools,
};
pub use score::{score_annotator, DatasetId};
pub use sim::{
    annotator_id, annotator_seed, simulate, simulate_condition, Condition, RoundSummary, RunManifest, SimulationRun,
    Start,
};

use crate::annotators::AnnotatorError;
use crate::models::ModelError;

#[derive(Debug, thiserror::Error)]
pub enum MtdError {
    #[error("no accuracy recorded for {0}")]
    MissingAccuracy(String),
    #[error("score has no evaluation data: a single annotator and an empty test pool")]
    ZeroDenominator,
    #[error("invalid submission: {0}")]
    Submission(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Annotator(#[from] AnnotatorError),
}
