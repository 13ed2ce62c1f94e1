use serde::{Deserialize, Serialize};

use crate::data::Example;
use crate::graphworld::GroundedAction;
use crate::models::{is_correct, Model};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feedback {
    Correct,
    Incorrect,
    Unavailable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackReport {
    pub feedback: Feedback,
    pub predicted: Option<Vec<GroundedAction>>,
}

/// Whether the previous round's model already solves `example` (end-state
/// equivalence), with its prediction.
pub fn model_feedback(previous: Option<&Model>, example: &Example) -> FeedbackReport {
    let Some(model) = previous else {
        return FeedbackReport { feedback: Feedback::Unavailable, predicted: None };
    };
    match model.predict(&example.command, &example.world) {
        Ok(predicted) => {
            let correct = is_correct(&example.world, &example.actions, &predicted);
            FeedbackReport {
                feedback: if correct { Feedback::Correct } else { Feedback::Incorrect },
                predicted: Some(predicted),
            }
        }
        Err(_) => FeedbackReport { feedback: Feedback::Unavailable, predicted: None },
    }
}
