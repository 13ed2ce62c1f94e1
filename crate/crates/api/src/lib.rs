//! Request and response bodies of the dungeon HTTP API. Actions travel as
//! their canonical text form ("put crossbow in treasure chest").

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Teach sessions record examples; play sessions are free play with no
/// buffer limit and nothing stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionMode {
    #[default]
    Teach,
    Play,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CreateSession {
    pub annotator: String,
    #[serde(default)]
    pub mode: SessionMode,
    /// Must match the open round when given.
    #[serde(default)]
    pub round: Option<u32>,
    /// A named fixture world ("walkthrough") instead of a generated one.
    #[serde(default)]
    pub world: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub annotator: String,
    pub mode: SessionMode,
    pub round: u32,
    pub world_seed: Option<u64>,
    pub render: String,
    pub valid_actions: Vec<String>,
    pub pending: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionRequest {
    pub action: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionResponse {
    /// The game's reply, as it would be printed after the prompt.
    pub message: String,
    pub session: SessionView,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TeachRequest {
    pub command: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackKind {
    Correct,
    Incorrect,
    Unavailable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExampleRecord {
    pub id: String,
    pub command: String,
    pub actions: Vec<String>,
    pub annotator: String,
    pub round: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TeachResponse {
    pub example: ExampleRecord,
    pub feedback: FeedbackKind,
    pub predicted: Option<Vec<String>>,
    pub session: SessionView,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub rank: usize,
    pub annotator: String,
    pub score: f64,
    pub bonus: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leaderboard {
    /// The round the scores belong to; `None` before any round completed.
    pub round: Option<u32>,
    pub entries: Vec<LeaderboardEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundStatus {
    pub round: u32,
    pub open: bool,
    pub advancing: bool,
    pub submissions: BTreeMap<String, usize>,
    pub train_pool: usize,
    pub test_pool: usize,
    pub has_model: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvanceResponse {
    pub completed_round: u32,
    pub leaderboard: Leaderboard,
    pub excluded: Vec<String>,
    pub status: RoundStatus,
}

/// Body of every non-2xx response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: String,
    pub message: String,
    /// Token position of a parse failure.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<usize>,
}

/// Header carrying the admin token for round administration.
pub const ADMIN_HEADER: &str = "x-admin-token";
