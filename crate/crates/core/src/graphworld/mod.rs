//! GraphWorld: the text-adventure engine. Game state is a graph of typed
//! entities; every action is a precondition check followed by a graph
//! rewrite.

mod action;
mod builder;
mod catalog;
mod engine;
pub mod fixtures;
mod generate;
mod parse;
mod render;
mod world;

pub use action::{format_sequence, ActionType, GroundedAction};
pub use builder::WorldBuilder;
pub use catalog::{Catalog, CatalogAgent, CatalogInstance, CatalogObject, WorldShape};
pub use engine::{action_space, check_preconditions, execute, execute_sequence, valid_actions, Binding};
pub use generate::generate_world;
pub use parse::{parse_action, parse_action_sequence, parse_action_with, tokenize, PhraseMatcher};
pub use render::{describe_outcome, render, render_inventory};
pub use world::{states_equal, Edge, EntityKind, EntityNode, NodeId, Property, Relation, WorldGraph};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GraphError {
    #[error("invalid catalog: {0}")]
    InvalidCatalog(String),
    #[error("invalid world: {0}")]
    InvalidWorld(String),
    #[error("cannot {action}: {reason}")]
    PreconditionFailed { action: String, reason: String },
    #[error("unknown entity {0:?}")]
    UnknownEntity(String),
    #[error("unknown entity {text:?} at token {position}")]
    UnknownEntityAt { position: usize, text: String },
    #[error("unknown verb {verb:?} at token {position}")]
    UnknownVerb { position: usize, verb: String },
    #[error("{action_type} takes {expected} argument(s), found {found}")]
    ArityMismatch { action_type: ActionType, expected: usize, found: usize },
    #[error("ambiguous parse at token {position}: {message}")]
    AmbiguousParse { position: usize, message: String },
}
