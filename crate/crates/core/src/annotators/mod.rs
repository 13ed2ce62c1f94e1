//! Simulated annotators standing in for human teachers, and the pilot-data
//! generator. Every example they emit replays fully in its world.

mod templates;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Example;
use crate::graphworld::{execute, generate_world, valid_actions, ActionType, Catalog, GraphError, GroundedAction, states_equal, WorldGraph};
use crate::models::{Model, MAX_ACTIONS};
use crate::mtd::{model_feedback, Feedback};

pub use templates::{Template, TemplateBank, Tier};

#[derive(Debug, thiserror::Error)]
pub enum AnnotatorError {
    #[error("template bank: {0}")]
    Templates(String),
    #[error(transparent)]
    World(#[from] GraphError),
    #[error("no executable sequence of length {0} found after many worlds")]
    Exhausted(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    StaticUniform,
    CurriculumAdaptive,
    EasySpammer,
    HardSpammer,
    Noise,
}

impl std::str::FromStr for PolicyKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        serde_json::from_value(serde_json::Value::String(s.replace('-', "_"))).map_err(|_| format!("unknown policy {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnotatorPolicy {
    pub kind: PolicyKind,
    pub seed: u64,
    /// Examples per round when collection is time-budgeted.
    pub productivity: usize,
    pub rare_probability: f64,
    /// How often a curriculum annotator may regenerate an example the model
    /// already solves.
    pub retry_cap: usize,
}

/// Action types worth teaching: look and examine never change the world, so
/// any prediction would match their end state.
fn teachable(t: ActionType) -> bool {
    !matches!(t, ActionType::Look | ActionType::Examine)
}

/// Random executable walk of exactly `len` actions: a type is chosen
/// uniformly among those available, then an action of that type. Walks that
/// revisit their final state (say "get x" then "drop x") are resampled, since
/// a shorter prediction would already solve them.
pub fn sample_sequence(world: &WorldGraph, len: usize, rng: &mut impl Rng) -> Option<Vec<GroundedAction>> {
    for _ in 0..20 {
        let (walk, states) = random_walk(world, len, rng)?;
        let (end, earlier) = states.split_last().expect("walks record the start state");
        if !earlier.iter().any(|s| states_equal(s, end)) {
            return Some(walk);
        }
    }
    None
}

fn random_walk(world: &WorldGraph, len: usize, rng: &mut impl Rng) -> Option<(Vec<GroundedAction>, Vec<WorldGraph>)> {
    let mut w = world.clone();
    let mut states = vec![w.clone()];
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        let candidates: Vec<GroundedAction> = valid_actions(&w).into_iter().filter(|a| teachable(a.action_type)).collect();
        let mut types: Vec<ActionType> = candidates.iter().map(|a| a.action_type).collect();
        types.dedup();
        let t = *types.choose(rng)?;
        let of_type: Vec<&GroundedAction> = candidates.iter().filter(|a| a.action_type == t).collect();
        let a = (*of_type.choose(rng).expect("type came from the candidates")).clone();
        w = execute(&w, &a).expect("valid actions execute");
        states.push(w.clone());
        out.push(a);
    }
    Some((out, states))
}

/// A sequence of `len` actions in `world` with a rendered command.
pub fn generate_for_world(
    world: &WorldGraph,
    len: usize,
    bank: &TemplateBank,
    rare_probability: f64,
    rng: &mut impl Rng,
) -> Option<(Vec<GroundedAction>, String)> {
    let actions = sample_sequence(world, len, rng)?;
    let command = bank.render(&actions, world, rare_probability, rng);
    Some((actions, command))
}

struct Draft {
    world: WorldGraph,
    actions: Vec<GroundedAction>,
    command: String,
}

fn draft(
    catalog: &Catalog,
    bank: &TemplateBank,
    len: usize,
    rare_probability: f64,
    rng: &mut impl Rng,
) -> Result<Draft, AnnotatorError> {
    for _ in 0..1000 {
        let world = generate_world(rng.gen(), catalog)?;
        if let Some((actions, command)) = generate_for_world(&world, len, bank, rare_probability, rng) {
            return Ok(Draft { world, actions, command });
        }
    }
    Err(AnnotatorError::Exhausted(len))
}

fn uniform_length(rng: &mut impl Rng) -> usize {
    rng.gen_range(1..=MAX_ACTIONS)
}

impl AnnotatorPolicy {
    /// Curriculum annotators are 30% more productive under a time budget.
    pub fn new(kind: PolicyKind, seed: u64) -> Self {
        let productivity = if kind == PolicyKind::CurriculumAdaptive { 13 } else { 10 };
        AnnotatorPolicy { kind, seed, productivity, rare_probability: 0.25, retry_cap: 3 }
    }

    fn rng(&self, round: u32) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed ^ (u64::from(round).wrapping_mul(0xa076_1d64_78bd_642f)))
    }

    /// `count` examples for one round. A curriculum annotator consults
    /// `previous_model` and escalates whenever the model already gets its
    /// candidate right; without a model it behaves exactly like
    /// `static_uniform`.
    pub fn generate_examples(
        &self,
        catalog: &Catalog,
        bank: &TemplateBank,
        previous_model: Option<&Model>,
        count: usize,
        annotator: &str,
        round: u32,
    ) -> Result<Vec<Example>, AnnotatorError> {
        let mut rng = self.rng(round);
        let mut out = Vec::with_capacity(count);
        for i in 0..count {
            let d = match self.kind {
                PolicyKind::StaticUniform | PolicyKind::CurriculumAdaptive => {
                    let mut len = uniform_length(&mut rng);
                    let mut rare = self.rare_probability;
                    let mut d = draft(catalog, bank, len, rare, &mut rng)?;
                    if self.kind == PolicyKind::CurriculumAdaptive {
                        if let Some(model) = previous_model {
                            for _ in 0..self.retry_cap {
                                let probe = Example::new(&d.command, d.actions.clone(), d.world.clone(), annotator, round, 0);
                                if model_feedback(Some(model), &probe).feedback != Feedback::Correct {
                                    break;
                                }
                                len = (len + 1).min(MAX_ACTIONS);
                                rare = (rare + 0.35).min(1.0);
                                d = draft(catalog, bank, len, rare, &mut rng)?;
                            }
                        }
                    }
                    d
                }
                PolicyKind::EasySpammer => draft(catalog, bank, 1, 0.0, &mut rng)?,
                PolicyKind::HardSpammer => draft(catalog, bank, MAX_ACTIONS, 1.0, &mut rng)?,
                PolicyKind::Noise => {
                    let len = uniform_length(&mut rng);
                    let mut d = draft(catalog, bank, len, self.rare_probability, &mut rng)?;
                    let unrelated = draft(catalog, bank, uniform_length(&mut rng), self.rare_probability, &mut rng)?;
                    let mut words: Vec<&str> = unrelated.command.split_whitespace().collect();
                    words.shuffle(&mut rng);
                    d.command = words.join(" ");
                    d
                }
            };
            out.push(Example::new(&d.command, d.actions, d.world, annotator, round, i as u64));
        }
        Ok(out)
    }
}

pub const PILOT_ANNOTATOR: &str = "pilot";

/// Uniformly sampled executable sequences (lengths uniform over 1..=4) with
/// template renderings.
pub fn generate_pilot(count: usize, catalog: &Catalog, bank: &TemplateBank, seed: u64) -> Result<Vec<Example>, AnnotatorError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let len = uniform_length(&mut rng);
        let d = draft(catalog, bank, len, 0.25, &mut rng)?;
        out.push(Example::new(&d.command, d.actions, d.world, PILOT_ANNOTATOR, 0, i as u64));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bank_covers_every_type_twice() {
        let bank = TemplateBank::default();
        let a = GroundedAction::binary(ActionType::PutIn, "apple", "treasure chest");
        let forms = bank.surface_forms(&a);
        assert!(forms.len() >= 2);
        assert!(forms.contains(&"put the apple in the treasure chest".to_string()));
        let mut broken = bank.clone();
        broken.actions.get_mut(&ActionType::Eat).unwrap().truncate(1);
        assert!(broken.validate().is_err());
    }

    #[test]
    fn policy_kind_parses() {
        assert_eq!("curriculum-adaptive".parse::<PolicyKind>().unwrap(), PolicyKind::CurriculumAdaptive);
        assert!("lazy".parse::<PolicyKind>().is_err());
    }
}
