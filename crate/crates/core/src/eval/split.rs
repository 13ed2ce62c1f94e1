use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::Example;
use crate::graphworld::ActionType;

/// An action type paired with one of its arguments.
pub type Combination = (ActionType, String);

pub fn combinations(example: &Example) -> BTreeSet<Combination> {
    example.actions.iter().flat_map(|a| a.args().map(move |x| (a.action_type, x.to_string()))).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositionalSplit {
    pub train: Vec<Example>,
    pub test: Vec<Example>,
    pub held_out: BTreeSet<Combination>,
}

/// Holds out `fraction` of the (type, argument) combinations in `examples`.
/// Every test example uses at least one held-out combination, no training
/// example uses any, and each held-out combination's type and argument both
/// still occur somewhere in training.
pub fn compositional_split(examples: &[Example], fraction: f64, seed: u64) -> CompositionalSplit {
    let all: BTreeSet<Combination> = examples.iter().flat_map(combinations).collect();
    let mut pool: Vec<Combination> = all.into_iter().collect();
    pool.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n = ((pool.len() as f64) * fraction).round() as usize;
    let mut held_out: BTreeSet<Combination> = pool.into_iter().take(n).collect();

    let (mut train, mut test): (Vec<Example>, Vec<Example>) =
        examples.iter().cloned().partition(|e| combinations(e).is_disjoint(&held_out));
    let types: BTreeSet<ActionType> = train.iter().flat_map(|e| e.actions.iter().map(|a| a.action_type)).collect();
    let args: BTreeSet<String> =
        train.iter().flat_map(|e| e.actions.iter().flat_map(|a| a.args().map(str::to_string))).collect();
    held_out.retain(|(t, a)| types.contains(t) && args.contains(a));
    test.retain(|e| {
        let c = combinations(e);
        !c.is_disjoint(&held_out)
            && c.iter().all(|(t, a)| types.contains(t) && args.contains(a))
    });
    // Test examples whose only held-out combinations were dropped above are
    // discarded rather than moved to training, keeping training clean.
    train.sort_by(|a, b| a.id.cmp(&b.id));
    test.sort_by(|a, b| a.id.cmp(&b.id));
    CompositionalSplit { train, test, held_out }
}
