use std::collections::BTreeMap;

use rand::seq::{IteratorRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::data::Example;
use crate::graphworld::GroundedAction;
use crate::models::{is_correct, DecodeOptions, Model};

/// Fraction of examples whose prediction reaches the gold end state.
pub fn accuracy(model: &Model, test: &[Example]) -> Result<f64, EvalError> {
    accuracy_with(model, test, model.default_decode())
}

pub fn accuracy_with(model: &Model, test: &[Example], options: DecodeOptions) -> Result<f64, EvalError> {
    if test.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0usize;
    for e in test {
        let predicted = model.predict_with(&e.command, &e.world, options)?;
        correct += usize::from(is_correct(&e.world, &e.actions, &predicted));
    }
    Ok(correct as f64 / test.len() as f64)
}

/// Position of the gold sequence among itself and `distractors` sequences
/// taken from other test examples, ranked by model log-likelihood.
/// Candidates are shuffled before ranking and equal scores keep candidate
/// order, so a uniform score gives the gold no advantage.
pub fn gold_rank(model: &Model, test: &[Example], index: usize, distractors: usize, seed: u64) -> Result<usize, EvalError> {
    if test.len() < distractors + 1 {
        return Err(EvalError::TooFewExamples { needed: distractors + 1, got: test.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (index as u64).wrapping_mul(0x2545_f491_4f6c_dd1d));
    let example = &test[index];
    let mut candidates: Vec<&[GroundedAction]> = (0..test.len())
        .filter(|&i| i != index)
        .choose_multiple(&mut rng, distractors)
        .into_iter()
        .map(|i| test[i].actions.as_slice())
        .collect();
    candidates.push(&example.actions);
    candidates.shuffle(&mut rng);
    let gold_at = candidates.iter().position(|c| std::ptr::eq(*c, example.actions.as_slice())).expect("gold was added");
    let mut scores = Vec::with_capacity(candidates.len());
    for c in &candidates {
        scores.push(model.sequence_logprob(&example.command, &example.world, c)?);
    }
    let gold = scores[gold_at];
    let ahead = scores.iter().enumerate().filter(|&(i, &s)| s > gold || (s == gold && i < gold_at)).count();
    Ok(ahead + 1)
}

/// hits@k with 99 distractors per example.
pub fn hits_at_k(model: &Model, test: &[Example], k: usize, seed: u64) -> Result<f64, EvalError> {
    Ok(hits_at_ks(model, test, &[k], seed)?[0])
}

/// hits@k for several k from one ranking pass.
pub fn hits_at_ks(model: &Model, test: &[Example], ks: &[usize], seed: u64) -> Result<Vec<f64>, EvalError> {
    const DISTRACTORS: usize = 99;
    let mut hits = vec![0usize; ks.len()];
    for i in 0..test.len() {
        let rank = gold_rank(model, test, i, DISTRACTORS, seed)?;
        for (h, &k) in hits.iter_mut().zip(ks) {
            *h += usize::from(rank <= k);
        }
    }
    Ok(hits.into_iter().map(|h| h as f64 / test.len() as f64).collect())
}

/// Multiset F1 between two action sequences. Two empty sequences score 1.
pub fn sequence_f1(predicted: &[GroundedAction], gold: &[GroundedAction]) -> f64 {
    if predicted.is_empty() && gold.is_empty() {
        return 1.0;
    }
    let mut remaining: BTreeMap<&GroundedAction, usize> = BTreeMap::new();
    for a in gold {
        *remaining.entry(a).or_default() += 1;
    }
    let mut overlap = 0usize;
    for a in predicted {
        if let Some(n) = remaining.get_mut(a) {
            if *n > 0 {
                *n -= 1;
                overlap += 1;
            }
        }
    }
    if overlap == 0 {
        return 0.0;
    }
    let p = overlap as f64 / predicted.len() as f64;
    let r = overlap as f64 / gold.len() as f64;
    2.0 * p * r / (p + r)
}

/// Mean action-level F1 over the test set.
pub fn action_f1(model: &Model, test: &[Example]) -> Result<f64, EvalError> {
    if test.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for e in test {
        let predicted = model.predict(&e.command, &e.world)?;
        total += sequence_f1(&predicted, &e.actions);
    }
    Ok(total / test.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub count: usize,
    pub accuracy: f64,
}

/// Accuracy per gold sequence length. Lengths without examples are absent.
pub fn breakdown_by_length(model: &Model, test: &[Example]) -> Result<BTreeMap<usize, Bucket>, EvalError> {
    let mut groups: BTreeMap<usize, Vec<Example>> = BTreeMap::new();
    for e in test {
        groups.entry(e.actions.len()).or_default().push(e.clone());
    }
    let mut out = BTreeMap::new();
    for (len, group) in groups {
        out.insert(len, Bucket { count: group.len(), accuracy: accuracy(model, &group)? });
    }
    Ok(out)
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}
