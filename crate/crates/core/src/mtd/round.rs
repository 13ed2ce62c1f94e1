use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{score_annotator, DatasetId, MtdError};
use crate::data::Example;
use crate::graphworld::Catalog;
use crate::models::{fingerprint, Model, ModelConfig, ModelFamily, Hyperparameters};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollectionMode {
    /// Every annotator submits exactly the minimum.
    FixedCount,
    /// Annotators submit as many as they manage in the time budget.
    TimeBudget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MtdConfig {
    pub annotators: usize,
    pub rounds: u32,
    pub collection: CollectionMode,
    pub min_examples: usize,
    pub time_budget_minutes: u32,
    /// Share of each round's merged data that goes to the training pool.
    pub split_fraction: f64,
    pub bonus_count: usize,
    pub feedback: bool,
    pub filter: bool,
    pub filter_slack: f64,
    /// One pooled model per round and no scoring at all.
    pub collaborative_only: bool,
    pub learner: ModelConfig,
    /// Epoch cap for the per-annotator scoring models, if lower than the
    /// learner's own.
    pub scoring_epochs: Option<usize>,
    pub seed: u64,
}

impl Default for MtdConfig {
    fn default() -> Self {
        MtdConfig {
            annotators: 30,
            rounds: 5,
            collection: CollectionMode::TimeBudget,
            min_examples: 10,
            time_budget_minutes: 40,
            split_fraction: 0.5,
            bonus_count: 3,
            feedback: true,
            filter: false,
            filter_slack: 0.05,
            collaborative_only: false,
            learner: ModelConfig::new(ModelFamily::AcSeq2seq, Hyperparameters::default()),
            scoring_epochs: None,
            seed: 0,
        }
    }
}

impl MtdConfig {
    /// How many examples an annotator of the given productivity submits.
    pub fn quota(&self, productivity: usize) -> usize {
        match self.collection {
            CollectionMode::FixedCount => self.min_examples,
            CollectionMode::TimeBudget => {
                let scaled = (productivity as f64 * f64::from(self.time_budget_minutes) / 40.0).round() as usize;
                scaled.max(self.min_examples)
            }
        }
    }

    fn scoring_learner(&self) -> ModelConfig {
        let mut c = self.learner;
        if let Some(cap) = self.scoring_epochs {
            c.hyper.max_epochs = c.hyper.max_epochs.min(cap);
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatorDataset {
    pub annotator: String,
    pub round: u32,
    pub examples: Vec<Example>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SharedPools {
    pub train: Vec<Example>,
    pub test: Vec<Example>,
}

impl SharedPools {
    /// Splits `examples` (the pilot set, say) into initial pools.
    pub fn initial(examples: &[Example], fraction: f64, seed: u64) -> Self {
        let (train, test) = merge_and_split(examples, fraction, &mut ChaCha8Rng::seed_from_u64(seed));
        SharedPools { train, test }
    }

    pub fn is_disjoint(&self) -> bool {
        let train: BTreeSet<&str> = self.train.iter().map(|e| e.id.as_str()).collect();
        self.test.iter().all(|e| !train.contains(e.id.as_str()))
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Random partition with `fraction` of the examples (rounded down) going to
/// the first part.
pub fn merge_and_split(examples: &[Example], fraction: f64, rng: &mut ChaCha8Rng) -> (Vec<Example>, Vec<Example>) {
    let mut idx: Vec<usize> = (0..examples.len()).collect();
    idx.shuffle(rng);
    let n_train = ((examples.len() as f64) * fraction.clamp(0.0, 1.0)).floor() as usize;
    let (a, b) = idx.split_at(n_train);
    let pick = |ix: &[usize]| {
        let mut ix = ix.to_vec();
        ix.sort_unstable();
        ix.into_iter().map(|i| examples[i].clone()).collect::<Vec<_>>()
    };
    (pick(a), pick(b))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundState {
    pub round: u32,
    pub submissions: BTreeMap<String, AnnotatorDataset>,
    /// Identifier of each annotator's model: the fingerprint of its training data.
    pub models: BTreeMap<String, String>,
    pub accuracies: BTreeMap<String, BTreeMap<DatasetId, f64>>,
    pub scores: BTreeMap<String, f64>,
    pub leaderboard: Vec<String>,
    pub previous_model: Option<String>,
    pub excluded: BTreeSet<String>,
    pub bonus: BTreeSet<String>,
}

impl RoundState {
    pub fn submission_count(&self) -> usize {
        self.submissions.values().map(|d| d.examples.len()).sum()
    }
}

/// Annotator ids sorted by score, highest first, ties by id.
pub fn leaderboard(scores: &BTreeMap<String, f64>) -> Vec<String> {
    let mut ids: Vec<&String> = scores.keys().collect();
    ids.sort_by(|a, b| scores[*b].total_cmp(&scores[*a]).then_with(|| a.cmp(b)));
    ids.into_iter().cloned().collect()
}

/// The top `k` of the leaderboard.
pub fn assign_bonus(leaderboard: &[String], k: usize) -> BTreeSet<String> {
    leaderboard.iter().take(k).cloned().collect()
}

fn dataset_sizes(submissions: &BTreeMap<String, AnnotatorDataset>, pools: &SharedPools) -> BTreeMap<DatasetId, usize> {
    let mut sizes: BTreeMap<DatasetId, usize> =
        submissions.iter().map(|(a, d)| (DatasetId::Annotator(a.clone()), d.examples.len())).collect();
    if !pools.test.is_empty() {
        sizes.insert(DatasetId::TestAll, pools.test.len());
    }
    sizes
}

/// Accuracy of `model` on every evaluation set of annotator `annotator`.
fn cross_accuracies(
    model: &Model,
    annotator: &str,
    submissions: &BTreeMap<String, AnnotatorDataset>,
    pools: &SharedPools,
) -> Result<BTreeMap<DatasetId, f64>, MtdError> {
    let mut out = BTreeMap::new();
    for (other, data) in submissions {
        if other != annotator {
            out.insert(DatasetId::Annotator(other.clone()), model.accuracy(&data.examples)?);
        }
    }
    if !pools.test.is_empty() {
        out.insert(DatasetId::TestAll, model.accuracy(&pools.test)?);
    }
    Ok(out)
}

/// Seeded from the submitted content rather than the annotator, so two
/// identical submissions get identical models and scores.
fn model_seed(config: &MtdConfig, round: u32, data: &[Example]) -> u64 {
    let mut h = Sha256::new();
    for e in data {
        h.update(e.command.as_bytes());
        h.update([0]);
        h.update(serde_json::to_string(&e.actions).expect("actions serialize").as_bytes());
        h.update([0]);
        h.update(e.world.canonical_string().as_bytes());
        h.update([0]);
    }
    let digest = h.finalize();
    let content = u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"));
    config.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ (u64::from(round) << 32) ^ content
}

/// One round of the protocol: a model per annotator on its data plus the
/// shared training pool, cross-scoring, leaderboard, optional filtering
/// against `previous`, then the merge into new pools. Failures leave
/// `pools` untouched.
pub fn run_round(
    pools: &SharedPools,
    submissions: Vec<AnnotatorDataset>,
    config: &MtdConfig,
    catalog: &Catalog,
    round: u32,
    previous: Option<&Model>,
) -> Result<(RoundState, SharedPools), MtdError> {
    let mut by_id = BTreeMap::new();
    for d in submissions {
        let ok = match config.collection {
            CollectionMode::FixedCount => d.examples.len() == config.min_examples,
            CollectionMode::TimeBudget => d.examples.len() >= config.min_examples,
        };
        if !ok {
            return Err(MtdError::Submission(format!("{} submitted {} examples", d.annotator, d.examples.len())));
        }
        if by_id.insert(d.annotator.clone(), d).is_some() {
            return Err(MtdError::Submission("duplicate annotator id".into()));
        }
    }

    let mut state = RoundState {
        round,
        submissions: by_id,
        models: BTreeMap::new(),
        accuracies: BTreeMap::new(),
        scores: BTreeMap::new(),
        leaderboard: Vec::new(),
        previous_model: previous.map(|m| m.data_fingerprint.clone()),
        excluded: BTreeSet::new(),
        bonus: BTreeSet::new(),
    };

    if !config.collaborative_only {
        let learner = config.scoring_learner();
        let jobs: Vec<(&String, &AnnotatorDataset)> = state.submissions.iter().collect();
        let results: Vec<Result<(String, String, BTreeMap<DatasetId, f64>), MtdError>> = jobs
            .par_iter()
            .map(|&(annotator, data)| {
                let mut train = data.examples.clone();
                train.extend(pools.train.iter().cloned());
                let (model, _) = Model::fit(learner, catalog, &train, model_seed(config, round, &data.examples))?;
                let acc = cross_accuracies(&model, annotator, &state.submissions, pools)?;
                Ok((annotator.clone(), model.data_fingerprint.clone(), acc))
            })
            .collect();
        let sizes = dataset_sizes(&state.submissions, pools);
        for r in results {
            let (annotator, model_id, acc) = r?;
            state.scores.insert(annotator.clone(), score_annotator(&annotator, &acc, &sizes)?);
            state.models.insert(annotator.clone(), model_id);
            state.accuracies.insert(annotator, acc);
        }
        state.leaderboard = leaderboard(&state.scores);
        state.bonus = assign_bonus(&state.leaderboard, config.bonus_count);
        if config.filter {
            if let Some(prev) = previous {
                state.excluded = filter_poor_data(&state, pools, prev, config)?;
            }
        }
    }

    let merged: Vec<Example> = state
        .submissions
        .iter()
        .filter(|(a, _)| !state.excluded.contains(*a))
        .flat_map(|(_, d)| d.examples.iter().cloned())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ u64::from(round).wrapping_mul(0xd1b5_4a32_d192_ed03));
    let (train, test) = merge_and_split(&merged, config.split_fraction, &mut rng);
    let mut next = pools.clone();
    next.train.extend(train);
    next.test.extend(test);
    Ok((state, next))
}

/// Annotators whose score falls more than `filter_slack` below what the
/// previous round's pooled model scores on the same evaluation sets. Only
/// the merge is affected; the leaderboard keeps everyone.
pub fn filter_poor_data(
    state: &RoundState,
    pools: &SharedPools,
    previous: &Model,
    config: &MtdConfig,
) -> Result<BTreeSet<String>, MtdError> {
    let sizes = dataset_sizes(&state.submissions, pools);
    let mut own: BTreeMap<DatasetId, f64> = BTreeMap::new();
    for (a, d) in &state.submissions {
        own.insert(DatasetId::Annotator(a.clone()), previous.accuracy(&d.examples)?);
    }
    if !pools.test.is_empty() {
        own.insert(DatasetId::TestAll, previous.accuracy(&pools.test)?);
    }
    let mut excluded = BTreeSet::new();
    for (annotator, &score) in &state.scores {
        let baseline = score_annotator(annotator, &own, &sizes)?;
        if score < baseline - config.filter_slack {
            excluded.insert(annotator.clone());
        }
    }
    Ok(excluded)
}

/// Sorted ids of a pool, hashed.
pub fn pool_fingerprint(examples: &[Example]) -> String {
    fingerprint(examples)
}
