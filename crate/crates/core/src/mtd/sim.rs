use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use tracing::info;

use super::{pool_fingerprint, run_round, AnnotatorDataset, CollectionMode, MtdConfig, MtdError, SharedPools};
use crate::annotators::{AnnotatorPolicy, PolicyKind, TemplateBank};
use crate::data::Example;
use crate::graphworld::Catalog;
use crate::models::Model;

/// The four protocol variants compared in experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Mtd,
    MtdLimit,
    MtdLimitNoModel,
    CollaborativeOnly,
}

impl Condition {
    pub const ALL: [Condition; 4] =
        [Condition::Mtd, Condition::MtdLimit, Condition::MtdLimitNoModel, Condition::CollaborativeOnly];

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Mtd => "mtd",
            Condition::MtdLimit => "mtd_limit",
            Condition::MtdLimitNoModel => "mtd_limit_no_model",
            Condition::CollaborativeOnly => "collaborative_only",
        }
    }

    pub fn policy(self) -> PolicyKind {
        match self {
            Condition::Mtd | Condition::MtdLimit => PolicyKind::CurriculumAdaptive,
            Condition::MtdLimitNoModel | Condition::CollaborativeOnly => PolicyKind::StaticUniform,
        }
    }

    /// Applies this condition's collection mode, feedback and scoring
    /// switches to `base`.
    pub fn configure(self, base: &MtdConfig) -> MtdConfig {
        let mut c = base.clone();
        c.collection = if self == Condition::Mtd { CollectionMode::TimeBudget } else { CollectionMode::FixedCount };
        c.feedback = matches!(self, Condition::Mtd | Condition::MtdLimit);
        c.collaborative_only = self == Condition::CollaborativeOnly;
        c
    }
}

impl std::str::FromStr for Condition {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.replace('-', "_");
        Condition::ALL.into_iter().find(|c| c.as_str() == s).ok_or_else(|| format!("unknown condition {s:?}"))
    }
}

/// Per-annotator policy seed, shared by every condition of a run so the
/// conditions see the same annotator randomness.
pub fn annotator_seed(run_seed: u64, index: usize) -> u64 {
    run_seed.wrapping_mul(0x2545_f491_4f6c_dd1d).wrapping_add(index as u64 + 1)
}

pub fn annotator_id(index: usize) -> String {
    format!("annotator-{index:02}")
}

/// Pools and pooled model a run starts from.
#[derive(Debug, Clone)]
pub struct Start {
    pub pools: SharedPools,
    pub model: Option<Model>,
}

impl Start {
    /// Splits the pilot set into pools and trains a model on the training
    /// half, when there is one.
    pub fn from_pilot(pilot: &[Example], config: &MtdConfig, catalog: &Catalog) -> Result<Self, MtdError> {
        let pools = SharedPools::initial(pilot, config.split_fraction, config.seed);
        let model = if pools.train.is_empty() {
            None
        } else {
            Some(Model::fit(config.learner, catalog, &pools.train, pooled_seed(config, 0))?.0)
        };
        Ok(Start { pools, model })
    }
}

fn pooled_seed(config: &MtdConfig, round: u32) -> u64 {
    config.seed.wrapping_add(0x51ed_2701).wrapping_add(u64::from(round))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundSummary {
    pub round: u32,
    pub submissions: BTreeMap<String, usize>,
    pub models: BTreeMap<String, String>,
    pub scores: BTreeMap<String, f64>,
    pub leaderboard: Vec<String>,
    pub excluded: BTreeSet<String>,
    pub bonus: BTreeSet<String>,
    pub mean_length: f64,
    pub train_pool: usize,
    pub test_pool: usize,
    pub train_fingerprint: String,
    pub test_fingerprint: String,
    pub pooled_model: String,
}

/// Everything needed to audit a run; serializes deterministically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub condition: Option<Condition>,
    pub config: MtdConfig,
    pub policies: Vec<PolicyKind>,
    pub annotator_seeds: Vec<u64>,
    pub initial_train: usize,
    pub initial_test: usize,
    pub initial_train_fingerprint: String,
    pub initial_test_fingerprint: String,
    pub rounds: Vec<RoundSummary>,
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

#[derive(Debug, Clone)]
pub struct SimulationRun {
    pub manifest: RunManifest,
    pub pools: SharedPools,
    /// Pooled model after each round; entry 0 is the starting model.
    pub pooled_models: Vec<Option<Model>>,
    pub seconds: f64,
}

/// A full simulated run: every round the annotators produce data (with
/// feedback from the previous pooled model when enabled), the round is
/// scored and merged, and a new pooled model is trained on the training pool.
pub fn simulate(
    config: &MtdConfig,
    policies: &[PolicyKind],
    condition: Option<Condition>,
    start: &Start,
    catalog: &Catalog,
    bank: &TemplateBank,
) -> Result<SimulationRun, MtdError> {
    let clock = Instant::now();
    let annotators: Vec<AnnotatorPolicy> =
        policies.iter().enumerate().map(|(i, &kind)| AnnotatorPolicy::new(kind, annotator_seed(config.seed, i))).collect();
    let mut manifest = RunManifest {
        condition,
        config: config.clone(),
        policies: policies.to_vec(),
        annotator_seeds: annotators.iter().map(|a| a.seed).collect(),
        initial_train: start.pools.train.len(),
        initial_test: start.pools.test.len(),
        initial_train_fingerprint: pool_fingerprint(&start.pools.train),
        initial_test_fingerprint: pool_fingerprint(&start.pools.test),
        rounds: Vec::new(),
    };
    let mut pools = start.pools.clone();
    let mut pooled_models = vec![start.model.clone()];
    for round in 1..=config.rounds {
        let previous = pooled_models.last().and_then(Option::as_ref);
        let feedback_model = if config.feedback { previous } else { None };
        let mut submissions = Vec::with_capacity(annotators.len());
        for (i, a) in annotators.iter().enumerate() {
            let id = annotator_id(i);
            let examples = a.generate_examples(catalog, bank, feedback_model, config.quota(a.productivity), &id, round)?;
            submissions.push(AnnotatorDataset { annotator: id, round, examples });
        }
        let total: usize = submissions.iter().map(|d| d.examples.len()).sum();
        let lengths: usize = submissions.iter().flat_map(|d| d.examples.iter().map(|e| e.actions.len())).sum();
        let (state, next) = run_round(&pools, submissions, config, catalog, round, previous)?;
        pools = next;
        let model = Model::fit(config.learner, catalog, &pools.train, pooled_seed(config, round))?.0;
        info!(round, train = pools.train.len(), test = pools.test.len(), "round complete");
        manifest.rounds.push(RoundSummary {
            round,
            submissions: state.submissions.iter().map(|(a, d)| (a.clone(), d.examples.len())).collect(),
            models: state.models,
            scores: state.scores,
            leaderboard: state.leaderboard,
            excluded: state.excluded,
            bonus: state.bonus,
            mean_length: if total == 0 { 0.0 } else { lengths as f64 / total as f64 },
            train_pool: pools.train.len(),
            test_pool: pools.test.len(),
            train_fingerprint: pool_fingerprint(&pools.train),
            test_fingerprint: pool_fingerprint(&pools.test),
            pooled_model: model.data_fingerprint.clone(),
        });
        pooled_models.push(Some(model));
    }
    Ok(SimulationRun { manifest, pools, pooled_models, seconds: clock.elapsed().as_secs_f64() })
}

/// `simulate` for one of the four standard conditions, with every annotator
/// following the condition's policy.
pub fn simulate_condition(
    condition: Condition,
    base: &MtdConfig,
    start: &Start,
    catalog: &Catalog,
    bank: &TemplateBank,
) -> Result<SimulationRun, MtdError> {
    let config = condition.configure(base);
    let policies = vec![condition.policy(); config.annotators];
    simulate(&config, &policies, Some(condition), start, catalog, bank)
}
