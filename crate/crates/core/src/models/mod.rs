//! The two command-to-action learners: an attention Seq2Seq over atomic
//! actions and the action-centric AC-Seq2Seq, which keeps one recurrent
//! state per grounded action. Both decode under the valid-action constraint.

mod network;
mod train;
mod vocab;

use std::collections::BTreeSet;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::Example;
use crate::graphworld::{execute_sequence, states_equal, Catalog, GroundedAction, WorldGraph};
use crate::numerics::{Gradients, NumericsError, ParameterStore};

pub use network::{ActionContext, Decoded, EncoderOutput};
pub use train::{split_dev, TrainReport};
pub use vocab::{command_tokens, Vocabulary, NONE, UNK};

/// Hard cap on decoded sequence length.
pub const MAX_ACTIONS: usize = 4;
/// Per-argument counts clamp to 0..=4.
pub const COUNT_BUCKETS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    Seq2seq,
    AcSeq2seq,
}

impl ModelFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelFamily::Seq2seq => "seq2seq",
            ModelFamily::AcSeq2seq => "ac_seq2seq",
        }
    }
}

impl std::str::FromStr for ModelFamily {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "seq2seq" => Ok(ModelFamily::Seq2seq),
            "ac_seq2seq" | "ac-seq2seq" | "ac" => Ok(ModelFamily::AcSeq2seq),
            other => Err(format!("unknown model family {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Ablation {
    pub no_counter: bool,
    pub no_location: bool,
    pub no_constraint: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparameters {
    pub embedding: usize,
    pub hidden: usize,
    /// Width of each count-bucket and location embedding.
    pub context: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Early stopping never fires before this many epochs.
    pub min_epochs: usize,
    pub patience: usize,
    pub dev_fraction: f64,
    pub batch_size: usize,
    pub clip_norm: Option<f64>,
    pub init_scale: f64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            embedding: 32,
            hidden: 64,
            context: 8,
            learning_rate: 1e-3,
            max_epochs: 300,
            min_epochs: 0,
            patience: 20,
            dev_fraction: 0.1,
            batch_size: 4,
            clip_norm: Some(5.0),
            init_scale: 0.1,
        }
    }
}

impl Hyperparameters {
    /// Small, fast settings used by simulations and tests.
    pub fn small() -> Self {
        Hyperparameters {
            embedding: 16,
            hidden: 16,
            context: 4,
            learning_rate: 1e-2,
            max_epochs: 50,
            min_epochs: 30,
            patience: 10,
            dev_fraction: 0.0,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub family: ModelFamily,
    #[serde(default)]
    pub hyper: Hyperparameters,
    #[serde(default)]
    pub ablation: Ablation,
    #[serde(default = "default_true")]
    pub tie_embeddings: bool,
}

fn default_true() -> bool {
    true
}

impl ModelConfig {
    pub fn new(family: ModelFamily, hyper: Hyperparameters) -> Self {
        ModelConfig { family, hyper, ablation: Ablation::default(), tie_embeddings: true }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("empty command")]
    EmptyCommand,
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("gold action {action} is outside the decoder support at step {step}")]
    UnreachableGold { action: String, step: usize },
    #[error("bad model manifest: {0}")]
    Manifest(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A trained (or freshly initialized) learner with everything needed to
/// rebuild it: config, vocabulary, atomic action list and parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub vocab: Vocabulary,
    /// Seq2Seq output vocabulary (without STOP); empty for AC-Seq2Seq.
    pub atomic: Vec<GroundedAction>,
    pub params: ParameterStore,
    pub seed: u64,
    pub data_fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub family: ModelFamily,
    pub config: ModelConfig,
    pub vocabulary: Vocabulary,
    pub atomic_actions: Vec<GroundedAction>,
    pub seed: u64,
    pub data_fingerprint: String,
    pub parameter_count: usize,
}

/// Options that override the model's own ablation flags at decode time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodeOptions {
    pub constrained: bool,
    pub max_len: usize,
}

/// sha256 over the sorted example ids.
pub fn fingerprint(examples: &[Example]) -> String {
    let ids: BTreeSet<&str> = examples.iter().map(|e| e.id.as_str()).collect();
    let mut h = Sha256::new();
    for id in ids {
        h.update(id.as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

/// End-state equivalence of a predicted sequence with the gold one. A
/// prediction stops at its first inapplicable action.
pub fn is_correct(world: &WorldGraph, gold: &[GroundedAction], predicted: &[GroundedAction]) -> bool {
    let (gold_end, _) = execute_sequence(world, gold);
    let (pred_end, _) = execute_sequence(world, predicted);
    states_equal(&gold_end, &pred_end)
}

impl Model {
    /// A freshly initialized model. Seq2Seq takes its atomic vocabulary from
    /// the actions in `examples`; both take words from their commands.
    pub fn init(config: ModelConfig, catalog: &Catalog, examples: &[Example], seed: u64) -> Self {
        let vocab = Vocabulary::build(catalog, examples.iter().map(|e| e.command.as_str()));
        let atomic: Vec<GroundedAction> = match config.family {
            ModelFamily::Seq2seq => {
                examples.iter().flat_map(|e| e.actions.iter().cloned()).collect::<BTreeSet<_>>().into_iter().collect()
            }
            ModelFamily::AcSeq2seq => Vec::new(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = network::init_parameters(&config, &vocab, atomic.len(), &mut rng);
        Model { config, vocab, atomic, params, seed, data_fingerprint: fingerprint(examples) }
    }

    pub fn family(&self) -> ModelFamily {
        self.config.family
    }

    pub fn default_decode(&self) -> DecodeOptions {
        DecodeOptions { constrained: !self.config.ablation.no_constraint, max_len: MAX_ACTIONS }
    }

    pub fn encode(&self, command: &str) -> Result<Vec<Vec<f64>>, ModelError> {
        network::encoder_states(self, command)
    }

    /// Greedy decoding with the world simulated forward after every action.
    pub fn predict(&self, command: &str, world: &WorldGraph) -> Result<Vec<GroundedAction>, ModelError> {
        self.predict_with(command, world, self.default_decode())
    }

    pub fn predict_with(
        &self,
        command: &str,
        world: &WorldGraph,
        options: DecodeOptions,
    ) -> Result<Vec<GroundedAction>, ModelError> {
        Ok(network::greedy(self, &self.params, command, world, options)?.actions)
    }

    /// Greedy decoding that also reports the per-step distributions.
    pub fn decode_trace(&self, command: &str, world: &WorldGraph, options: DecodeOptions) -> Result<Decoded, ModelError> {
        network::greedy(self, &self.params, command, world, options)
    }

    /// Σ_j log P(y_j | y_<j) + log P(STOP) under forced decoding, or
    /// `f64::NEG_INFINITY` when some y_j is outside the support.
    pub fn sequence_logprob(&self, command: &str, world: &WorldGraph, y: &[GroundedAction]) -> Result<f64, ModelError> {
        network::forced_logprob(self, &self.params, command, world, y, self.default_decode().constrained)
    }

    /// Summed teacher-forced loss over `examples` under `params`.
    pub fn loss(&self, params: &ParameterStore, examples: &[Example]) -> Result<f64, ModelError> {
        let mut total = 0.0;
        for e in examples {
            total += network::example_loss(self, params, e, None)?;
        }
        Ok(total)
    }

    pub fn loss_and_gradients(&self, examples: &[Example]) -> Result<(f64, Gradients), ModelError> {
        let mut grads = self.params.zero_gradients();
        let mut total = 0.0;
        for e in examples {
            total += network::example_loss(self, &self.params, e, Some(&mut grads))?;
        }
        Ok((total, grads))
    }

    pub fn is_correct_on(&self, example: &Example) -> Result<bool, ModelError> {
        let predicted = self.predict(&example.command, &example.world)?;
        Ok(is_correct(&example.world, &example.actions, &predicted))
    }

    pub fn accuracy(&self, examples: &[Example]) -> Result<f64, ModelError> {
        if examples.is_empty() {
            return Ok(0.0);
        }
        let mut correct = 0usize;
        for e in examples {
            correct += usize::from(self.is_correct_on(e)?);
        }
        Ok(correct as f64 / examples.len() as f64)
    }

    pub fn manifest(&self) -> ModelManifest {
        ModelManifest {
            family: self.config.family,
            config: self.config,
            vocabulary: self.vocab.clone(),
            atomic_actions: self.atomic.clone(),
            seed: self.seed,
            data_fingerprint: self.data_fingerprint.clone(),
            parameter_count: self.params.total_size(),
        }
    }

    /// Writes `model.json` and `params.ckpt` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), ModelError> {
        std::fs::create_dir_all(dir)?;
        let manifest = serde_json::to_string_pretty(&self.manifest()).expect("manifest serializes");
        std::fs::write(dir.join("model.json"), manifest)?;
        std::fs::write(dir.join("params.ckpt"), self.params.to_checkpoint_bytes())?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(dir.join("model.json"))?;
        let manifest: ModelManifest = serde_json::from_str(&text).map_err(|e| ModelError::Manifest(e.to_string()))?;
        let bytes = std::fs::read(dir.join("params.ckpt"))?;
        let params = ParameterStore::read_checkpoint(&bytes[..])?;
        let model = Model {
            config: manifest.config,
            vocab: manifest.vocabulary,
            atomic: manifest.atomic_actions,
            params,
            seed: manifest.seed,
            data_fingerprint: manifest.data_fingerprint,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let expected = network::init_parameters(&model.config, &model.vocab, model.atomic.len(), &mut rng);
        let layout = |s: &ParameterStore| s.iter().map(|(n, a)| (n.to_string(), a.shape().to_vec())).collect::<Vec<_>>();
        if layout(&expected) != layout(&model.params) {
            return Err(ModelError::Manifest("checkpoint does not match the manifest's architecture".into()));
        }
        Ok(model)
    }

    /// Trains from scratch. Early stopping watches `dev` accuracy; with an
    /// empty dev set it watches training accuracy instead.
    pub fn train(
        config: ModelConfig,
        catalog: &Catalog,
        train: &[Example],
        dev: &[Example],
        seed: u64,
    ) -> Result<(Model, TrainReport), ModelError> {
        train::train(config, catalog, train, dev, seed)
    }

    /// Splits `dev_fraction` of `examples` off for early stopping, then trains.
    pub fn fit(
        config: ModelConfig,
        catalog: &Catalog,
        examples: &[Example],
        seed: u64,
    ) -> Result<(Model, TrainReport), ModelError> {
        let (train, dev) = split_dev(examples, config.hyper.dev_fraction, seed);
        train::train(config, catalog, &train, &dev, seed)
    }
}
