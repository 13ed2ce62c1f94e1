use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tracing::debug;

use super::{network, Model, ModelConfig, ModelError};
use crate::data::Example;
use crate::graphworld::Catalog;
use crate::numerics::{Optimizer, OptimizerConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub best_epoch: usize,
    /// Mean per-example loss of each epoch.
    pub train_loss: Vec<f64>,
    /// Early-stopping metric after each epoch.
    pub monitor: Vec<f64>,
    pub monitored_on_dev: bool,
}

/// Deterministic split of `fraction` of the examples into a dev set. Sets
/// too small to spare one example get no dev set.
pub fn split_dev(examples: &[Example], fraction: f64, seed: u64) -> (Vec<Example>, Vec<Example>) {
    let n_dev = (examples.len() as f64 * fraction).floor() as usize;
    if n_dev == 0 || n_dev >= examples.len() {
        return (examples.to_vec(), Vec::new());
    }
    let mut idx: Vec<usize> = (0..examples.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x05ee_dde5));
    let (dev, train) = idx.split_at(n_dev);
    let mut train = train.to_vec();
    train.sort_unstable();
    let mut dev = dev.to_vec();
    dev.sort_unstable();
    (train.iter().map(|&i| examples[i].clone()).collect(), dev.iter().map(|&i| examples[i].clone()).collect())
}

pub(crate) fn train(
    config: ModelConfig,
    catalog: &Catalog,
    train: &[Example],
    dev: &[Example],
    seed: u64,
) -> Result<(Model, TrainReport), ModelError> {
    if train.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    let hyper = config.hyper;
    let mut model = Model::init(config, catalog, train, seed);
    let mut opt_config = OptimizerConfig::adam(hyper.learning_rate);
    opt_config.clip_norm = hyper.clip_norm;
    let mut optimizer = Optimizer::new(opt_config, &model.params);
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(1));
    let monitor_set = if dev.is_empty() { train } else { dev };

    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut grads = model.params.zero_gradients();
    let mut best_params = model.params.clone();
    let mut best = f64::NEG_INFINITY;
    let mut report = TrainReport {
        epochs_run: 0,
        best_epoch: 0,
        train_loss: Vec::new(),
        monitor: Vec::new(),
        monitored_on_dev: !dev.is_empty(),
    };
    let mut stale = 0;
    for epoch in 1..=hyper.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(hyper.batch_size.max(1)) {
            grads.zero();
            for &i in batch {
                epoch_loss += network::example_loss(&model, &model.params, &train[i], Some(&mut grads))?;
            }
            grads.scale(1.0 / batch.len() as f64);
            optimizer.step(&mut model.params, &grads);
        }
        let metric = model.accuracy(monitor_set)?;
        report.epochs_run = epoch;
        report.train_loss.push(epoch_loss / train.len() as f64);
        report.monitor.push(metric);
        debug!(epoch, loss = epoch_loss / train.len() as f64, metric, "epoch");
        if metric >= best {
            best = metric;
            best_params = model.params.clone();
            report.best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
        }
        if metric >= 1.0 || (stale >= hyper.patience && epoch >= hyper.min_epochs) {
            break;
        }
    }
    model.params = best_params;
    Ok((model, report))
}
