use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use tracing::info;

use super::{accuracy, action_f1, breakdown_by_length, hits_at_ks, mean_std, EvalError};
use crate::annotators::{generate_pilot, TemplateBank, PILOT_ANNOTATOR};
use crate::data::Example;
use crate::graphworld::Catalog;
use crate::models::Model;
use crate::mtd::{simulate_condition, Condition, MtdConfig, RunManifest, Start};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub base: MtdConfig,
    pub conditions: Vec<Condition>,
    pub seeds: Vec<u64>,
    pub pilot_count: usize,
    /// hits@k cutoffs; empty skips ranking, which is the slow part.
    #[serde(default)]
    pub hits: Vec<usize>,
}

impl ExperimentConfig {
    pub fn new(base: MtdConfig, seeds: Vec<u64>) -> Self {
        ExperimentConfig { base, conditions: Condition::ALL.to_vec(), seeds, pilot_count: 400, hits: vec![1, 5, 10] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub values: Vec<f64>,
}

impl Summary {
    pub fn of(values: Vec<f64>) -> Self {
        let (mean, std) = mean_std(&values);
        Summary { mean, std, values }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub round: u32,
    /// Training pool size after the round, averaged over seeds.
    pub train_examples: f64,
    pub accuracy: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: Condition,
    pub metrics: BTreeMap<String, Summary>,
    pub by_length: BTreeMap<usize, Summary>,
    pub by_source: BTreeMap<String, Summary>,
    pub curve: Vec<CurvePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub seeds: Vec<u64>,
    /// Held-out set size per seed and, within it, the size of each source.
    pub test_sizes: Vec<usize>,
    pub source_sizes: Vec<BTreeMap<String, usize>>,
    pub conditions: Vec<ConditionReport>,
}

impl EvalReport {
    pub fn condition(&self, c: Condition) -> Option<&ConditionReport> {
        self.conditions.iter().find(|r| r.condition == c)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per (condition, metric): mean, std, then the per-seed values.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("condition,metric,mean,std,values\n");
        for c in &self.conditions {
            let rows = c
                .metrics
                .iter()
                .map(|(k, v)| (k.clone(), v))
                .chain(c.by_length.iter().map(|(k, v)| (format!("accuracy_len{k}"), v)))
                .chain(c.by_source.iter().map(|(k, v)| (format!("accuracy_{k}"), v)));
            for (name, s) in rows {
                let values: Vec<String> = s.values.iter().map(|v| format!("{v:.6}")).collect();
                let _ = writeln!(out, "{},{name},{:.6},{:.6},{}", c.condition.as_str(), s.mean, s.std, values.join(" "));
            }
        }
        out
    }

    /// Learning-curve table: condition, round, training examples, accuracy.
    pub fn curve_csv(&self) -> String {
        let mut out = String::from("condition,round,train_examples,accuracy_mean,accuracy_std\n");
        for c in &self.conditions {
            for p in &c.curve {
                let _ = writeln!(
                    out,
                    "{},{},{:.1},{:.6},{:.6}",
                    c.condition.as_str(),
                    p.round,
                    p.train_examples,
                    p.accuracy.mean,
                    p.accuracy.std
                );
            }
        }
        out
    }
}

/// Everything one seed produced.
#[derive(Debug, Clone)]
pub struct SeedOutcome {
    pub seed: u64,
    pub manifests: BTreeMap<Condition, RunManifest>,
    pub held_out: Vec<Example>,
    pub sources: BTreeMap<String, Vec<Example>>,
    pub seconds: BTreeMap<Condition, f64>,
}

struct SeedMetrics {
    metrics: BTreeMap<String, f64>,
    by_length: BTreeMap<usize, f64>,
    by_source: BTreeMap<String, f64>,
    curve: Vec<f64>,
}

fn evaluate(
    model: &Model,
    held_out: &[Example],
    sources: &BTreeMap<String, Vec<Example>>,
    hits: &[usize],
    seed: u64,
) -> Result<SeedMetrics, EvalError> {
    let mut metrics = BTreeMap::new();
    metrics.insert("accuracy".to_string(), accuracy(model, held_out)?);
    metrics.insert("f1".to_string(), action_f1(model, held_out)?);
    if !hits.is_empty() && held_out.len() >= 100 {
        for (k, v) in hits.iter().zip(hits_at_ks(model, held_out, hits, seed)?) {
            metrics.insert(format!("hits@{k}"), v);
        }
    }
    let by_length = breakdown_by_length(model, held_out)?.into_iter().map(|(k, b)| (k, b.accuracy)).collect();
    let mut by_source = BTreeMap::new();
    for (name, subset) in sources {
        by_source.insert(name.clone(), accuracy(model, subset)?);
    }
    Ok(SeedMetrics { metrics, by_length, by_source, curve: Vec::new() })
}

/// Runs every condition for one seed and assembles the held-out set: the
/// union of the conditions' final test pools, which includes the pilot's
/// test half, minus anything some condition trained on. Conditions share
/// annotator seeds, so the same example can land in one condition's
/// training pool and another's test pool. Each held-out example is
/// attributed to the pilot or to the first condition whose pool holds it.
pub fn run_seed(
    config: &ExperimentConfig,
    seed: u64,
    catalog: &Catalog,
    bank: &TemplateBank,
) -> Result<(SeedOutcome, BTreeMap<Condition, Vec<Option<Model>>>), EvalError> {
    let mut base = config.base.clone();
    base.seed = seed;
    let pilot = generate_pilot(config.pilot_count, catalog, bank, seed.wrapping_add(0x9170))?;
    let start = Start::from_pilot(&pilot, &base, catalog)?;
    let mut runs = Vec::new();
    for &condition in &config.conditions {
        let run = simulate_condition(condition, &base, &start, catalog, bank)?;
        info!(seed, condition = condition.as_str(), seconds = run.seconds, "condition finished");
        runs.push((condition, run));
    }
    let trained: BTreeSet<&str> = runs.iter().flat_map(|(_, r)| r.pools.train.iter().map(|e| e.id.as_str())).collect();
    let mut held_out: BTreeMap<String, Example> = BTreeMap::new();
    let mut sources: BTreeMap<String, Vec<Example>> = BTreeMap::new();
    for (condition, run) in &runs {
        for e in &run.pools.test {
            if trained.contains(e.id.as_str()) || held_out.contains_key(&e.id) {
                continue;
            }
            let source = if e.annotator == PILOT_ANNOTATOR { PILOT_ANNOTATOR } else { condition.as_str() };
            sources.entry(source.to_string()).or_default().push(e.clone());
            held_out.insert(e.id.clone(), e.clone());
        }
    }
    let mut manifests = BTreeMap::new();
    let mut models = BTreeMap::new();
    let mut seconds = BTreeMap::new();
    for (condition, run) in runs {
        seconds.insert(condition, run.seconds);
        manifests.insert(condition, run.manifest);
        models.insert(condition, run.pooled_models);
    }
    let outcome = SeedOutcome { seed, manifests, held_out: held_out.into_values().collect(), sources, seconds };
    Ok((outcome, models))
}

/// Every configured condition for every seed, evaluated on each seed's
/// composed held-out set.
pub fn run_experiment(
    config: &ExperimentConfig,
    catalog: &Catalog,
    bank: &TemplateBank,
) -> Result<(EvalReport, Vec<SeedOutcome>), EvalError> {
    if config.seeds.is_empty() {
        return Err(EvalError::NoSeeds);
    }
    let mut outcomes = Vec::new();
    let mut per_condition: BTreeMap<Condition, Vec<SeedMetrics>> = BTreeMap::new();
    let mut train_sizes: BTreeMap<Condition, Vec<Vec<usize>>> = BTreeMap::new();
    for &seed in &config.seeds {
        let (outcome, models) = run_seed(config, seed, catalog, bank)?;
        for (&condition, pooled) in &models {
            let last = pooled.last().and_then(Option::as_ref).ok_or(EvalError::NoModel)?;
            let mut m = evaluate(last, &outcome.held_out, &outcome.sources, &config.hits, seed)?;
            for model in pooled {
                let acc = match model {
                    Some(model) => accuracy(model, &outcome.held_out)?,
                    None => 0.0,
                };
                m.curve.push(acc);
            }
            per_condition.entry(condition).or_default().push(m);
            let manifest = &outcome.manifests[&condition];
            let mut sizes = vec![manifest.initial_train];
            sizes.extend(manifest.rounds.iter().map(|r| r.train_pool));
            train_sizes.entry(condition).or_default().push(sizes);
        }
        outcomes.push(outcome);
    }

    let mut conditions = Vec::new();
    for &condition in &config.conditions {
        let seeds = &per_condition[&condition];
        let gather_named = |pick: &dyn Fn(&SeedMetrics) -> BTreeMap<String, f64>| {
            let mut out: BTreeMap<String, Vec<f64>> = BTreeMap::new();
            for s in seeds {
                for (k, v) in pick(s) {
                    out.entry(k).or_default().push(v);
                }
            }
            out.into_iter().map(|(k, v)| (k, Summary::of(v))).collect::<BTreeMap<_, _>>()
        };
        let metrics = gather_named(&|s| s.metrics.clone());
        let by_source = gather_named(&|s| s.by_source.clone());
        let mut by_length: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for s in seeds {
            for (&k, &v) in &s.by_length {
                by_length.entry(k).or_default().push(v);
            }
        }
        let sizes = &train_sizes[&condition];
        let rounds = seeds[0].curve.len();
        let curve = (0..rounds)
            .map(|r| CurvePoint {
                round: r as u32,
                train_examples: sizes.iter().map(|s| s[r] as f64).sum::<f64>() / sizes.len() as f64,
                accuracy: Summary::of(seeds.iter().map(|s| s.curve[r]).collect()),
            })
            .collect();
        conditions.push(ConditionReport {
            condition,
            metrics,
            by_length: by_length.into_iter().map(|(k, v)| (k, Summary::of(v))).collect(),
            by_source,
            curve,
        });
    }
    let report = EvalReport {
        seeds: config.seeds.clone(),
        test_sizes: outcomes.iter().map(|o| o.held_out.len()).collect(),
        source_sizes: outcomes.iter().map(|o| o.sources.iter().map(|(k, v)| (k.clone(), v.len())).collect()).collect(),
        conditions,
    };
    Ok((report, outcomes))
}
