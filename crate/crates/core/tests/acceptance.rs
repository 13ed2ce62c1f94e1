//! Headline properties of the system, one PASS/FAIL line each. Lines go
//! straight to stderr so they show up without `--nocapture`.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write as _;
use std::time::{Duration, Instant};

use dungeon_core::annotators::{generate_pilot, PolicyKind, TemplateBank};
use dungeon_core::data::Example;
use dungeon_core::eval::{
    accuracy, accuracy_with, breakdown_by_length, compositional_split, hits_at_ks, run_experiment, sequence_f1,
    ExperimentConfig,
};
use dungeon_core::graphworld::fixtures::{scripted_examples, walkthrough_world, WALKTHROUGH};
use dungeon_core::graphworld::{
    check_preconditions, execute, execute_sequence, generate_world, parse_action, parse_action_sequence, render_inventory,
    valid_actions, ActionType, Catalog, GroundedAction, Property, Relation, WorldGraph,
};
use dungeon_core::models::{DecodeOptions, Hyperparameters, Model, ModelConfig, ModelFamily, MAX_ACTIONS};
use dungeon_core::mtd::{
    run_round, score_annotator, simulate, AnnotatorDataset, CollectionMode, Condition, DatasetId, MtdConfig,
    SharedPools, Start,
};
use dungeon_core::numerics::{check_gradients, GradCheckConfig};

type Outcome = Result<String, String>;

struct Report {
    failures: Vec<String>,
}

impl Report {
    fn check(&mut self, name: &str, budget: Duration, f: impl FnOnce() -> Outcome) {
        let clock = Instant::now();
        let outcome = f();
        let elapsed = clock.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) if elapsed <= budget => (true, d),
            Ok(d) => (false, format!("{d}; over budget {:.1}s > {:.0}s", elapsed.as_secs_f64(), budget.as_secs_f64())),
            Err(d) => (false, d),
        };
        let verdict = if ok { "PASS" } else { "FAIL" };
        let _ = writeln!(std::io::stderr(), "{verdict} {name}: {detail} ({:.1}s)", elapsed.as_secs_f64());
        if !ok {
            self.failures.push(name.to_string());
        }
    }
}

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn walkthrough() -> Outcome {
    let catalog = Catalog::default();
    let mut world = walkthrough_world();
    for command in WALKTHROUGH {
        if command == "inventory" {
            continue;
        }
        let action = parse_action(command, &catalog).map_err(|e| format!("{command}: {e}"))?;
        world = execute(&world, &action).map_err(|e| format!("{command}: {e}"))?;
        match command {
            "hit troll" => {
                let troll = world.nodes_named("troll").next().ok_or("troll vanished")?;
                ensure(world.has_property(troll, Property::Dead), "troll alive after hit")?;
            }
            "eat apple" => {
                ensure(world.contents(world.actor()).is_empty(), "inventory not empty after eating")?;
                ensure(render_inventory(&world) == "You are carrying nothing.", "inventory render")?;
            }
            _ => {}
        }
    }
    let crossbow = world.nodes_named("crossbow").next().ok_or("crossbow vanished")?;
    let chest = world.nodes_named("treasure chest").next().ok_or("chest vanished")?;
    ensure(world.has_edge(crossbow, Relation::ContainedBy, chest), "crossbow not in the chest")?;
    Ok(format!("{} commands replayed, every state assertion holds", WALKTHROUGH.len()))
}

fn scripted_rows() -> Outcome {
    let catalog = Catalog::default();
    let rows = scripted_examples();
    ensure(rows.len() == 15, format!("{} rows", rows.len()))?;
    for row in &rows {
        let actions = parse_action_sequence(row.actions, &catalog).map_err(|e| format!("{:?}: {e}", row.actions))?;
        let (_, n) = execute_sequence(&row.world, &actions);
        ensure(n == actions.len(), format!("{:?} executed {n} of {}", row.actions, actions.len()))?;
    }
    Ok("15 of 15 rows parse and execute fully".into())
}

fn score_oracle() -> Outcome {
    let ann = |s: &str| DatasetId::Annotator(s.into());
    let acc = [(ann("2"), 0.5), (ann("3"), 0.7), (DatasetId::TestAll, 0.6)].into_iter().collect();
    let sizes: BTreeMap<DatasetId, usize> = [(ann("1"), 10), (ann("2"), 10), (ann("3"), 12), (DatasetId::TestAll, 20)].into_iter().collect();
    let s = score_annotator("1", &acc, &sizes).map_err(|e| e.to_string())?;
    ensure((s - 0.6).abs() <= 1e-12, format!("S_1 = {s}"))?;
    for c in [0.0, 0.37, 1.0] {
        for who in ["1", "2", "3"] {
            let own = ann(who);
            let constant: BTreeMap<DatasetId, f64> = sizes.keys().filter(|k| **k != own).map(|k| (k.clone(), c)).collect();
            let s = score_annotator(who, &constant, &sizes).map_err(|e| e.to_string())?;
            ensure((s - c).abs() <= 1e-12, format!("constant {c} gave {s} for annotator {who}"))?;
        }
    }
    Ok(format!("S_1 = {s:.12}, constant identity holds"))
}

/// Every well-formed action over the world's names, kept iff its
/// preconditions hold.
fn brute_force(world: &WorldGraph) -> BTreeSet<GroundedAction> {
    let names: Vec<Option<&str>> = world.names().into_iter().map(Some).chain([None]).collect();
    let mut out = BTreeSet::new();
    for t in ActionType::ALL {
        for a in &names {
            for b in &names {
                if let Ok(action) = GroundedAction::new(t, *a, *b) {
                    if check_preconditions(world, &action).is_ok() {
                        out.insert(action);
                    }
                }
            }
        }
    }
    out
}

fn valid_action_soundness() -> Outcome {
    let catalog = Catalog::default();
    let mut total = 0;
    for seed in 0..50 {
        let world = generate_world(seed, &catalog).map_err(|e| e.to_string())?;
        let valid: BTreeSet<GroundedAction> = valid_actions(&world).into_iter().collect();
        ensure(valid == brute_force(&world), format!("seed {seed} differs"))?;
        total += valid.len();
    }
    Ok(format!("50 worlds, {total} valid actions, exact match"))
}

fn gradient_checks() -> Outcome {
    let catalog = Catalog::default();
    let data = generate_pilot(3, &catalog, &TemplateBank::default(), 1).map_err(|e| e.to_string())?;
    let mut worst = Vec::new();
    for family in [ModelFamily::AcSeq2seq, ModelFamily::Seq2seq] {
        let hyper = Hyperparameters { embedding: 8, hidden: 8, context: 4, ..Hyperparameters::small() };
        let model = Model::init(ModelConfig::new(family, hyper), &catalog, &data, 1);
        let (_, grads) = model.loss_and_gradients(&data).map_err(|e| e.to_string())?;
        let report = check_gradients(&model.params, &grads, |p| model.loss(p, &data).unwrap(), GradCheckConfig::default());
        ensure(report.passed, format!("{}: {report:?}", family.as_str()))?;
        worst.push(format!("{} max rel err {:.1e}", family.as_str(), report.max_relative_error));
    }
    Ok(worst.join(", "))
}

fn overfit() -> Outcome {
    let catalog = Catalog::default();
    let data = generate_pilot(50, &catalog, &TemplateBank::default(), 7).map_err(|e| e.to_string())?;
    let hyper = Hyperparameters { max_epochs: 300, dev_fraction: 0.0, patience: 300, ..Hyperparameters::default() };
    let (model, report) =
        Model::fit(ModelConfig::new(ModelFamily::AcSeq2seq, hyper), &catalog, &data, 0).map_err(|e| e.to_string())?;
    let acc = accuracy(&model, &data).map_err(|e| e.to_string())?;
    ensure(acc >= 0.95, format!("training accuracy {acc:.3} after {} epochs", report.epochs_run))?;
    Ok(format!("training accuracy {acc:.3} after {} epochs", report.epochs_run))
}

struct CompositionalRun {
    ac: Vec<(f64, f64)>,
    seq2seq: Vec<(f64, f64)>,
}

/// Five seeds of the compositional split, each family scored with and
/// without the decoding constraint on the same trained parameters.
fn compositional_runs() -> Result<CompositionalRun, String> {
    let catalog = Catalog::default();
    let bank = TemplateBank::default();
    let mut run = CompositionalRun { ac: Vec::new(), seq2seq: Vec::new() };
    for seed in 0..5u64 {
        let data = generate_pilot(600, &catalog, &bank, 100 + seed).map_err(|e| e.to_string())?;
        let split = compositional_split(&data, 0.15, seed);
        for family in [ModelFamily::AcSeq2seq, ModelFamily::Seq2seq] {
            let hyper = Hyperparameters { max_epochs: 60, patience: 15, ..Hyperparameters::small() };
            let (model, _) = Model::fit(ModelConfig::new(family, hyper), &catalog, &split.train, seed).map_err(|e| e.to_string())?;
            let constrained = accuracy(&model, &split.test).map_err(|e| e.to_string())?;
            let options = DecodeOptions { constrained: false, max_len: MAX_ACTIONS };
            let unconstrained = accuracy_with(&model, &split.test, options).map_err(|e| e.to_string())?;
            let slot = if family == ModelFamily::AcSeq2seq { &mut run.ac } else { &mut run.seq2seq };
            slot.push((constrained, unconstrained));
        }
    }
    Ok(run)
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn compositional_gap(run: &CompositionalRun) -> Outcome {
    let ac = mean(run.ac.iter().map(|r| r.0));
    let s2s = mean(run.seq2seq.iter().map(|r| r.0));
    let detail = format!("AC-Seq2Seq {ac:.3} vs Seq2Seq {s2s:.3} over 5 seeds");
    ensure(ac - s2s >= 0.05, detail.clone())?;
    Ok(detail)
}

fn constraint_ablation(run: &CompositionalRun) -> Outcome {
    let mut parts = Vec::new();
    for (name, rows) in [("AC-Seq2Seq", &run.ac), ("Seq2Seq", &run.seq2seq)] {
        let c = mean(rows.iter().map(|r| r.0));
        let u = mean(rows.iter().map(|r| r.1));
        ensure(c >= u, format!("{name}: constrained {c:.3} < unconstrained {u:.3}"))?;
        parts.push(format!("{name} {c:.3} >= {u:.3}"));
    }
    Ok(parts.join(", "))
}

fn simulated_mtd() -> Outcome {
    let catalog = Catalog::default();
    let bank = TemplateBank::default();
    let base = MtdConfig {
        annotators: 6,
        rounds: 5,
        bonus_count: 1,
        scoring_epochs: Some(10),
        learner: ModelConfig::new(ModelFamily::AcSeq2seq, Hyperparameters::small()),
        ..MtdConfig::default()
    };
    let mut config = ExperimentConfig::new(base, vec![1, 2, 3, 4, 5]);
    config.pilot_count = 100;
    config.hits = Vec::new();
    config.conditions = vec![Condition::Mtd, Condition::MtdLimitNoModel, Condition::CollaborativeOnly];
    let (report, outcomes) = run_experiment(&config, &catalog, &bank).map_err(|e| e.to_string())?;
    for o in &outcomes {
        for (c, m) in &o.manifests {
            let mut size = m.initial_train + m.initial_test;
            for r in &m.rounds {
                size += r.submissions.values().sum::<usize>();
                ensure(r.train_pool + r.test_pool == size, format!("seed {} {}: pool size", o.seed, c.as_str()))?;
            }
        }
    }
    let acc = |c: Condition| report.condition(c).map(|r| r.metrics["accuracy"].mean).ok_or("missing condition");
    let (mtd, no_model, collab) = (acc(Condition::Mtd)?, acc(Condition::MtdLimitNoModel)?, acc(Condition::CollaborativeOnly)?);
    let detail = format!("MTD {mtd:.3}, MTD limit w/o model {no_model:.3}, collaborative-only {collab:.3}");
    ensure(mtd >= collab + 0.02, format!("{detail}: MTD margin below 2pp"))?;
    let (lo, hi) = (mtd.min(collab), mtd.max(collab));
    ensure(no_model >= lo - 1e-12 && no_model <= hi + 1e-12, format!("{detail}: w/o model outside the range"))?;
    Ok(detail)
}

fn bookkeeping() -> Outcome {
    let catalog = Catalog::default();
    let bank = TemplateBank::default();
    let hyper = Hyperparameters { max_epochs: 5, min_epochs: 0, ..Hyperparameters::small() };
    let config = MtdConfig {
        annotators: 3,
        rounds: 3,
        collection: CollectionMode::TimeBudget,
        min_examples: 4,
        bonus_count: 1,
        learner: ModelConfig::new(ModelFamily::AcSeq2seq, hyper),
        seed: 17,
        ..MtdConfig::default()
    };
    let pilot = generate_pilot(20, &catalog, &bank, 17).map_err(|e| e.to_string())?;
    let start = Start::from_pilot(&pilot, &config, &catalog).map_err(|e| e.to_string())?;

    let mut pools: SharedPools = start.pools.clone();
    let policies = [PolicyKind::StaticUniform, PolicyKind::CurriculumAdaptive, PolicyKind::Noise];
    for round in 1..=config.rounds {
        let subs: Vec<AnnotatorDataset> = policies
            .iter()
            .enumerate()
            .map(|(i, &kind)| {
                let id = format!("a{i}");
                let policy = dungeon_core::annotators::AnnotatorPolicy::new(kind, 40 + i as u64);
                let examples = policy.generate_examples(&catalog, &bank, None, config.quota(policy.productivity), &id, round);
                examples.map(|examples| AnnotatorDataset { annotator: id, round, examples })
            })
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        let added: usize = subs.iter().map(|d| d.examples.len()).sum();
        let (_, next) = run_round(&pools, subs, &config, &catalog, round, None).map_err(|e| e.to_string())?;
        ensure(next.is_disjoint(), format!("round {round}: pools overlap"))?;
        ensure(next.len() == pools.len() + added, format!("round {round}: grew by {} not {added}", next.len() - pools.len()))?;
        pools = next;
    }

    let a = simulate(&config, &policies, None, &start, &catalog, &bank).map_err(|e| e.to_string())?;
    let b = simulate(&config, &policies, None, &start, &catalog, &bank).map_err(|e| e.to_string())?;
    ensure(a.pools.is_disjoint(), "simulated pools overlap")?;
    let (ja, jb) = (a.manifest.to_json(), b.manifest.to_json());
    ensure(ja == jb, "manifests differ between identical runs")?;
    Ok(format!("{} rounds disjoint and exact growth, manifests byte-identical ({} bytes)", config.rounds, ja.len()))
}

fn metric_identities() -> Outcome {
    let catalog = Catalog::default();
    let data: Vec<Example> = generate_pilot(100, &catalog, &TemplateBank::default(), 3).map_err(|e| e.to_string())?;
    let hyper = Hyperparameters { embedding: 8, hidden: 8, context: 4, ..Hyperparameters::small() };
    let model = Model::init(ModelConfig::new(ModelFamily::AcSeq2seq, hyper), &catalog, &data, 3);
    let h = hits_at_ks(&model, &data, &[1, 5, 10, 100], 0).map_err(|e| e.to_string())?;
    ensure(h[0] <= h[1] && h[1] <= h[2], format!("hits not monotone: {h:?}"))?;
    ensure(h[3] == 1.0, format!("hits@100 = {}", h[3]))?;

    let get = |x: &str| GroundedAction::unary(ActionType::Get, x);
    let gold = [get("apple"), GroundedAction::unary(ActionType::Eat, "apple"), GroundedAction::unary(ActionType::Go, "cavern")];
    let f1 = sequence_f1(&gold[..2], &gold);
    ensure((f1 - 0.8).abs() <= 1e-12, format!("F1 = {f1}"))?;

    let buckets = breakdown_by_length(&model, &data).map_err(|e| e.to_string())?;
    let weighted = buckets.values().map(|b| b.accuracy * b.count as f64).sum::<f64>() / data.len() as f64;
    let overall = accuracy(&model, &data).map_err(|e| e.to_string())?;
    ensure((weighted - overall).abs() <= 1e-12, format!("bucket mean {weighted} vs {overall}"))?;
    Ok(format!("hits@1/5/10/100 = {:.2}/{:.2}/{:.2}/{:.2}, F1 = {f1}, bucket identity holds", h[0], h[1], h[2], h[3]))
}

#[test]
fn acceptance() {
    let mut report = Report { failures: Vec::new() };
    let secs = Duration::from_secs;
    report.check("walkthrough replay", secs(1), walkthrough);
    report.check("scripted command corpus", secs(1), scripted_rows);
    report.check("annotator score oracle", secs(1), score_oracle);
    report.check("valid-action soundness", secs(10), valid_action_soundness);
    report.check("gradient checks", secs(60), gradient_checks);
    report.check("overfit 50 examples", secs(600), overfit);
    let clock = Instant::now();
    let runs = compositional_runs();
    let shared = clock.elapsed();
    let _ = writeln!(std::io::stderr(), "     compositional corpus trained in {:.1}s", shared.as_secs_f64());
    match &runs {
        Ok(run) => {
            report.check("compositional gap", secs(600), || compositional_gap(run));
            report.check("decoding-constraint ablation", secs(600), || constraint_ablation(run));
        }
        Err(e) => {
            report.check("compositional gap", secs(600), || Err(e.clone()));
            report.check("decoding-constraint ablation", secs(600), || Err(e.clone()));
        }
    }
    report.check("simulated MTD ordering", secs(30 * 60), simulated_mtd);
    report.check("protocol bookkeeping", secs(120), bookkeeping);
    report.check("metric identities", secs(60), metric_identities);
    assert!(report.failures.is_empty(), "failing: {:?}", report.failures);
}
