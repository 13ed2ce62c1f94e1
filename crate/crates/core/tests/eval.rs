use std::collections::BTreeSet;

use dungeon_core::annotators::{generate_pilot, AnnotatorPolicy, PolicyKind, TemplateBank};
use dungeon_core::data::Example;
use dungeon_core::eval::{
    accuracy, action_f1, breakdown_by_length, combinations, compositional_split, hits_at_ks, mean_std,
    run_experiment, sequence_f1, EvalError, ExperimentConfig,
};
use dungeon_core::graphworld::{ActionType, Catalog, GroundedAction};
use dungeon_core::models::{Hyperparameters, Model, ModelConfig, ModelFamily, MAX_ACTIONS};
use dungeon_core::mtd::{CollectionMode, Condition, MtdConfig};
use proptest::prelude::*;

fn pilot(n: usize, seed: u64) -> Vec<Example> {
    generate_pilot(n, &Catalog::default(), &TemplateBank::default(), seed).unwrap()
}

fn tiny() -> ModelConfig {
    let hyper = Hyperparameters { embedding: 8, hidden: 8, context: 4, ..Hyperparameters::small() };
    ModelConfig::new(ModelFamily::AcSeq2seq, hyper)
}

fn get(x: &str) -> GroundedAction {
    GroundedAction::unary(ActionType::Get, x)
}

fn eat(x: &str) -> GroundedAction {
    GroundedAction::unary(ActionType::Eat, x)
}

fn go(x: &str) -> GroundedAction {
    GroundedAction::unary(ActionType::Go, x)
}

#[test]
fn f1_hand_values() {
    let gold = [get("apple"), eat("apple"), go("cavern")];
    assert!((sequence_f1(&[get("apple"), eat("apple")], &gold) - 0.8).abs() < 1e-12);
    assert_eq!(sequence_f1(&gold, &gold), 1.0);
    assert_eq!(sequence_f1(&[go("kitchen")], &gold), 0.0);
    assert_eq!(sequence_f1(&[], &[]), 1.0);
    assert_eq!(sequence_f1(&[], &gold), 0.0);
    // Duplicates count with multiplicity.
    assert!((sequence_f1(&[get("apple"), get("apple")], &[get("apple")]) - 2.0 / 3.0).abs() < 1e-12);
}

#[test]
fn hits_need_a_hundred_examples_and_are_monotone() {
    let data = pilot(100, 3);
    let model = Model::init(tiny(), &Catalog::default(), &data, 3);
    assert!(matches!(hits_at_ks(&model, &data[..99], &[1], 0), Err(EvalError::TooFewExamples { .. })));
    let h = hits_at_ks(&model, &data, &[1, 5, 10, 100], 7).unwrap();
    assert!(h[0] <= h[1] && h[1] <= h[2], "{h:?}");
    assert_eq!(h[3], 1.0);
    assert_eq!(h, hits_at_ks(&model, &data, &[1, 5, 10, 100], 7).unwrap());
}

#[test]
fn overfit_model_ranks_every_gold_first() {
    let data: Vec<Example> = {
        let mut seen = BTreeSet::new();
        pilot(160, 21).into_iter().filter(|e| seen.insert(e.actions.clone())).take(100).collect()
    };
    assert_eq!(data.len(), 100);
    let hyper = Hyperparameters { max_epochs: 300, min_epochs: 0, patience: 300, ..Hyperparameters::small() };
    let (model, _) = Model::fit(ModelConfig::new(ModelFamily::AcSeq2seq, hyper), &Catalog::default(), &data, 0).unwrap();
    let acc = accuracy(&model, &data).unwrap();
    let h1 = hits_at_ks(&model, &data, &[1], 0).unwrap()[0];
    assert!(h1 >= 0.95, "hits@1 {h1} at training accuracy {acc}");
}

#[test]
fn length_buckets_partition_the_test_set() {
    let data = pilot(60, 5);
    let model = Model::init(tiny(), &Catalog::default(), &data, 5);
    let buckets = breakdown_by_length(&model, &data).unwrap();
    assert!(buckets.keys().all(|k| (1..=MAX_ACTIONS).contains(k)));
    assert_eq!(buckets.values().map(|b| b.count).sum::<usize>(), data.len());
    let weighted: f64 = buckets.values().map(|b| b.accuracy * b.count as f64).sum::<f64>() / data.len() as f64;
    assert!((weighted - accuracy(&model, &data).unwrap()).abs() < 1e-12);

    let mut uniform = Vec::new();
    for len in 1..=MAX_ACTIONS {
        uniform.extend(data.iter().filter(|e| e.actions.len() == len).take(5).cloned());
    }
    let buckets = breakdown_by_length(&model, &uniform).unwrap();
    assert_eq!(buckets.len(), MAX_ACTIONS);
    assert!(buckets.values().all(|b| b.count == 5));
}

/// A model that has only seen single actions does at least as well on
/// length-1 commands as on length-4 ones.
#[test]
fn short_sequence_training_favors_short_buckets() {
    let catalog = Catalog::default();
    let bank = TemplateBank::default();
    let hyper = Hyperparameters { max_epochs: 30, min_epochs: 30, ..Hyperparameters::small() };
    let mut wins = 0;
    for seed in 0..5 {
        let easy = AnnotatorPolicy::new(PolicyKind::EasySpammer, seed).generate_examples(&catalog, &bank, None, 80, "e", 1).unwrap();
        let (model, _) = Model::fit(ModelConfig::new(ModelFamily::AcSeq2seq, hyper), &catalog, &easy, seed).unwrap();
        let buckets = breakdown_by_length(&model, &pilot(80, 50 + seed)).unwrap();
        if buckets[&1].accuracy >= buckets[&4].accuracy {
            wins += 1;
        }
    }
    assert_eq!(wins, 5);
}

#[test]
fn mean_std_of_one_value_has_zero_spread() {
    assert_eq!(mean_std(&[0.4]), (0.4, 0.0));
    assert_eq!(mean_std(&[]), (0.0, 0.0));
    let (m, s) = mean_std(&[1.0, 3.0]);
    assert_eq!((m, s), (2.0, 1.0));
}

#[test]
fn experiment_reports_are_consistent_and_deterministic() {
    let hyper = Hyperparameters { embedding: 8, hidden: 8, max_epochs: 3, min_epochs: 0, ..Hyperparameters::small() };
    let base = MtdConfig {
        annotators: 2,
        rounds: 2,
        collection: CollectionMode::FixedCount,
        min_examples: 4,
        bonus_count: 1,
        learner: ModelConfig::new(ModelFamily::AcSeq2seq, hyper),
        scoring_epochs: Some(2),
        ..MtdConfig::default()
    };
    let catalog = Catalog::default();
    let bank = TemplateBank::default();
    let mut config = ExperimentConfig::new(base, vec![4]);
    config.pilot_count = 20;
    config.conditions = vec![Condition::MtdLimit, Condition::CollaborativeOnly];
    let (single, outcomes) = run_experiment(&config, &catalog, &bank).unwrap();
    for c in &single.conditions {
        assert!(c.metrics.values().all(|s| s.values.len() == 1 && s.std == 0.0));
        assert_eq!(c.curve.len(), 3);
    }
    let o = &outcomes[0];
    assert_eq!(o.sources.values().map(Vec::len).sum::<usize>(), o.held_out.len());
    assert_eq!(single.test_sizes, [o.held_out.len()]);

    config.seeds = vec![4, 5];
    let (two, _) = run_experiment(&config, &catalog, &bank).unwrap();
    let (again, _) = run_experiment(&config, &catalog, &bank).unwrap();
    assert_eq!(two, again);
    for c in &two.conditions {
        assert!(c.metrics.values().all(|s| s.values.len() == 2));
        for s in c.metrics.values() {
            assert!(s.values.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
    let csv = two.to_csv();
    assert!(csv.starts_with("condition,metric,mean,std,values\n"));
    assert!(csv.lines().any(|l| l.starts_with("collaborative_only,accuracy,")));
    assert_eq!(two.curve_csv().lines().count(), 1 + 2 * 3);

    config.seeds.clear();
    assert!(matches!(run_experiment(&config, &catalog, &bank), Err(EvalError::NoSeeds)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn f1_is_bounded_and_symmetric(seed in 0u64..500, a in 0usize..6, b in 0usize..6) {
        let data = pilot(6, seed);
        let (x, y) = (&data[a].actions, &data[b].actions);
        let f = sequence_f1(x, y);
        prop_assert!((0.0..=1.0).contains(&f));
        prop_assert!((f - sequence_f1(y, x)).abs() < 1e-12);
        prop_assert_eq!(sequence_f1(x, x), 1.0);
    }

    #[test]
    fn accuracy_ignores_test_order(seed in 0u64..200) {
        let mut data = pilot(12, seed);
        let model = Model::init(tiny(), &Catalog::default(), &data, seed);
        let a = accuracy(&model, &data).unwrap();
        let f = action_f1(&model, &data).unwrap();
        data.reverse();
        prop_assert_eq!(a, accuracy(&model, &data).unwrap());
        prop_assert!((f - action_f1(&model, &data).unwrap()).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&f));
    }

    #[test]
    fn compositional_splits_hold_out_only_combinations(seed in 0u64..300, fraction in 0.05f64..0.4) {
        let data = pilot(80, seed);
        let split = compositional_split(&data, fraction, seed);
        let types: BTreeSet<ActionType> = split.train.iter().flat_map(|e| e.actions.iter().map(|a| a.action_type)).collect();
        let args: BTreeSet<String> = split.train.iter().flat_map(|e| e.actions.iter().flat_map(|a| a.args().map(str::to_string))).collect();
        for e in &split.train {
            prop_assert!(combinations(e).is_disjoint(&split.held_out));
        }
        for e in &split.test {
            let c = combinations(e);
            prop_assert!(!c.is_disjoint(&split.held_out));
            prop_assert!(c.iter().all(|(t, a)| types.contains(t) && args.contains(a)));
        }
        let train_ids: BTreeSet<&str> = split.train.iter().map(|e| e.id.as_str()).collect();
        prop_assert!(split.test.iter().all(|e| !train_ids.contains(e.id.as_str())));
        prop_assert_eq!(split.clone(), compositional_split(&data, fraction, seed));
    }
}
