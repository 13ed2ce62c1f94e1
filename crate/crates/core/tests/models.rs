use dungeon_core::annotators::{generate_pilot, TemplateBank};
use dungeon_core::data::Example;
use dungeon_core::graphworld::{execute, valid_actions, ActionType, Catalog, GroundedAction};
use dungeon_core::models::{
    DecodeOptions, Hyperparameters, Model, ModelConfig, ModelFamily, MAX_ACTIONS,
};
use dungeon_core::numerics::{check_gradients, GradCheckConfig};
use proptest::prelude::*;

fn tiny(family: ModelFamily) -> ModelConfig {
    let hyper = Hyperparameters { embedding: 8, hidden: 8, context: 4, max_epochs: 20, min_epochs: 0, ..Hyperparameters::small() };
    ModelConfig::new(family, hyper)
}

fn pilot(n: usize, seed: u64) -> Vec<Example> {
    generate_pilot(n, &Catalog::default(), &TemplateBank::default(), seed).unwrap()
}

fn grad_check(config: ModelConfig, seed: u64) {
    let data = pilot(3, seed);
    let model = Model::init(config, &Catalog::default(), &data, seed);
    let (loss, grads) = model.loss_and_gradients(&data).unwrap();
    assert!((loss - model.loss(&model.params, &data).unwrap()).abs() < 1e-9);
    let report = check_gradients(&model.params, &grads, |p| model.loss(p, &data).unwrap(), GradCheckConfig::default());
    assert!(report.passed, "{:?} {report:?}", config.family);
}

#[test]
fn ac_seq2seq_gradients_match_finite_differences() {
    grad_check(tiny(ModelFamily::AcSeq2seq), 1);
}

#[test]
fn seq2seq_gradients_match_finite_differences() {
    grad_check(tiny(ModelFamily::Seq2seq), 2);
}

#[test]
fn ablated_ac_gradients_match_finite_differences() {
    let mut config = tiny(ModelFamily::AcSeq2seq);
    config.ablation.no_counter = true;
    config.ablation.no_location = true;
    config.tie_embeddings = false;
    grad_check(config, 3);
}

#[test]
fn empty_sequence_scores_the_first_stop() {
    for family in [ModelFamily::AcSeq2seq, ModelFamily::Seq2seq] {
        let data = pilot(5, 4);
        let model = Model::init(tiny(family), &Catalog::default(), &data, 4);
        let e = &data[0];
        let trace = model.decode_trace(&e.command, &e.world, model.default_decode()).unwrap();
        let stop = trace.steps[0].iter().find(|(a, _)| a.is_none()).unwrap().1;
        let lp = model.sequence_logprob(&e.command, &e.world, &[]).unwrap();
        assert!((lp - stop.ln()).abs() < 1e-12);
        assert!(model.sequence_logprob(&e.command, &e.world, &e.actions).unwrap() <= 0.0);
    }
}

#[test]
fn impossible_sequences_get_the_sentinel() {
    let data = pilot(5, 6);
    let model = Model::init(tiny(ModelFamily::AcSeq2seq), &Catalog::default(), &data, 6);
    let e = &data[0];
    let bogus = GroundedAction::unary(ActionType::Eat, "dragon");
    assert!(!valid_actions(&e.world).contains(&bogus));
    assert_eq!(model.sequence_logprob(&e.command, &e.world, &[bogus]).unwrap(), f64::NEG_INFINITY);
}

#[test]
fn training_is_deterministic_and_checkpoints_round_trip() {
    let data = pilot(12, 8);
    let config = tiny(ModelFamily::AcSeq2seq);
    let (a, report) = Model::fit(config, &Catalog::default(), &data, 9).unwrap();
    let (b, _) = Model::fit(config, &Catalog::default(), &data, 9).unwrap();
    assert_eq!(a.params.to_checkpoint_bytes(), b.params.to_checkpoint_bytes());
    assert!(report.epochs_run >= 1 && report.best_epoch <= report.epochs_run);
    assert!(report.train_loss.last().unwrap() < report.train_loss.first().unwrap());

    let dir = tempfile::tempdir().unwrap();
    a.save(dir.path()).unwrap();
    let back = Model::load(dir.path()).unwrap();
    assert_eq!(back.params.to_checkpoint_bytes(), a.params.to_checkpoint_bytes());
    for e in &data {
        assert_eq!(back.predict(&e.command, &e.world).unwrap(), a.predict(&e.command, &e.world).unwrap());
    }

    let other = Model::init(tiny(ModelFamily::Seq2seq), &Catalog::default(), &data, 9);
    std::fs::write(dir.path().join("params.ckpt"), other.params.to_checkpoint_bytes()).unwrap();
    assert!(Model::load(dir.path()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Every decoding step is a distribution over the valid actions of the
    /// simulated world plus STOP.
    #[test]
    fn constrained_steps_are_normalized_over_valid_actions(seed in 0u64..1000, seq2seq in any::<bool>()) {
        let family = if seq2seq { ModelFamily::Seq2seq } else { ModelFamily::AcSeq2seq };
        let data = pilot(6, seed);
        let model = Model::init(tiny(family), &Catalog::default(), &data, seed);
        let e = &data[(seed % 6) as usize];
        let trace = model.decode_trace(&e.command, &e.world, model.default_decode()).unwrap();
        prop_assert!(trace.actions.len() <= MAX_ACTIONS);
        let mut world = e.world.clone();
        for (j, step) in trace.steps.iter().enumerate() {
            let total: f64 = step.iter().map(|(_, p)| p).sum();
            prop_assert!((total - 1.0).abs() < 1e-12, "step {} sums to {}", j, total);
            let valid = valid_actions(&world);
            for (a, _) in step {
                if let Some(a) = a {
                    prop_assert!(valid.contains(a), "{} is not valid", a);
                }
            }
            if let Some(a) = trace.actions.get(j) {
                world = execute(&world, a).unwrap();
            }
        }
    }

    #[test]
    fn unconstrained_steps_still_normalize(seed in 0u64..1000) {
        let data = pilot(4, seed);
        let model = Model::init(tiny(ModelFamily::AcSeq2seq), &Catalog::default(), &data, seed);
        let e = &data[0];
        let options = DecodeOptions { constrained: false, max_len: MAX_ACTIONS };
        let trace = model.decode_trace(&e.command, &e.world, options).unwrap();
        for step in &trace.steps {
            let total: f64 = step.iter().map(|(_, p)| p).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }
}
