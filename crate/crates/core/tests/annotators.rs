use dungeon_core::annotators::{generate_pilot, sample_sequence, AnnotatorPolicy, PolicyKind, TemplateBank};
use dungeon_core::data::Example;
use dungeon_core::graphworld::{execute_sequence, generate_world, states_equal, Catalog};
use dungeon_core::models::{Hyperparameters, Model, ModelConfig, ModelFamily, MAX_ACTIONS};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn generate(kind: PolicyKind, seed: u64, count: usize, model: Option<&Model>) -> Vec<Example> {
    AnnotatorPolicy::new(kind, seed)
        .generate_examples(&Catalog::default(), &TemplateBank::default(), model, count, "a", 1)
        .unwrap()
}

fn mean_len(examples: &[Example]) -> f64 {
    examples.iter().map(|e| e.actions.len()).sum::<usize>() as f64 / examples.len() as f64
}

#[test]
fn streams_are_deterministic() {
    for kind in [PolicyKind::StaticUniform, PolicyKind::Noise, PolicyKind::HardSpammer] {
        assert_eq!(generate(kind, 3, 8, None), generate(kind, 3, 8, None));
        assert_ne!(generate(kind, 3, 8, None), generate(kind, 4, 8, None));
    }
    let bank = TemplateBank::default();
    assert_eq!(generate_pilot(20, &Catalog::default(), &bank, 1).unwrap(), generate_pilot(20, &Catalog::default(), &bank, 1).unwrap());
}

#[test]
fn spammers_stick_to_their_lengths() {
    assert!(generate(PolicyKind::EasySpammer, 1, 30, None).iter().all(|e| e.actions.len() == 1));
    assert!(generate(PolicyKind::HardSpammer, 1, 30, None).iter().all(|e| e.actions.len() == MAX_ACTIONS));
}

/// Share of examples whose command names every argument of its actions.
fn grounded_share(examples: &[Example]) -> f64 {
    let named = examples.iter().filter(|e| e.actions.iter().flat_map(|a| a.args()).all(|n| e.command.contains(n)));
    named.count() as f64 / examples.len() as f64
}

#[test]
fn noise_commands_are_unrelated_to_their_actions() {
    let noise = generate(PolicyKind::Noise, 2, 60, None);
    assert!(noise.iter().all(|e| e.replays()));
    let real = generate(PolicyKind::StaticUniform, 2, 60, None);
    let (n, r) = (grounded_share(&noise), grounded_share(&real));
    assert!(r > 0.9 && n < 0.3, "noise {n} vs static {r}");
}

#[test]
fn without_a_model_curriculum_matches_static() {
    let a = generate(PolicyKind::CurriculumAdaptive, 9, 15, None);
    let b = generate(PolicyKind::StaticUniform, 9, 15, None);
    let strip = |v: &[Example]| v.iter().map(|e| (e.command.clone(), e.actions.clone())).collect::<Vec<_>>();
    assert_eq!(strip(&a), strip(&b));
}

/// A model trained only on single actions solves many length-1 candidates,
/// so a curriculum annotator escalates and ends up with longer sequences.
#[test]
fn curriculum_escalates_against_a_short_sequence_model() {
    let catalog = Catalog::default();
    let easy = generate(PolicyKind::EasySpammer, 100, 150, None);
    let hyper = Hyperparameters { max_epochs: 40, min_epochs: 40, ..Hyperparameters::small() };
    let (model, _) = Model::fit(ModelConfig::new(ModelFamily::AcSeq2seq, hyper), &catalog, &easy, 0).unwrap();
    let (mut curriculum, mut uniform) = (0.0, 0.0);
    for seed in 0..5 {
        curriculum += mean_len(&generate(PolicyKind::CurriculumAdaptive, seed, 100, Some(&model)));
        uniform += mean_len(&generate(PolicyKind::StaticUniform, seed, 100, Some(&model)));
    }
    assert!(curriculum > uniform, "curriculum {} vs static {}", curriculum / 5.0, uniform / 5.0);
}

#[test]
fn productivity_is_thirty_percent_higher_for_curriculum() {
    assert_eq!(AnnotatorPolicy::new(PolicyKind::StaticUniform, 0).productivity, 10);
    assert_eq!(AnnotatorPolicy::new(PolicyKind::CurriculumAdaptive, 0).productivity, 13);
}

#[test]
fn template_bank_validates_and_covers_pilot_lengths() {
    let bank = TemplateBank::default();
    bank.validate().unwrap();
    let pilot = generate_pilot(200, &Catalog::default(), &bank, 5).unwrap();
    for len in 1..=MAX_ACTIONS {
        assert!(pilot.iter().any(|e| e.actions.len() == len));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sampled_sequences_execute_and_never_return_to_an_earlier_state(seed in 0u64..5000, len in 1usize..=4) {
        let catalog = Catalog::default();
        let world = generate_world(seed, &catalog).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if let Some(seq) = sample_sequence(&world, len, &mut rng) {
            prop_assert_eq!(seq.len(), len);
            let (end, executed) = execute_sequence(&world, &seq);
            prop_assert_eq!(executed, len);
            for k in 0..len {
                let (mid, _) = execute_sequence(&world, &seq[..k]);
                prop_assert!(!states_equal(&mid, &end));
            }
        }
    }

    #[test]
    fn pilot_examples_replay_with_lengths_in_range(seed in 0u64..1000) {
        for e in generate_pilot(10, &Catalog::default(), &TemplateBank::default(), seed).unwrap() {
            prop_assert!(e.replays());
            prop_assert!((1..=MAX_ACTIONS).contains(&e.actions.len()));
            prop_assert!(!e.command.trim().is_empty());
        }
    }
}
