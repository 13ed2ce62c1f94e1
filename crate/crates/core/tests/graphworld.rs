use std::collections::BTreeSet;

use dungeon_core::graphworld::fixtures::{scripted_examples, walkthrough_world};
use dungeon_core::graphworld::*;
use proptest::prelude::*;

fn catalog() -> Catalog {
    Catalog::default()
}

fn act(text: &str) -> GroundedAction {
    parse_action(text, &catalog()).unwrap()
}

/// Brute-force oracle: every well-formed (type, arg1, arg2) over the world's
/// names, kept iff the precondition predicate accepts it.
fn brute_force_valid(world: &WorldGraph) -> BTreeSet<GroundedAction> {
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

fn all_well_formed(world: &WorldGraph) -> Vec<GroundedAction> {
    let names: Vec<Option<&str>> = world.names().into_iter().map(Some).chain([None]).collect();
    let mut out = Vec::new();
    for t in ActionType::ALL {
        for a in &names {
            for b in &names {
                if let Ok(action) = GroundedAction::new(t, *a, *b) {
                    out.push(action);
                }
            }
        }
    }
    out
}

#[test]
fn walkthrough_world_valid_actions() {
    let w = walkthrough_world();
    let valid = valid_actions(&w);
    assert!(valid.contains(&act("hit troll")));
    assert!(valid.contains(&act("go cavern")));
    assert!(valid.contains(&act("get mace")));
    assert!(!valid.contains(&act("go tower")));
}

#[test]
fn bare_room_only_allows_look() {
    let w = WorldBuilder::new(&catalog()).place("dragon", "tower").build().unwrap();
    assert_eq!(valid_actions(&w), vec![GroundedAction::look()]);
    assert_eq!(brute_force_valid(&w).into_iter().collect::<Vec<_>>(), vec![GroundedAction::look()]);
}

#[test]
fn valid_actions_match_brute_force_on_hand_built_worlds() {
    let worlds = [
        WorldBuilder::new(&catalog())
            .path("forest", "cavern")
            .place("dragon", "forest")
            .place("troll", "forest")
            .place("rusty sword", "troll")
            .place("leather pouch", "dragon")
            .place("apple", "leather pouch")
            .place("helmet", "dragon")
            .worn("helmet")
            .place("orc", "cavern")
            .build()
            .unwrap(),
        WorldBuilder::new(&catalog())
            .path("forest", "cavern")
            .place("dragon", "cavern")
            .place("troll", "forest")
            .dead("troll")
            .place("treasure chest", "cavern")
            .place("axe", "treasure chest")
            .place("glass of beer", "dragon")
            .place("elven sword", "dragon")
            .wielded("elven sword")
            .build()
            .unwrap(),
    ];
    for w in &worlds {
        let generated: BTreeSet<_> = valid_actions(w).into_iter().collect();
        assert_eq!(generated, brute_force_valid(w));
    }
}

#[test]
fn valid_actions_are_sound_and_complete_on_generated_worlds() {
    for seed in 0..20 {
        let w = generate_world(seed, &catalog()).unwrap();
        let valid: BTreeSet<_> = valid_actions(&w).into_iter().collect();
        for a in all_well_formed(&w) {
            let ok = execute(&w, &a).is_ok();
            assert_eq!(ok, valid.contains(&a), "seed {seed}: {a}");
        }
    }
}

#[test]
fn hit_kills_in_one_blow() {
    let w = walkthrough_world();
    let after = execute(&w, &act("hit troll")).unwrap();
    let troll = after.nodes_named("troll").next().unwrap();
    assert!(after.has_property(troll, Property::Dead));
    assert!(!after.has_property(troll, Property::Alive));
    let edges_before: Vec<_> = w.edges().collect();
    let edges_after: Vec<_> = after.edges().collect();
    assert_eq!(edges_before, edges_after);
}

#[test]
fn eating_removes_the_item() {
    let w = WorldBuilder::new(&catalog()).place("dragon", "cavern").place("apple", "cavern").build().unwrap();
    let (after, n) = execute_sequence(&w, &[act("get apple"), act("eat apple")]);
    assert_eq!(n, 2);
    assert!(!after.contains_name("apple"));
    assert_eq!(render_inventory(&after), "You are carrying nothing.");
    assert_eq!(after.nodes().count(), w.nodes().count() - 1);
}

#[test]
fn failed_precondition_leaves_world_untouched() {
    let w = walkthrough_world();
    let snapshot = w.clone();
    let err = execute(&w, &act("go tower")).unwrap_err();
    assert!(matches!(err, GraphError::PreconditionFailed { .. }), "{err}");
    assert_eq!(w, snapshot);
    assert!(matches!(execute(&w, &GroundedAction::unary(ActionType::Get, "bread")), Err(GraphError::UnknownEntity(_))));
}

#[test]
fn execute_sequence_edge_cases() {
    let w = walkthrough_world();
    let (same, n) = execute_sequence(&w, &[]);
    assert_eq!(n, 0);
    assert!(states_equal(&same, &w));

    let one_apple = WorldBuilder::new(&catalog()).place("dragon", "cavern").place("apple", "cavern").build().unwrap();
    let (_, n) = execute_sequence(&one_apple, &[act("get apple"), act("get apple")]);
    assert_eq!(n, 1);
}

#[test]
fn take_then_wear() {
    let row = &scripted_examples()[0];
    let actions = parse_action_sequence(row.actions, &catalog()).unwrap();
    let (after, n) = execute_sequence(&row.world, &actions);
    assert_eq!(n, 2);
    let crown = after.nodes_named("silver crown").next().unwrap();
    assert!(after.has_edge(crown, Relation::WornBy, after.actor()));
}

#[test]
fn commutative_gets_reach_equal_states() {
    let w = WorldBuilder::new(&catalog())
        .place("dragon", "cavern")
        .place("apple", "cavern")
        .place("bread", "cavern")
        .build()
        .unwrap();
    let (a, _) = execute_sequence(&w, &[act("get apple"), act("get bread")]);
    let (b, _) = execute_sequence(&w, &[act("get bread"), act("get apple")]);
    assert!(states_equal(&a, &b));
    assert!(states_equal(&w, &w));
    assert!(!states_equal(&w, &a));
}

#[test]
fn render_forest() {
    let text = render(&walkthrough_world());
    assert_eq!(
        text,
        "You are in the forest.\nA troll is here.\nThere is a glass of beer, a mace, and a rusty sword here.\nThere is a path to the cavern."
    );
    assert_eq!(text, render(&walkthrough_world()));
}

#[test]
fn render_empty_room() {
    let w = WorldBuilder::new(&catalog()).place("dragon", "tower").build().unwrap();
    assert_eq!(render(&w), "You are in the tower.\nThere is nothing here.\nThere are no paths here.");
}

#[test]
fn world_document_round_trip() {
    let w = generate_world(7, &catalog()).unwrap();
    let back = WorldGraph::from_json(&w.to_json()).unwrap();
    assert_eq!(back, w);
    assert_eq!(back.canonical_string(), w.canonical_string());
}

#[test]
fn world_document_rejects_broken_invariants() {
    let w = walkthrough_world();
    let mut doc: serde_json::Value = serde_json::from_str(&w.to_json()).unwrap();
    // drop every edge: items lose their container
    doc["edges"] = serde_json::json!([]);
    assert!(WorldGraph::from_json(&doc.to_string()).is_err());
}

proptest! {
    #[test]
    fn format_then_parse_is_identity(seed in 0u64..500, pick in 0usize..10_000) {
        let w = generate_world(seed, &catalog()).unwrap();
        let space = action_space(&w);
        let a = &space[pick % space.len()];
        prop_assert_eq!(&parse_action(&a.to_string(), &catalog()).unwrap(), a);
    }

    #[test]
    fn random_walks_conserve_nodes_and_never_mutate_input(seed in 0u64..500, choices in proptest::collection::vec(0usize..1000, 1..8)) {
        let mut w = generate_world(seed, &catalog()).unwrap();
        for c in choices {
            let valid = valid_actions(&w);
            let a = &valid[c % valid.len()];
            let snapshot = w.clone();
            let next = execute(&w, a).unwrap();
            prop_assert_eq!(&w, &snapshot);
            prop_assert_eq!(execute(&w, a).unwrap(), next.clone());
            let removed = w.nodes().count() - next.nodes().count();
            let expected = usize::from(matches!(a.action_type, ActionType::Eat | ActionType::Drink));
            prop_assert_eq!(removed, expected);
            next.validate().unwrap();
            w = next;
        }
    }
}
