use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::catalog::{Catalog, CatalogInstance};
use super::world::{Edge, EntityKind, EntityNode, NodeId, Property, Relation, WorldGraph};
use super::GraphError;

/// Probability that a location pair outside the spanning tree gets a path.
const EXTRA_PATH_P: f64 = 0.3;

/// Draws a randomized world: a connected path graph over the chosen
/// locations, agents scattered over it, and items on the ground, inside
/// containers, or carried by agents.
pub fn generate_world(seed: u64, catalog: &Catalog) -> Result<WorldGraph, GraphError> {
    catalog.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = catalog.shape;
    let instances = catalog.instances();

    let pick = |rng: &mut ChaCha8Rng, pool: Vec<&CatalogInstance>, n: usize| -> Vec<CatalogInstance> {
        let mut chosen: Vec<CatalogInstance> = pool.choose_multiple(rng, n).map(|i| (*i).clone()).collect();
        chosen.sort_by_key(|i| i.id);
        chosen
    };

    let locations = pick(
        &mut rng,
        instances.iter().filter(|i| i.kind == EntityKind::Location).collect(),
        shape.locations,
    );
    let actor = instances.iter().find(|i| i.actor).expect("catalog has an actor").clone();
    let mut agents = pick(
        &mut rng,
        instances.iter().filter(|i| i.kind == EntityKind::Agent && !i.actor).collect(),
        shape.agents - 1,
    );
    agents.insert(0, actor.clone());
    let containers = pick(
        &mut rng,
        instances
            .iter()
            .filter(|i| i.kind == EntityKind::Object && i.properties.contains(&Property::Container))
            .collect(),
        shape.containers,
    );
    let items = pick(
        &mut rng,
        instances
            .iter()
            .filter(|i| i.kind == EntityKind::Object && !i.properties.contains(&Property::Container))
            .collect(),
        shape.objects - shape.containers,
    );

    let mut edges = Vec::new();
    let mut order: Vec<NodeId> = locations.iter().map(|l| l.id).collect();
    order.shuffle(&mut rng);
    let mut connected = std::collections::BTreeSet::new();
    for i in 1..order.len() {
        let j = rng.gen_range(0..i);
        connected.insert((order[i].min(order[j]), order[i].max(order[j])));
    }
    for i in 0..locations.len() {
        for j in (i + 1)..locations.len() {
            let pair = (locations[i].id, locations[j].id);
            if !connected.contains(&pair) && rng.gen_bool(EXTRA_PATH_P) {
                connected.insert(pair);
            }
        }
    }
    for (a, b) in connected {
        edges.push(Edge::new(a, Relation::PathTo, b));
        edges.push(Edge::new(b, Relation::PathTo, a));
    }

    let location_ids: Vec<NodeId> = locations.iter().map(|l| l.id).collect();
    let random_location = |rng: &mut ChaCha8Rng| *location_ids.choose(rng).unwrap();
    for agent in &agents {
        edges.push(Edge::new(agent.id, Relation::ContainedBy, random_location(&mut rng)));
    }
    let others: Vec<NodeId> = agents.iter().filter(|a| !a.actor).map(|a| a.id).collect();
    for c in &containers {
        let holder = if rng.gen_bool(0.8) || others.is_empty() {
            random_location(&mut rng)
        } else {
            *others.choose(&mut rng).unwrap()
        };
        edges.push(Edge::new(c.id, Relation::ContainedBy, holder));
    }
    for item in &items {
        let roll: f64 = rng.gen();
        let holder = match roll {
            r if r < 0.55 => random_location(&mut rng),
            r if r < 0.7 && !containers.is_empty() => containers.choose(&mut rng).unwrap().id,
            r if r < 0.85 && !others.is_empty() => *others.choose(&mut rng).unwrap(),
            r if r >= 0.85 => actor.id,
            _ => random_location(&mut rng),
        };
        edges.push(Edge::new(item.id, Relation::ContainedBy, holder));
    }

    let nodes = locations
        .iter()
        .chain(agents.iter())
        .chain(containers.iter())
        .chain(items.iter())
        .map(|i| EntityNode {
            id: i.id,
            name: i.name.clone(),
            kind: i.kind,
            properties: i.properties.clone(),
        });
    WorldGraph::from_parts(nodes, edges, actor.id)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;

    #[test]
    fn default_shape_matches_world_composition() {
        let world = generate_world(1, &Catalog::default()).unwrap();
        let count = |k| world.nodes().filter(|n| n.kind == k).count();
        assert_eq!(count(EntityKind::Location), 3);
        assert_eq!(count(EntityKind::Agent), 3);
        assert_eq!(count(EntityKind::Object), 14);
        let containers = world.nodes().filter(|n| n.has(Property::Container)).count();
        assert_eq!(containers, 2);
    }

    #[test]
    fn same_seed_same_world() {
        let c = Catalog::default();
        assert_eq!(
            generate_world(1, &c).unwrap().canonical_string(),
            generate_world(1, &c).unwrap().canonical_string()
        );
    }

    #[test]
    fn seeds_vary_topology_and_placement() {
        let c = Catalog::default();
        let mut topologies = BTreeSet::new();
        let mut placements = BTreeSet::new();
        for seed in 0..100 {
            let w = generate_world(seed, &c).unwrap();
            let paths: Vec<String> = w
                .canonical_string()
                .lines()
                .filter(|l| l.contains("path_to"))
                .map(str::to_string)
                .collect();
            topologies.insert(paths);
            placements.insert(w.canonical_string());
        }
        assert!(topologies.len() >= 2);
        assert!(placements.len() >= 2);
    }

    #[test]
    fn locations_are_connected() {
        let c = Catalog::default();
        for seed in 0..50 {
            let w = generate_world(seed, &c).unwrap();
            let locs: Vec<NodeId> = w.nodes().filter(|n| n.kind == EntityKind::Location).map(|n| n.id).collect();
            let mut seen = BTreeSet::from([locs[0]]);
            let mut stack = vec![locs[0]];
            while let Some(l) = stack.pop() {
                for n in w.neighbors(l) {
                    if seen.insert(n) {
                        stack.push(n);
                    }
                }
            }
            assert_eq!(seen.len(), locs.len(), "seed {seed}");
        }
    }

    #[test]
    fn take_from_and_get_from_have_support() {
        let c = Catalog::default();
        let mut in_container = 0;
        let mut with_agent = 0;
        for seed in 0..50 {
            let w = generate_world(seed, &c).unwrap();
            for n in w.nodes().filter(|n| n.kind == EntityKind::Object) {
                let h = w.container_of(n.id).unwrap();
                if w.has_property(h, Property::Container) {
                    in_container += 1;
                }
                if w.kind(h) == EntityKind::Agent && h != w.actor() {
                    with_agent += 1;
                }
            }
        }
        assert!(in_container > 0 && with_agent > 0);
    }
}
