//! Action semantics: precondition checks, graph transformations and the
//! enumeration of currently valid actions.

use std::collections::BTreeSet;

use super::action::{ActionType, GroundedAction};
use super::world::{Edge, EntityKind, NodeId, Property, Relation, WorldGraph};
use super::GraphError;

/// Node ids an action's argument names resolved to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Binding {
    pub arg1: Option<NodeId>,
    pub arg2: Option<NodeId>,
}

fn fail(reason: impl Into<String>) -> Result<(), String> {
    Err(reason.into())
}

/// Things the actor can see: co-located agents and items, its own inventory,
/// and the contents of containers it can reach.
pub(crate) fn is_visible(world: &WorldGraph, id: NodeId) -> bool {
    let actor = world.actor();
    let here = world.actor_location();
    if id == actor || world.kind(id) == EntityKind::Location {
        return false;
    }
    match world.container_of(id) {
        Some(h) if h == here || h == actor => true,
        Some(h) => world.has_property(h, Property::Container) && is_reachable_container(world, h),
        None => false,
    }
}

/// A container on the ground here or carried by the actor.
pub(crate) fn is_reachable_container(world: &WorldGraph, id: NodeId) -> bool {
    world.has_property(id, Property::Container)
        && world
            .container_of(id)
            .is_some_and(|h| h == world.actor_location() || h == world.actor())
}

fn is_held(world: &WorldGraph, id: NodeId) -> bool {
    world.container_of(id) == Some(world.actor())
}

fn is_colocated_agent(world: &WorldGraph, id: NodeId) -> bool {
    id != world.actor()
        && world.kind(id) == EntityKind::Agent
        && world.container_of(id) == Some(world.actor_location())
}

fn check_bound(world: &WorldGraph, t: ActionType, a: Option<NodeId>, b: Option<NodeId>) -> Result<(), String> {
    let actor = world.actor();
    let here = world.actor_location();
    let name = |id: NodeId| world.name(id).to_string();
    let object = |id: NodeId| -> Result<(), String> {
        if world.kind(id) == EntityKind::Object {
            Ok(())
        } else {
            fail(format!("the {} is not an object", name(id)))
        }
    };
    let held = |id: NodeId| -> Result<(), String> {
        object(id)?;
        if is_held(world, id) {
            Ok(())
        } else {
            fail(format!("you are not carrying the {}", name(id)))
        }
    };
    match t {
        ActionType::Look => Ok(()),
        ActionType::Examine => {
            let t = a.unwrap();
            if is_visible(world, t) {
                Ok(())
            } else {
                fail(format!("you cannot see the {}", name(t)))
            }
        }
        ActionType::Go => {
            let r = a.unwrap();
            if world.kind(r) != EntityKind::Location {
                return fail(format!("the {} is not a place", name(r)));
            }
            if !world.has_property(actor, Property::Alive) {
                return fail("you are dead");
            }
            if !world.has_edge(here, Relation::PathTo, r) {
                return fail(format!("there is no path to the {}", name(r)));
            }
            Ok(())
        }
        ActionType::Follow => {
            let g = a.unwrap();
            if g == actor || world.kind(g) != EntityKind::Agent {
                return fail(format!("you cannot follow the {}", name(g)));
            }
            let there = world.location_of(g);
            if there == here || world.has_edge(here, Relation::PathTo, there) {
                Ok(())
            } else {
                fail(format!("the {} is too far away", name(g)))
            }
        }
        ActionType::Get => {
            let o = a.unwrap();
            object(o)?;
            if world.container_of(o) == Some(here) {
                Ok(())
            } else {
                fail(format!("there is no {} here", name(o)))
            }
        }
        ActionType::Drop => {
            let o = a.unwrap();
            held(o)?;
            if world.is_worn(o) || world.is_wielded(o) {
                return fail(format!("you must take off the {} first", name(o)));
            }
            Ok(())
        }
        ActionType::Eat | ActionType::Drink => {
            let o = a.unwrap();
            held(o)?;
            let (flag, what) = if t == ActionType::Eat { (Property::Food, "eat") } else { (Property::Drink, "drink") };
            if world.has_property(o, flag) {
                Ok(())
            } else {
                fail(format!("you cannot {what} the {}", name(o)))
            }
        }
        ActionType::Wear => {
            let o = a.unwrap();
            held(o)?;
            if !world.has_property(o, Property::Wearable) {
                return fail(format!("the {} cannot be worn", name(o)));
            }
            if world.is_worn(o) {
                return fail(format!("you are already wearing the {}", name(o)));
            }
            Ok(())
        }
        ActionType::Remove => {
            let o = a.unwrap();
            if world.has_edge(o, Relation::WornBy, actor) {
                Ok(())
            } else {
                fail(format!("you are not wearing the {}", name(o)))
            }
        }
        ActionType::Wield => {
            let o = a.unwrap();
            held(o)?;
            if !world.has_property(o, Property::Wieldable) {
                return fail(format!("the {} cannot be wielded", name(o)));
            }
            if world.is_wielded(o) {
                return fail(format!("you are already wielding the {}", name(o)));
            }
            Ok(())
        }
        ActionType::Unwield => {
            let o = a.unwrap();
            if world.has_edge(o, Relation::WieldedBy, actor) {
                Ok(())
            } else {
                fail(format!("you are not wielding the {}", name(o)))
            }
        }
        ActionType::Hit => {
            let g = a.unwrap();
            if !is_colocated_agent(world, g) {
                return fail(format!("there is no {} here to hit", name(g)));
            }
            if !world.has_property(g, Property::Alive) {
                return fail(format!("the {} is already dead", name(g)));
            }
            Ok(())
        }
        ActionType::PutIn => {
            let (o, c) = (a.unwrap(), b.unwrap());
            held(o)?;
            if o == c {
                return fail("you cannot put something inside itself");
            }
            if !is_reachable_container(world, c) {
                return fail(format!("there is no {} to put things in", name(c)));
            }
            Ok(())
        }
        ActionType::GetFrom => {
            let (o, c) = (a.unwrap(), b.unwrap());
            if !is_reachable_container(world, c) {
                return fail(format!("there is no {} to take things from", name(c)));
            }
            object(o)?;
            if world.container_of(o) == Some(c) {
                Ok(())
            } else {
                fail(format!("the {} is not in the {}", name(o), name(c)))
            }
        }
        ActionType::GiveTo => {
            let (o, g) = (a.unwrap(), b.unwrap());
            held(o)?;
            if !is_colocated_agent(world, g) {
                return fail(format!("there is no {} here", name(g)));
            }
            Ok(())
        }
        ActionType::TakeFrom => {
            let (o, g) = (a.unwrap(), b.unwrap());
            if !is_colocated_agent(world, g) {
                return fail(format!("there is no {} here", name(g)));
            }
            object(o)?;
            if world.container_of(o) == Some(g) {
                Ok(())
            } else {
                fail(format!("the {} does not have the {}", name(g), name(o)))
            }
        }
    }
}

fn candidates(world: &WorldGraph, name: Option<&str>) -> Result<Vec<Option<NodeId>>, GraphError> {
    match name {
        None => Ok(vec![None]),
        Some(n) => {
            let ids: Vec<Option<NodeId>> = world.nodes_named(n).map(Some).collect();
            if ids.is_empty() {
                Err(GraphError::UnknownEntity(n.to_string()))
            } else {
                Ok(ids)
            }
        }
    }
}

/// Resolves argument names and checks every precondition. When several
/// nodes share a name, the first (by id) that satisfies the preconditions is
/// bound.
pub fn check_preconditions(world: &WorldGraph, action: &GroundedAction) -> Result<Binding, GraphError> {
    let firsts = candidates(world, action.arg1())?;
    let seconds = candidates(world, action.arg2())?;
    let mut first_failure = None;
    for &a in &firsts {
        for &b in &seconds {
            match check_bound(world, action.action_type, a, b) {
                Ok(()) => return Ok(Binding { arg1: a, arg2: b }),
                Err(reason) => {
                    first_failure.get_or_insert(reason);
                }
            }
        }
    }
    Err(GraphError::PreconditionFailed {
        action: action.to_string(),
        reason: first_failure.unwrap_or_default(),
    })
}

/// Applies an action, returning a new world. The input is never modified.
pub fn execute(world: &WorldGraph, action: &GroundedAction) -> Result<WorldGraph, GraphError> {
    let binding = check_preconditions(world, action)?;
    let mut next = world.clone();
    let actor = world.actor();
    let here = world.actor_location();
    let (a, b) = (binding.arg1, binding.arg2);
    match action.action_type {
        ActionType::Look | ActionType::Examine => {}
        ActionType::Go => next.set_container(actor, a.unwrap()),
        ActionType::Follow => {
            let there = world.location_of(a.unwrap());
            next.set_container(actor, there);
        }
        ActionType::Get | ActionType::GetFrom | ActionType::TakeFrom => next.set_container(a.unwrap(), actor),
        ActionType::Drop => next.set_container(a.unwrap(), here),
        ActionType::Eat | ActionType::Drink => next.remove_node(a.unwrap()),
        ActionType::Wear => next.add_edge(Edge::new(a.unwrap(), Relation::WornBy, actor)),
        ActionType::Remove => next.remove_edge(&Edge::new(a.unwrap(), Relation::WornBy, actor)),
        ActionType::Wield => next.add_edge(Edge::new(a.unwrap(), Relation::WieldedBy, actor)),
        ActionType::Unwield => next.remove_edge(&Edge::new(a.unwrap(), Relation::WieldedBy, actor)),
        ActionType::Hit => next.set_properties(a.unwrap(), Property::Alive, Property::Dead),
        ActionType::PutIn | ActionType::GiveTo => next.set_container(a.unwrap(), b.unwrap()),
    }
    Ok(next)
}

/// Applies actions left to right, stopping at the first failure. Returns the
/// last valid state and the number of actions that succeeded.
pub fn execute_sequence(world: &WorldGraph, actions: &[GroundedAction]) -> (WorldGraph, usize) {
    let mut current = world.clone();
    for (i, action) in actions.iter().enumerate() {
        match execute(&current, action) {
            Ok(next) => current = next,
            Err(_) => return (current, i),
        }
    }
    (current, actions.len())
}

/// Every action whose preconditions hold, sorted canonically. Built directly
/// from the actor's surroundings rather than by testing each candidate.
pub fn valid_actions(world: &WorldGraph) -> Vec<GroundedAction> {
    let actor = world.actor();
    let here = world.actor_location();
    let name = |id: NodeId| world.name(id);
    let mut out: BTreeSet<GroundedAction> = BTreeSet::new();
    out.insert(GroundedAction::look());

    let on_ground: Vec<NodeId> = world.contents(here).into_iter().filter(|&id| id != actor).collect();
    let held: Vec<NodeId> = world.contents(actor);
    let agents: Vec<NodeId> = on_ground.iter().copied().filter(|&id| world.kind(id) == EntityKind::Agent).collect();
    let containers: Vec<NodeId> = on_ground
        .iter()
        .chain(held.iter())
        .copied()
        .filter(|&id| world.kind(id) == EntityKind::Object && world.has_property(id, Property::Container))
        .collect();

    for &id in on_ground.iter().chain(held.iter()) {
        out.insert(GroundedAction::unary(ActionType::Examine, name(id)));
    }
    for &c in &containers {
        for inner in world.contents(c) {
            out.insert(GroundedAction::unary(ActionType::Examine, name(inner)));
            if world.kind(inner) == EntityKind::Object {
                out.insert(GroundedAction::binary(ActionType::GetFrom, name(inner), name(c)));
            }
        }
    }
    if world.has_property(actor, Property::Alive) {
        for r in world.neighbors(here) {
            out.insert(GroundedAction::unary(ActionType::Go, name(r)));
        }
    }
    for node in world.nodes() {
        if node.kind == EntityKind::Agent && node.id != actor {
            let there = world.location_of(node.id);
            if there == here || world.has_edge(here, Relation::PathTo, there) {
                out.insert(GroundedAction::unary(ActionType::Follow, &node.name));
            }
        }
    }
    for &o in &on_ground {
        if world.kind(o) == EntityKind::Object {
            out.insert(GroundedAction::unary(ActionType::Get, name(o)));
        }
    }
    for &o in &held {
        if world.kind(o) != EntityKind::Object {
            continue;
        }
        let worn = world.is_worn(o);
        let wielded = world.is_wielded(o);
        if !worn && !wielded {
            out.insert(GroundedAction::unary(ActionType::Drop, name(o)));
        }
        if world.has_property(o, Property::Food) {
            out.insert(GroundedAction::unary(ActionType::Eat, name(o)));
        }
        if world.has_property(o, Property::Drink) {
            out.insert(GroundedAction::unary(ActionType::Drink, name(o)));
        }
        if worn {
            out.insert(GroundedAction::unary(ActionType::Remove, name(o)));
        } else if world.has_property(o, Property::Wearable) {
            out.insert(GroundedAction::unary(ActionType::Wear, name(o)));
        }
        if wielded {
            out.insert(GroundedAction::unary(ActionType::Unwield, name(o)));
        } else if world.has_property(o, Property::Wieldable) {
            out.insert(GroundedAction::unary(ActionType::Wield, name(o)));
        }
        for &c in &containers {
            if c != o {
                out.insert(GroundedAction::binary(ActionType::PutIn, name(o), name(c)));
            }
        }
        for &g in &agents {
            out.insert(GroundedAction::binary(ActionType::GiveTo, name(o), name(g)));
        }
    }
    for &g in &agents {
        if world.has_property(g, Property::Alive) {
            out.insert(GroundedAction::unary(ActionType::Hit, name(g)));
        }
        for o in world.contents(g) {
            if world.kind(o) == EntityKind::Object {
                out.insert(GroundedAction::binary(ActionType::TakeFrom, name(o), name(g)));
            }
        }
    }
    out.into_iter().collect()
}

/// The well-typed grounded action space over a world's entity names: every
/// action whose arguments have the right kind and static properties,
/// regardless of the current state. Used as the decoder's support when the
/// validity constraint is switched off.
pub fn action_space(world: &WorldGraph) -> Vec<GroundedAction> {
    let actor = world.actor();
    let mut locations = BTreeSet::new();
    let mut agents = BTreeSet::new();
    let mut objects = BTreeSet::new();
    let mut containers = BTreeSet::new();
    let mut things = BTreeSet::new();
    for node in world.nodes() {
        match node.kind {
            EntityKind::Location => {
                locations.insert(node.name.as_str());
            }
            EntityKind::Agent if node.id != actor => {
                agents.insert(node.name.as_str());
                things.insert(node.name.as_str());
            }
            EntityKind::Agent => {}
            EntityKind::Object => {
                objects.insert(node.name.as_str());
                things.insert(node.name.as_str());
                if node.has(Property::Container) {
                    containers.insert(node.name.as_str());
                }
            }
        }
    }
    let flagged = |p: Property| -> Vec<&str> {
        world.nodes().filter(|n| n.kind == EntityKind::Object && n.has(p)).map(|n| n.name.as_str()).collect()
    };
    let mut out = BTreeSet::new();
    out.insert(GroundedAction::look());
    for &t in &things {
        out.insert(GroundedAction::unary(ActionType::Examine, t));
    }
    for &l in &locations {
        out.insert(GroundedAction::unary(ActionType::Go, l));
    }
    for &g in &agents {
        out.insert(GroundedAction::unary(ActionType::Follow, g));
        out.insert(GroundedAction::unary(ActionType::Hit, g));
    }
    for &o in &objects {
        out.insert(GroundedAction::unary(ActionType::Get, o));
        out.insert(GroundedAction::unary(ActionType::Drop, o));
        for &c in &containers {
            if c != o {
                out.insert(GroundedAction::binary(ActionType::PutIn, o, c));
                out.insert(GroundedAction::binary(ActionType::GetFrom, o, c));
            }
        }
        for &g in &agents {
            out.insert(GroundedAction::binary(ActionType::GiveTo, o, g));
            out.insert(GroundedAction::binary(ActionType::TakeFrom, o, g));
        }
    }
    for o in flagged(Property::Food) {
        out.insert(GroundedAction::unary(ActionType::Eat, o));
    }
    for o in flagged(Property::Drink) {
        out.insert(GroundedAction::unary(ActionType::Drink, o));
    }
    for o in flagged(Property::Wearable) {
        out.insert(GroundedAction::unary(ActionType::Wear, o));
        out.insert(GroundedAction::unary(ActionType::Remove, o));
    }
    for o in flagged(Property::Wieldable) {
        out.insert(GroundedAction::unary(ActionType::Wield, o));
        out.insert(GroundedAction::unary(ActionType::Unwield, o));
    }
    out.into_iter().collect()
}
