use std::collections::BTreeSet;

use super::catalog::{Catalog, CatalogInstance};
use super::world::{Edge, EntityKind, EntityNode, NodeId, Property, Relation, WorldGraph};
use super::GraphError;

/// Hand-assembles a world from catalog entities, keeping catalog node ids.
/// Useful for fixtures and scripted scenarios.
///
/// ```
/// use dungeon_core::graphworld::{Catalog, WorldBuilder};
/// let world = WorldBuilder::new(&Catalog::default())
///     .path("forest", "cavern")
///     .place("dragon", "forest")
///     .place("troll", "forest")
///     .place("rusty sword", "troll")
///     .build()
///     .unwrap();
/// assert_eq!(world.name(world.actor_location()), "forest");
/// ```
#[derive(Debug, Clone)]
pub struct WorldBuilder {
    instances: Vec<CatalogInstance>,
    used: BTreeSet<NodeId>,
    edges: Vec<Edge>,
    dead: BTreeSet<NodeId>,
    error: Option<GraphError>,
}

impl WorldBuilder {
    pub fn new(catalog: &Catalog) -> Self {
        WorldBuilder {
            instances: catalog.instances(),
            used: BTreeSet::new(),
            edges: Vec::new(),
            dead: BTreeSet::new(),
            error: None,
        }
    }

    /// Id of an already-used instance with this name, adding one if needed.
    fn existing_or_new(&mut self, name: &str) -> Option<NodeId> {
        if let Some(i) = self.instances.iter().find(|i| i.name == name && self.used.contains(&i.id)) {
            return Some(i.id);
        }
        self.fresh(name)
    }

    fn fresh(&mut self, name: &str) -> Option<NodeId> {
        let id = self.instances.iter().find(|i| i.name == name && !self.used.contains(&i.id)).map(|i| i.id);
        match id {
            Some(id) => {
                self.used.insert(id);
                Some(id)
            }
            None => {
                self.error
                    .get_or_insert(GraphError::UnknownEntity(format!("{name} (or no instances left)")));
                None
            }
        }
    }

    fn kind(&self, id: NodeId) -> EntityKind {
        self.instances.iter().find(|i| i.id == id).unwrap().kind
    }

    pub fn location(mut self, name: &str) -> Self {
        self.existing_or_new(name);
        self
    }

    pub fn path(mut self, a: &str, b: &str) -> Self {
        if let (Some(x), Some(y)) = (self.existing_or_new(a), self.existing_or_new(b)) {
            self.edges.push(Edge::new(x, Relation::PathTo, y));
            self.edges.push(Edge::new(y, Relation::PathTo, x));
        }
        self
    }

    /// Places an entity inside a location, agent or container. Items with
    /// several catalog instances get a new instance on every call.
    pub fn place(mut self, name: &str, holder: &str) -> Self {
        let Some(h) = self.existing_or_new(holder) else { return self };
        let unique = self.instances.iter().filter(|i| i.name == name).count() == 1;
        let id = if unique { self.existing_or_new(name) } else { self.fresh(name) };
        if let Some(id) = id {
            self.edges.retain(|e| !(e.src == id && e.relation == Relation::ContainedBy));
            self.edges.push(Edge::new(id, Relation::ContainedBy, h));
        }
        self
    }

    pub fn worn(mut self, name: &str) -> Self {
        self.equip(name, Relation::WornBy);
        self
    }

    pub fn wielded(mut self, name: &str) -> Self {
        self.equip(name, Relation::WieldedBy);
        self
    }

    fn equip(&mut self, name: &str, relation: Relation) {
        let Some(id) = self.instances.iter().find(|i| i.name == name && self.used.contains(&i.id)).map(|i| i.id)
        else {
            self.error.get_or_insert(GraphError::UnknownEntity(name.to_string()));
            return;
        };
        if let Some(holder) = self.edges.iter().find(|e| e.src == id && e.relation == Relation::ContainedBy) {
            let holder = holder.dst;
            self.edges.push(Edge::new(id, relation, holder));
        }
    }

    pub fn dead(mut self, name: &str) -> Self {
        if let Some(id) = self.existing_or_new(name) {
            self.dead.insert(id);
        }
        self
    }

    pub fn build(self) -> Result<WorldGraph, GraphError> {
        if let Some(e) = self.error {
            return Err(e);
        }
        let actor = self
            .instances
            .iter()
            .find(|i| i.actor)
            .map(|i| i.id)
            .ok_or_else(|| GraphError::InvalidWorld("catalog has no actor".into()))?;
        if !self.used.contains(&actor) {
            return Err(GraphError::InvalidWorld("the actor was never placed".into()));
        }
        let nodes: Vec<EntityNode> = self
            .instances
            .iter()
            .filter(|i| self.used.contains(&i.id))
            .map(|i| {
                let mut properties = i.properties.clone();
                if self.dead.contains(&i.id) {
                    properties.remove(&Property::Alive);
                    properties.insert(Property::Dead);
                }
                EntityNode { id: i.id, name: i.name.clone(), kind: self.kind(i.id), properties }
            })
            .collect();
        WorldGraph::from_parts(nodes, self.edges, actor)
    }
}
