//! World state as a typed graph of entities and labeled edges.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::GraphError;

/// Opaque node identifier. Ids are assigned from the catalog instance index,
/// so the same catalog item carries the same id in every generated world.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Location,
    Agent,
    Object,
}

impl EntityKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EntityKind::Location => "location",
            EntityKind::Agent => "agent",
            EntityKind::Object => "object",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    Food,
    Drink,
    Wearable,
    Wieldable,
    Container,
    Alive,
    Dead,
}

impl Property {
    pub fn as_str(self) -> &'static str {
        match self {
            Property::Food => "food",
            Property::Drink => "drink",
            Property::Wearable => "wearable",
            Property::Wieldable => "wieldable",
            Property::Container => "container",
            Property::Alive => "alive",
            Property::Dead => "dead",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityNode {
    pub id: NodeId,
    pub name: String,
    pub kind: EntityKind,
    #[serde(default)]
    pub properties: BTreeSet<Property>,
}

impl EntityNode {
    pub fn has(&self, property: Property) -> bool {
        self.properties.contains(&property)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    PathTo,
    ContainedBy,
    WornBy,
    WieldedBy,
}

impl Relation {
    pub fn as_str(self) -> &'static str {
        match self {
            Relation::PathTo => "path_to",
            Relation::ContainedBy => "contained_by",
            Relation::WornBy => "worn_by",
            Relation::WieldedBy => "wielded_by",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub src: NodeId,
    pub relation: Relation,
    pub dst: NodeId,
}

impl Edge {
    pub fn new(src: NodeId, relation: Relation, dst: NodeId) -> Self {
        Edge { src, relation, dst }
    }
}

/// On-disk layout of a world document; field order is the canonical order.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct WorldDocument {
    actor_id: NodeId,
    nodes: Vec<EntityNode>,
    edges: Vec<Edge>,
}

/// Game state. Values are immutable from the outside: every action returns a
/// fresh world.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "WorldDocument", try_from = "WorldDocument")]
pub struct WorldGraph {
    nodes: BTreeMap<NodeId, EntityNode>,
    edges: BTreeSet<Edge>,
    actor: NodeId,
}

impl From<WorldGraph> for WorldDocument {
    fn from(world: WorldGraph) -> Self {
        let mut nodes: Vec<EntityNode> = world.nodes.into_values().collect();
        nodes.sort_by(|a, b| a.name.cmp(&b.name).then(a.id.cmp(&b.id)));
        WorldDocument {
            actor_id: world.actor,
            nodes,
            edges: world.edges.into_iter().collect(),
        }
    }
}

impl TryFrom<WorldDocument> for WorldGraph {
    type Error = GraphError;

    fn try_from(doc: WorldDocument) -> Result<Self, Self::Error> {
        WorldGraph::from_parts(doc.nodes, doc.edges, doc.actor_id)
    }
}

impl WorldGraph {
    /// Builds a world and checks every structural invariant.
    pub fn from_parts(
        nodes: impl IntoIterator<Item = EntityNode>,
        edges: impl IntoIterator<Item = Edge>,
        actor: NodeId,
    ) -> Result<Self, GraphError> {
        let mut map = BTreeMap::new();
        for node in nodes {
            let id = node.id;
            if map.insert(id, node).is_some() {
                return Err(GraphError::InvalidWorld(format!("duplicate node id {id}")));
            }
        }
        let world = WorldGraph {
            nodes: map,
            edges: edges.into_iter().collect(),
            actor,
        };
        world.validate()?;
        Ok(world)
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        let bad = |msg: String| Err(GraphError::InvalidWorld(msg));
        match self.nodes.get(&self.actor) {
            Some(n) if n.kind == EntityKind::Agent => {}
            _ => return bad(format!("actor {} is not an agent", self.actor)),
        }
        for node in self.nodes.values() {
            let alive = node.has(Property::Alive);
            let dead = node.has(Property::Dead);
            if node.kind == EntityKind::Agent {
                if alive == dead {
                    return bad(format!("agent {} must be exactly one of alive/dead", node.name));
                }
            } else if alive || dead {
                return bad(format!("{} is not an agent but has alive/dead", node.name));
            }
        }
        for edge in &self.edges {
            let (Some(src), Some(dst)) = (self.nodes.get(&edge.src), self.nodes.get(&edge.dst)) else {
                return bad(format!("edge {:?} references a missing node", edge));
            };
            match edge.relation {
                Relation::PathTo => {
                    if src.kind != EntityKind::Location || dst.kind != EntityKind::Location {
                        return bad(format!("path_to between non-locations {} -> {}", src.name, dst.name));
                    }
                    if !self.edges.contains(&Edge::new(edge.dst, Relation::PathTo, edge.src)) {
                        return bad(format!("path_to {} -> {} is not symmetric", src.name, dst.name));
                    }
                }
                Relation::ContainedBy => {
                    if src.kind == EntityKind::Location {
                        return bad(format!("location {} cannot be contained", src.name));
                    }
                    let ok = match dst.kind {
                        EntityKind::Location | EntityKind::Agent => true,
                        EntityKind::Object => dst.has(Property::Container),
                    };
                    if !ok {
                        return bad(format!("{} cannot contain {}", dst.name, src.name));
                    }
                }
                Relation::WornBy | Relation::WieldedBy => {
                    if dst.kind != EntityKind::Agent
                        || !self.edges.contains(&Edge::new(edge.src, Relation::ContainedBy, edge.dst))
                    {
                        return bad(format!(
                            "{} {} {} without being carried",
                            src.name,
                            edge.relation.as_str(),
                            dst.name
                        ));
                    }
                }
            }
        }
        for node in self.nodes.values() {
            if node.kind == EntityKind::Location {
                continue;
            }
            let holders = self
                .edges
                .iter()
                .filter(|e| e.src == node.id && e.relation == Relation::ContainedBy)
                .count();
            if holders != 1 {
                return bad(format!("{} has {holders} contained_by edges", node.name));
            }
            // walk to a location, bounded by node count
            let mut current = node.id;
            let mut steps = 0;
            while self.nodes[&current].kind != EntityKind::Location {
                current = self.container_of(current).expect("checked above");
                steps += 1;
                if steps > self.nodes.len() {
                    return bad(format!("containment cycle through {}", node.name));
                }
            }
        }
        Ok(())
    }

    pub fn actor(&self) -> NodeId {
        self.actor
    }

    pub fn node(&self, id: NodeId) -> Option<&EntityNode> {
        self.nodes.get(&id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &EntityNode> {
        self.nodes.values()
    }

    pub fn edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter()
    }

    pub fn has_edge(&self, src: NodeId, relation: Relation, dst: NodeId) -> bool {
        self.edges.contains(&Edge::new(src, relation, dst))
    }

    pub fn name(&self, id: NodeId) -> &str {
        &self.nodes[&id].name
    }

    pub fn kind(&self, id: NodeId) -> EntityKind {
        self.nodes[&id].kind
    }

    pub fn has_property(&self, id: NodeId, property: Property) -> bool {
        self.nodes.get(&id).is_some_and(|n| n.has(property))
    }

    /// Nodes with the given name in id order. Identical items (three apples)
    /// share a name.
    pub fn nodes_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = NodeId> + 'a {
        self.nodes.values().filter(move |n| n.name == name).map(|n| n.id)
    }

    pub fn contains_name(&self, name: &str) -> bool {
        self.nodes.values().any(|n| n.name == name)
    }

    /// Distinct node names, sorted.
    pub fn names(&self) -> BTreeSet<&str> {
        self.nodes.values().map(|n| n.name.as_str()).collect()
    }

    pub fn container_of(&self, id: NodeId) -> Option<NodeId> {
        self.edges
            .range(Edge::new(id, Relation::ContainedBy, NodeId(0))..=Edge::new(id, Relation::ContainedBy, NodeId(u32::MAX)))
            .next()
            .map(|e| e.dst)
    }

    /// The location a node ultimately sits in. Locations map to themselves.
    pub fn location_of(&self, id: NodeId) -> NodeId {
        let mut current = id;
        while self.nodes[&current].kind != EntityKind::Location {
            match self.container_of(current) {
                Some(next) => current = next,
                None => break,
            }
        }
        current
    }

    pub fn actor_location(&self) -> NodeId {
        self.location_of(self.actor)
    }

    /// Direct contents of a node, in id order.
    pub fn contents(&self, holder: NodeId) -> Vec<NodeId> {
        self.edges
            .iter()
            .filter(|e| e.relation == Relation::ContainedBy && e.dst == holder)
            .map(|e| e.src)
            .collect()
    }

    pub fn neighbors(&self, location: NodeId) -> Vec<NodeId> {
        self.edges
            .range(Edge::new(location, Relation::PathTo, NodeId(0))..=Edge::new(location, Relation::PathTo, NodeId(u32::MAX)))
            .map(|e| e.dst)
            .collect()
    }

    pub fn is_worn(&self, id: NodeId) -> bool {
        self.container_of(id).is_some_and(|h| self.has_edge(id, Relation::WornBy, h))
    }

    pub fn is_wielded(&self, id: NodeId) -> bool {
        self.container_of(id).is_some_and(|h| self.has_edge(id, Relation::WieldedBy, h))
    }

    pub(crate) fn add_edge(&mut self, edge: Edge) {
        self.edges.insert(edge);
    }

    pub(crate) fn remove_edge(&mut self, edge: &Edge) {
        self.edges.remove(edge);
    }

    /// Moves a node to a new holder, dropping any worn/wielded edges it had.
    pub(crate) fn set_container(&mut self, id: NodeId, holder: NodeId) {
        self.edges
            .retain(|e| !(e.src == id && matches!(e.relation, Relation::ContainedBy | Relation::WornBy | Relation::WieldedBy)));
        self.edges.insert(Edge::new(id, Relation::ContainedBy, holder));
    }

    /// Deletes a node and every incident edge. Anything it held falls into
    /// its former location.
    pub(crate) fn remove_node(&mut self, id: NodeId) {
        let location = self.location_of(id);
        for inner in self.contents(id) {
            self.set_container(inner, location);
        }
        self.edges.retain(|e| e.src != id && e.dst != id);
        self.nodes.remove(&id);
    }

    pub(crate) fn set_properties(&mut self, id: NodeId, remove: Property, add: Property) {
        if let Some(node) = self.nodes.get_mut(&id) {
            node.properties.remove(&remove);
            node.properties.insert(add);
        }
    }

    /// Line-oriented, sorted, name-based serialization. Two worlds with the
    /// same content produce byte-identical strings; identical items that were
    /// swapped (one apple for another) are indistinguishable, which is the
    /// intended notion of state equality.
    pub fn canonical_string(&self) -> String {
        let mut lines: Vec<String> = Vec::with_capacity(self.nodes.len() + self.edges.len() + 1);
        for node in self.nodes.values() {
            let mut line = format!("node {} {}", node.kind.as_str(), node.name);
            for p in &node.properties {
                line.push(' ');
                line.push_str(p.as_str());
            }
            lines.push(line);
        }
        for e in &self.edges {
            lines.push(format!(
                "edge {} {} {}",
                self.nodes[&e.src].name,
                e.relation.as_str(),
                self.nodes[&e.dst].name
            ));
        }
        lines.sort();
        let mut out = format!("actor {}\n", self.nodes[&self.actor].name);
        for line in lines {
            out.push_str(&line);
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("world serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        serde_json::from_str(text).map_err(|e| GraphError::InvalidWorld(e.to_string()))
    }
}

/// True iff the canonical serializations are identical.
pub fn states_equal(a: &WorldGraph, b: &WorldGraph) -> bool {
    a.canonical_string() == b.canonical_string()
}
