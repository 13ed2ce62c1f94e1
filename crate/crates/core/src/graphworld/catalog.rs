//! Entity catalog: the vocabulary of places, characters and items a world is
//! drawn from.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::world::{EntityKind, NodeId, Property};
use super::GraphError;

const DEFAULT_CATALOG: &str = include_str!("../../assets/default_catalog.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogAgent {
    pub name: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub actor: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogObject {
    pub name: String,
    #[serde(default)]
    pub properties: BTreeSet<Property>,
    /// Number of identical instances (e.g. three apples).
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub count: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub aliases: Vec<String>,
}

fn one() -> usize {
    1
}

fn is_one(n: &usize) -> bool {
    *n == 1
}

impl CatalogObject {
    pub fn is_container(&self) -> bool {
        self.properties.contains(&Property::Container)
    }
}

/// How many of each entity class a generated world holds. `objects` counts
/// every object node, containers included.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldShape {
    pub locations: usize,
    pub agents: usize,
    pub objects: usize,
    pub containers: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Catalog {
    pub locations: Vec<String>,
    pub agents: Vec<CatalogAgent>,
    pub objects: Vec<CatalogObject>,
    pub shape: WorldShape,
}

/// One instantiable entity: a catalog entry expanded by its count, with the
/// node id every world uses for it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CatalogInstance {
    pub id: NodeId,
    pub name: String,
    pub kind: EntityKind,
    pub properties: BTreeSet<Property>,
    pub actor: bool,
}

impl Default for Catalog {
    fn default() -> Self {
        serde_json::from_str(DEFAULT_CATALOG).expect("bundled catalog parses")
    }
}

impl Catalog {
    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        let catalog: Catalog =
            serde_json::from_str(text).map_err(|e| GraphError::InvalidCatalog(e.to_string()))?;
        catalog.validate()?;
        Ok(catalog)
    }

    pub fn load(path: &Path) -> Result<Self, GraphError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GraphError::InvalidCatalog(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("catalog serializes")
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        let bad = |msg: String| Err(GraphError::InvalidCatalog(msg));
        if self.locations.is_empty() {
            return bad("catalog has no locations".into());
        }
        let mut seen = BTreeSet::new();
        let all_names = self
            .locations
            .iter()
            .chain(self.agents.iter().map(|a| &a.name))
            .chain(self.objects.iter().map(|o| &o.name));
        for name in all_names {
            if name.trim().is_empty() || name != &name.to_lowercase() {
                return bad(format!("entity name {name:?} must be non-empty lowercase"));
            }
            if !seen.insert(name.as_str()) {
                return bad(format!("duplicate entity name {name:?}"));
            }
        }
        if self.agents.iter().filter(|a| a.actor).count() != 1 {
            return bad("catalog must mark exactly one agent as the actor".into());
        }
        for obj in &self.objects {
            if obj.count == 0 {
                return bad(format!("object {:?} has count 0", obj.name));
            }
            if obj.properties.contains(&Property::Alive) || obj.properties.contains(&Property::Dead) {
                return bad(format!("object {:?} cannot be alive or dead", obj.name));
            }
            for alias in &obj.aliases {
                if seen.contains(alias.as_str()) {
                    return bad(format!("alias {alias:?} shadows an entity name"));
                }
            }
        }
        let s = self.shape;
        let containers: usize = self.objects.iter().filter(|o| o.is_container()).map(|o| o.count).sum();
        let plain: usize = self.objects.iter().filter(|o| !o.is_container()).map(|o| o.count).sum();
        if s.locations == 0 || s.locations > self.locations.len() {
            return bad(format!("shape asks for {} locations, catalog has {}", s.locations, self.locations.len()));
        }
        if s.agents == 0 || s.agents > self.agents.len() {
            return bad(format!("shape asks for {} agents, catalog has {}", s.agents, self.agents.len()));
        }
        if s.containers > s.objects || s.containers > containers || s.objects - s.containers > plain {
            return bad("shape object counts exceed the catalog".into());
        }
        Ok(())
    }

    /// Every instantiable entity with its stable node id: locations, then
    /// agents, then objects in catalog order.
    pub fn instances(&self) -> Vec<CatalogInstance> {
        let mut out = Vec::new();
        let mut next = 0u32;
        let mut push = |name: &str, kind, properties: BTreeSet<Property>, actor| {
            out.push(CatalogInstance {
                id: NodeId(next),
                name: name.to_string(),
                kind,
                properties,
                actor,
            });
            next += 1;
        };
        for loc in &self.locations {
            push(loc, EntityKind::Location, BTreeSet::new(), false);
        }
        for agent in &self.agents {
            push(&agent.name, EntityKind::Agent, BTreeSet::from([Property::Alive]), agent.actor);
        }
        for obj in &self.objects {
            for _ in 0..obj.count {
                push(&obj.name, EntityKind::Object, obj.properties.clone(), false);
            }
        }
        out
    }

    pub fn actor_name(&self) -> &str {
        &self.agents.iter().find(|a| a.actor).expect("validated catalog has an actor").name
    }

    /// All distinct entity names, sorted.
    pub fn entity_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .locations
            .iter()
            .cloned()
            .chain(self.agents.iter().map(|a| a.name.clone()))
            .chain(self.objects.iter().map(|o| o.name.clone()))
            .collect();
        names.sort();
        names
    }

    /// Surface phrase → canonical entity names it may denote. Names map to
    /// themselves; aliases may map to several names.
    pub fn phrase_table(&self) -> BTreeMap<String, BTreeSet<String>> {
        let mut table: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for name in self.entity_names() {
            table.entry(name.clone()).or_default().insert(name);
        }
        for obj in &self.objects {
            for alias in &obj.aliases {
                table.entry(alias.clone()).or_default().insert(obj.name.clone());
            }
        }
        table
    }

    pub fn kind_of(&self, name: &str) -> Option<EntityKind> {
        if self.locations.iter().any(|l| l == name) {
            Some(EntityKind::Location)
        } else if self.agents.iter().any(|a| a.name == name) {
            Some(EntityKind::Agent)
        } else if self.objects.iter().any(|o| o.name == name) {
            Some(EntityKind::Object)
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_catalog_is_valid() {
        let c = Catalog::default();
        c.validate().unwrap();
        assert_eq!(c.actor_name(), "dragon");
        assert_eq!(c.shape, WorldShape { locations: 3, agents: 3, objects: 14, containers: 2 });
        let apples = c.instances().iter().filter(|i| i.name == "apple").count();
        assert_eq!(apples, 3);
    }

    #[test]
    fn rejects_duplicates_and_empty() {
        let mut c = Catalog::default();
        c.locations.push("forest".into());
        assert!(matches!(c.validate(), Err(GraphError::InvalidCatalog(_))));
        let mut c = Catalog::default();
        c.locations.clear();
        assert!(c.validate().is_err());
    }

    #[test]
    fn json_round_trip() {
        let c = Catalog::default();
        assert_eq!(Catalog::from_json(&c.to_json()).unwrap(), c);
    }
}
