use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::GraphError;

/// The seventeen surface forms of the game's action list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionType {
    Look,
    Examine,
    Go,
    Follow,
    Get,
    Drop,
    Eat,
    Drink,
    Wear,
    Remove,
    Wield,
    Unwield,
    Hit,
    PutIn,
    GetFrom,
    GiveTo,
    TakeFrom,
}

impl ActionType {
    pub const ALL: [ActionType; 17] = [
        ActionType::Look,
        ActionType::Examine,
        ActionType::Go,
        ActionType::Follow,
        ActionType::Get,
        ActionType::Drop,
        ActionType::Eat,
        ActionType::Drink,
        ActionType::Wear,
        ActionType::Remove,
        ActionType::Wield,
        ActionType::Unwield,
        ActionType::Hit,
        ActionType::PutIn,
        ActionType::GetFrom,
        ActionType::GiveTo,
        ActionType::TakeFrom,
    ];

    pub fn arity(self) -> usize {
        match self {
            ActionType::Look => 0,
            ActionType::PutIn | ActionType::GetFrom | ActionType::GiveTo | ActionType::TakeFrom => 2,
            _ => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ActionType::Look => "look",
            ActionType::Examine => "examine",
            ActionType::Go => "go",
            ActionType::Follow => "follow",
            ActionType::Get => "get",
            ActionType::Drop => "drop",
            ActionType::Eat => "eat",
            ActionType::Drink => "drink",
            ActionType::Wear => "wear",
            ActionType::Remove => "remove",
            ActionType::Wield => "wield",
            ActionType::Unwield => "unwield",
            ActionType::Hit => "hit",
            ActionType::PutIn => "put_in",
            ActionType::GetFrom => "get_from",
            ActionType::GiveTo => "give_to",
            ActionType::TakeFrom => "take_from",
        }
    }

    pub fn from_str_opt(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.as_str() == s)
    }

    /// Leading verb and, for two-argument forms, the preposition.
    pub fn surface(self) -> (&'static str, Option<&'static str>) {
        match self {
            ActionType::PutIn => ("put", Some("in")),
            ActionType::GetFrom => ("get", Some("from")),
            ActionType::GiveTo => ("give", Some("to")),
            ActionType::TakeFrom => ("take", Some("from")),
            other => (other.as_str(), None),
        }
    }

    /// Changes the world when it succeeds (look/examine are observations).
    pub fn is_mutating(self) -> bool {
        !matches!(self, ActionType::Look | ActionType::Examine)
    }
}

impl fmt::Display for ActionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `(type, arg1, arg2)` with entity names as arguments.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroundedAction {
    pub action_type: ActionType,
    pub arg1: Option<String>,
    pub arg2: Option<String>,
}

impl GroundedAction {
    pub fn new(
        action_type: ActionType,
        arg1: Option<&str>,
        arg2: Option<&str>,
    ) -> Result<Self, GraphError> {
        let given = arg1.is_some() as usize + arg2.is_some() as usize;
        if given != action_type.arity() || (arg1.is_none() && arg2.is_some()) {
            return Err(GraphError::ArityMismatch {
                action_type,
                expected: action_type.arity(),
                found: given,
            });
        }
        Ok(GroundedAction {
            action_type,
            arg1: arg1.map(str::to_string),
            arg2: arg2.map(str::to_string),
        })
    }

    pub fn look() -> Self {
        GroundedAction { action_type: ActionType::Look, arg1: None, arg2: None }
    }

    pub fn unary(action_type: ActionType, arg: &str) -> Self {
        Self::new(action_type, Some(arg), None).expect("unary action type")
    }

    pub fn binary(action_type: ActionType, arg1: &str, arg2: &str) -> Self {
        Self::new(action_type, Some(arg1), Some(arg2)).expect("binary action type")
    }

    pub fn arg1(&self) -> Option<&str> {
        self.arg1.as_deref()
    }

    pub fn arg2(&self) -> Option<&str> {
        self.arg2.as_deref()
    }

    pub fn args(&self) -> impl Iterator<Item = &str> {
        self.arg1.as_deref().into_iter().chain(self.arg2.as_deref())
    }
}

impl fmt::Display for GroundedAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (verb, prep) = self.action_type.surface();
        f.write_str(verb)?;
        if let Some(a) = &self.arg1 {
            write!(f, " {a}")?;
        }
        if let (Some(p), Some(b)) = (prep, &self.arg2) {
            write!(f, " {p} {b}")?;
        }
        Ok(())
    }
}

// Wire form is the triple `[type, arg1|null, arg2|null]`.
impl Serialize for GroundedAction {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        (self.action_type, &self.arg1, &self.arg2).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for GroundedAction {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let (t, a, b): (ActionType, Option<String>, Option<String>) = Deserialize::deserialize(deserializer)?;
        GroundedAction::new(t, a.as_deref(), b.as_deref()).map_err(D::Error::custom)
    }
}

pub fn format_sequence(actions: &[GroundedAction]) -> String {
    actions.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arity_is_enforced() {
        assert!(GroundedAction::new(ActionType::Look, None, None).is_ok());
        assert!(GroundedAction::new(ActionType::Look, Some("troll"), None).is_err());
        assert!(GroundedAction::new(ActionType::PutIn, Some("axe"), None).is_err());
        assert!(GroundedAction::new(ActionType::Go, None, Some("tower")).is_err());
    }

    #[test]
    fn display_matches_game_syntax() {
        let a = GroundedAction::binary(ActionType::PutIn, "crossbow", "treasure chest");
        assert_eq!(a.to_string(), "put crossbow in treasure chest");
        assert_eq!(GroundedAction::look().to_string(), "look");
    }

    #[test]
    fn serializes_as_triple() {
        let a = GroundedAction::unary(ActionType::Go, "tower");
        let json = serde_json::to_string(&a).unwrap();
        assert_eq!(json, r#"["go","tower",null]"#);
        let back: GroundedAction = serde_json::from_str(&json).unwrap();
        assert_eq!(back, a);
        assert!(serde_json::from_str::<GroundedAction>(r#"["go",null,null]"#).is_err());
    }
}
