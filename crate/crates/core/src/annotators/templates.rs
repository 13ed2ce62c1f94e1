use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::AnnotatorError;
use crate::graphworld::{ActionType, EntityKind, GroundedAction, WorldGraph};

const DEFAULT_TEMPLATES: &str = include_str!("../../assets/templates.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Common,
    Rare,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Template {
    pub text: String,
    pub tier: Tier,
}

/// Surface forms for actions: per-type templates with `{a}`/`{b}` noun
/// phrase slots, connectives for joining actions, and alternative noun
/// phrases for some entities.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateBank {
    pub actions: BTreeMap<ActionType, Vec<Template>>,
    pub connectives: Vec<Template>,
    #[serde(default)]
    pub synonyms: BTreeMap<String, Vec<String>>,
}

impl Default for TemplateBank {
    fn default() -> Self {
        Self::from_json(DEFAULT_TEMPLATES).expect("bundled templates are valid")
    }
}

impl TemplateBank {
    pub fn from_json(text: &str) -> Result<Self, AnnotatorError> {
        let bank: TemplateBank = serde_json::from_str(text).map_err(|e| AnnotatorError::Templates(e.to_string()))?;
        bank.validate()?;
        Ok(bank)
    }

    pub fn load(path: &Path) -> Result<Self, AnnotatorError> {
        let text = std::fs::read_to_string(path).map_err(|e| AnnotatorError::Templates(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Every action type needs at least one common and two templates in
    /// total, with exactly the slots its arity calls for.
    pub fn validate(&self) -> Result<(), AnnotatorError> {
        for t in ActionType::ALL {
            let list = self.actions.get(&t).map(Vec::as_slice).unwrap_or(&[]);
            if list.len() < 2 || !list.iter().any(|x| x.tier == Tier::Common) {
                return Err(AnnotatorError::Templates(format!("{t} needs two templates, one of them common")));
            }
            for x in list {
                let slots = usize::from(x.text.contains("{a}")) + usize::from(x.text.contains("{b}"));
                if slots != t.arity() {
                    return Err(AnnotatorError::Templates(format!("template {:?} does not fit {t}", x.text)));
                }
            }
        }
        if !self.connectives.iter().any(|c| c.tier == Tier::Common) {
            return Err(AnnotatorError::Templates("no common connective".into()));
        }
        Ok(())
    }

    fn pick<'a>(list: &'a [Template], rare_probability: f64, rng: &mut impl Rng) -> &'a Template {
        let want = if rng.gen_bool(rare_probability.clamp(0.0, 1.0)) { Tier::Rare } else { Tier::Common };
        let tier: Vec<&Template> = list.iter().filter(|t| t.tier == want).collect();
        match tier.choose(rng) {
            Some(t) => t,
            None => list.choose(rng).expect("validated lists are non-empty"),
        }
    }

    /// Renders an action sequence as one command. `rare_probability` is the
    /// chance of drawing a rare template, connective or entity paraphrase.
    /// An argument repeated from the previous action may become "it".
    pub fn render(
        &self,
        actions: &[GroundedAction],
        world: &WorldGraph,
        rare_probability: f64,
        rng: &mut impl Rng,
    ) -> String {
        let mut out = String::new();
        for (i, a) in actions.iter().enumerate() {
            if i > 0 {
                out.push_str(&Self::pick(&self.connectives, rare_probability, rng).text);
            }
            let template = Self::pick(&self.actions[&a.action_type], rare_probability, rng);
            let prev = i.checked_sub(1).map(|p| &actions[p]);
            let mut text = template.text.clone();
            for (slot, arg) in [("{a}", a.arg1()), ("{b}", a.arg2())] {
                if let Some(name) = arg {
                    let phrase = self.noun_phrase(name, prev, world, rare_probability, rng);
                    text = text.replace(slot, &phrase);
                }
            }
            out.push_str(&text);
        }
        out
    }

    fn noun_phrase(
        &self,
        name: &str,
        prev: Option<&GroundedAction>,
        world: &WorldGraph,
        rare_probability: f64,
        rng: &mut impl Rng,
    ) -> String {
        let is_location = world.nodes_named(name).next().is_some_and(|id| world.kind(id) == EntityKind::Location);
        let repeated = prev.is_some_and(|p| p.args().any(|x| x == name));
        if repeated && !is_location && rng.gen_bool(0.5) {
            return "it".to_string();
        }
        if let Some(alts) = self.synonyms.get(name) {
            if rng.gen_bool((rare_probability * 0.5).clamp(0.0, 1.0)) {
                return alts.choose(rng).expect("synonym lists are non-empty").clone();
            }
        }
        format!("the {name}")
    }

    /// Every distinct surface form one action can take under this bank
    /// (without pronouns or entity paraphrases).
    pub fn surface_forms(&self, action: &GroundedAction) -> Vec<String> {
        self.actions[&action.action_type]
            .iter()
            .map(|t| {
                let mut s = t.text.clone();
                if let Some(a) = action.arg1() {
                    s = s.replace("{a}", &format!("the {a}"));
                }
                if let Some(b) = action.arg2() {
                    s = s.replace("{b}", &format!("the {b}"));
                }
                s
            })
            .collect()
    }
}
