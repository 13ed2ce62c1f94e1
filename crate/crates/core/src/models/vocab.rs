use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::graphworld::Catalog;

pub const UNK: &str = "<unk>";
pub const NONE: &str = "<none>";

/// Lowercases, strips punctuation and splits on whitespace, then merges
/// multi-word entity names into single tokens by longest match so that
/// "treasure chest" shares its embedding row with the argument.
pub fn command_tokens(text: &str, entities: &[String]) -> Vec<String> {
    let words: Vec<String> = text
        .to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() || c == '\'' { c } else { ' ' })
        .collect::<String>()
        .split_whitespace()
        .map(str::to_string)
        .collect();
    let mut phrases: Vec<Vec<&str>> =
        entities.iter().filter(|e| e.contains(' ')).map(|e| e.split(' ').collect()).collect();
    phrases.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
    let mut out = Vec::with_capacity(words.len());
    let mut i = 0;
    while i < words.len() {
        let hit = phrases.iter().find(|p| i + p.len() <= words.len() && words[i..i + p.len()].iter().eq(p.iter()));
        match hit {
            Some(p) => {
                out.push(p.join(" "));
                i += p.len();
            }
            None => {
                out.push(words[i].clone());
                i += 1;
            }
        }
    }
    out
}

/// Word, argument and location indices. With tied embeddings every entity
/// name is also a word and its argument row is that word's row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "VocabularyDocument", into = "VocabularyDocument")]
pub struct Vocabulary {
    words: Vec<String>,
    entities: Vec<String>,
    locations: Vec<String>,
    word_index: BTreeMap<String, usize>,
    entity_index: BTreeMap<String, usize>,
    location_index: BTreeMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyDocument {
    words: Vec<String>,
    entities: Vec<String>,
    locations: Vec<String>,
}

impl From<VocabularyDocument> for Vocabulary {
    fn from(d: VocabularyDocument) -> Self {
        let index = |v: &[String]| v.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Vocabulary {
            word_index: index(&d.words),
            entity_index: index(&d.entities),
            location_index: index(&d.locations),
            words: d.words,
            entities: d.entities,
            locations: d.locations,
        }
    }
}

impl From<Vocabulary> for VocabularyDocument {
    fn from(v: Vocabulary) -> Self {
        VocabularyDocument { words: v.words, entities: v.entities, locations: v.locations }
    }
}

impl Vocabulary {
    /// Special rows first, then catalog entity names, then every other token
    /// seen in `commands`, in first-seen order.
    pub fn build<'a>(catalog: &Catalog, commands: impl IntoIterator<Item = &'a str>) -> Self {
        let entities = catalog.entity_names();
        let locations: Vec<String> = catalog.locations.clone();
        let mut words = vec![UNK.to_string(), NONE.to_string()];
        words.extend(entities.iter().cloned());
        let mut seen: std::collections::BTreeSet<String> = words.iter().cloned().collect();
        for c in commands {
            for t in command_tokens(c, &entities) {
                if seen.insert(t.clone()) {
                    words.push(t);
                }
            }
        }
        VocabularyDocument { words, entities, locations }.into()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn entities(&self) -> &[String] {
        &self.entities
    }

    pub fn locations(&self) -> &[String] {
        &self.locations
    }

    pub fn word_id(&self, word: &str) -> usize {
        self.word_index.get(word).copied().unwrap_or(0)
    }

    pub fn tokens(&self, command: &str) -> Vec<String> {
        command_tokens(command, &self.entities)
    }

    pub fn encode(&self, command: &str) -> Vec<usize> {
        self.tokens(command).iter().map(|t| self.word_id(t)).collect()
    }

    /// Row in the untied argument table: entities, then NONE last.
    pub fn entity_id(&self, name: Option<&str>) -> Option<usize> {
        match name {
            None => Some(self.entities.len()),
            Some(n) => self.entity_index.get(n).copied(),
        }
    }

    /// Row in the word table used for an argument when embeddings are tied.
    pub fn tied_arg_row(&self, name: Option<&str>) -> Option<usize> {
        match name {
            None => Some(1),
            Some(n) => self.word_index.get(n).copied(),
        }
    }

    /// Location row; unknown locations share the extra last row.
    pub fn location_id(&self, name: &str) -> usize {
        self.location_index.get(name).copied().unwrap_or(self.locations.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merges_multiword_names() {
        let c = Catalog::default();
        let toks = command_tokens("Put the crossbow into the Treasure Chest!", &c.entity_names());
        assert_eq!(toks, ["put", "the", "crossbow", "into", "the", "treasure chest"]);
    }

    #[test]
    fn tied_rows_and_unknowns() {
        let c = Catalog::default();
        let v = Vocabulary::build(&c, ["go to the tower", "zap it"]);
        assert_eq!(v.tied_arg_row(Some("tower")), Some(v.word_id("tower")));
        assert_eq!(v.word_id("xyzzy"), 0);
        assert_eq!(v.encode("zap tower"), vec![v.word_id("zap"), v.word_id("tower")]);
        let back: Vocabulary = serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
        assert_eq!(back, v);
    }
}
