//! Parsing of grounded action strings ("put crossbow in treasure chest").

use std::collections::BTreeSet;

use super::action::{ActionType, GroundedAction};
use super::catalog::Catalog;
use super::GraphError;

/// Lowercases, turns punctuation into separators and splits on whitespace.
/// `;` and `,` survive as standalone tokens so action lists can be split.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut cleaned = String::with_capacity(text.len());
    for ch in text.chars() {
        if ch.is_alphanumeric() || ch == '\'' {
            cleaned.extend(ch.to_lowercase());
        } else if ch == ';' || ch == ',' {
            cleaned.push(' ');
            cleaned.push(ch);
            cleaned.push(' ');
        } else {
            cleaned.push(' ');
        }
    }
    cleaned.split_whitespace().map(str::to_string).collect()
}

/// Longest-match lookup of catalog names and aliases over token streams.
#[derive(Debug, Clone)]
pub struct PhraseMatcher {
    // longest phrases first
    phrases: Vec<(Vec<String>, BTreeSet<String>)>,
}

impl PhraseMatcher {
    pub fn new(catalog: &Catalog) -> Self {
        let mut phrases: Vec<(Vec<String>, BTreeSet<String>)> = catalog
            .phrase_table()
            .into_iter()
            .map(|(phrase, names)| (phrase.split_whitespace().map(str::to_string).collect(), names))
            .collect();
        phrases.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
        PhraseMatcher { phrases }
    }

    /// Longest phrase starting at `pos`: its token length and the names it
    /// may denote.
    pub fn match_at(&self, tokens: &[String], pos: usize) -> Option<(usize, &BTreeSet<String>)> {
        self.phrases.iter().find_map(|(words, names)| {
            let end = pos + words.len();
            (end <= tokens.len() && tokens[pos..end] == words[..]).then_some((words.len(), names))
        })
    }

    /// Exact canonical names only (aliases excluded), longest first.
    pub fn match_name_at(&self, tokens: &[String], pos: usize) -> Option<(usize, &str)> {
        self.phrases.iter().find_map(|(words, names)| {
            let end = pos + words.len();
            if end > tokens.len() || tokens[pos..end] != words[..] {
                return None;
            }
            let joined = words.join(" ");
            names.contains(&joined).then(|| (words.len(), names.get(&joined).unwrap().as_str()))
        })
    }
}

const ARTICLES: [&str; 3] = ["the", "a", "an"];

struct Cursor<'a> {
    tokens: &'a [String],
    pos: usize,
    matcher: &'a PhraseMatcher,
}

impl Cursor<'_> {
    fn peek(&self) -> Option<&str> {
        self.tokens.get(self.pos).map(String::as_str)
    }

    fn at_end(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    fn entity(&mut self) -> Result<String, GraphError> {
        while self.peek().is_some_and(|t| ARTICLES.contains(&t)) {
            self.pos += 1;
        }
        let start = self.pos;
        match self.matcher.match_at(self.tokens, self.pos) {
            Some((len, names)) => {
                self.pos += len;
                if names.len() > 1 {
                    return Err(GraphError::AmbiguousParse {
                        position: start,
                        message: format!(
                            "{:?} could mean any of {}",
                            self.tokens[start..start + len].join(" "),
                            names.iter().cloned().collect::<Vec<_>>().join(", ")
                        ),
                    });
                }
                Ok(names.iter().next().unwrap().clone())
            }
            None => Err(GraphError::UnknownEntityAt {
                position: start,
                text: self.peek().unwrap_or("<end of input>").to_string(),
            }),
        }
    }

    fn expect(&mut self, word: &str, action_type: ActionType) -> Result<(), GraphError> {
        match self.peek() {
            Some(t) if t == word || (word == "in" && t == "into") => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(GraphError::ArityMismatch { action_type, expected: 2, found: 1 }),
        }
    }

    fn action(&mut self) -> Result<GroundedAction, GraphError> {
        let start = self.pos;
        let Some(verb) = self.peek().map(str::to_string) else {
            return Err(GraphError::UnknownVerb { position: start, verb: String::new() });
        };
        self.pos += 1;
        let unary = |t: ActionType, c: &mut Self| -> Result<GroundedAction, GraphError> {
            if c.at_end() || is_separator(c.peek()) {
                return Err(GraphError::ArityMismatch { action_type: t, expected: 1, found: 0 });
            }
            let arg = c.entity()?;
            Ok(GroundedAction::unary(t, &arg))
        };
        let binary = |t: ActionType, prep: &str, c: &mut Self| -> Result<GroundedAction, GraphError> {
            if c.at_end() || is_separator(c.peek()) {
                return Err(GraphError::ArityMismatch { action_type: t, expected: 2, found: 0 });
            }
            let a = c.entity()?;
            c.expect(prep, t)?;
            let b = c.entity()?;
            Ok(GroundedAction::binary(t, &a, &b))
        };
        match verb.as_str() {
            "look" => Ok(GroundedAction::look()),
            "examine" => unary(ActionType::Examine, self),
            "go" => unary(ActionType::Go, self),
            "follow" => unary(ActionType::Follow, self),
            "drop" => unary(ActionType::Drop, self),
            "eat" => unary(ActionType::Eat, self),
            "drink" => unary(ActionType::Drink, self),
            "wear" => unary(ActionType::Wear, self),
            "remove" => unary(ActionType::Remove, self),
            "wield" => unary(ActionType::Wield, self),
            "unwield" => unary(ActionType::Unwield, self),
            "hit" => unary(ActionType::Hit, self),
            "put" => binary(ActionType::PutIn, "in", self),
            "give" => binary(ActionType::GiveTo, "to", self),
            "take" => binary(ActionType::TakeFrom, "from", self),
            "get" => {
                let single = unary(ActionType::Get, self)?;
                if self.peek() == Some("from") {
                    self.pos += 1;
                    let c = self.entity()?;
                    Ok(GroundedAction::binary(ActionType::GetFrom, single.arg1().unwrap(), &c))
                } else {
                    Ok(single)
                }
            }
            other => Err(GraphError::UnknownVerb { position: start, verb: other.to_string() }),
        }
    }
}

fn is_separator(token: Option<&str>) -> bool {
    matches!(token, Some(";" | ","))
}

/// Parses exactly one action. Validity against a world is checked separately
/// by `execute`.
pub fn parse_action(text: &str, catalog: &Catalog) -> Result<GroundedAction, GraphError> {
    let matcher = PhraseMatcher::new(catalog);
    parse_action_with(text, &matcher)
}

pub fn parse_action_with(text: &str, matcher: &PhraseMatcher) -> Result<GroundedAction, GraphError> {
    let tokens = tokenize(text);
    let mut cursor = Cursor { tokens: &tokens, pos: 0, matcher };
    let action = cursor.action()?;
    if !cursor.at_end() {
        return Err(GraphError::ArityMismatch {
            action_type: action.action_type,
            expected: action.action_type.arity(),
            found: action.action_type.arity() + 1,
        });
    }
    Ok(action)
}

/// Parses a run of actions, either separated by `;`/`,` or simply
/// concatenated ("get armor wear armor").
pub fn parse_action_sequence(text: &str, catalog: &Catalog) -> Result<Vec<GroundedAction>, GraphError> {
    let matcher = PhraseMatcher::new(catalog);
    let tokens = tokenize(text);
    let mut cursor = Cursor { tokens: &tokens, pos: 0, matcher: &matcher };
    let mut out = Vec::new();
    loop {
        while is_separator(cursor.peek()) {
            cursor.pos += 1;
        }
        if cursor.at_end() {
            break;
        }
        out.push(cursor.action()?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<GroundedAction, GraphError> {
        parse_action(s, &Catalog::default())
    }

    #[test]
    fn multi_word_names_bind_greedily() {
        assert_eq!(
            parse("put crossbow in treasure chest").unwrap(),
            GroundedAction::binary(ActionType::PutIn, "crossbow", "treasure chest")
        );
        assert_eq!(
            parse("take rusty sword from troll").unwrap(),
            GroundedAction::binary(ActionType::TakeFrom, "rusty sword", "troll")
        );
        assert_eq!(parse("look").unwrap(), GroundedAction::look());
    }

    #[test]
    fn aliases_and_articles() {
        assert_eq!(parse("drink beer").unwrap(), GroundedAction::unary(ActionType::Drink, "glass of beer"));
        assert_eq!(parse("get the apple").unwrap(), GroundedAction::unary(ActionType::Get, "apple"));
        assert_eq!(
            parse("get axe from the chest").unwrap(),
            GroundedAction::binary(ActionType::GetFrom, "axe", "treasure chest")
        );
    }

    #[test]
    fn errors_carry_positions() {
        assert!(matches!(parse("dance troll"), Err(GraphError::UnknownVerb { position: 0, .. })));
        assert!(matches!(parse("hit unicorn"), Err(GraphError::UnknownEntityAt { position: 1, .. })));
        assert!(matches!(parse("take rusty sword"), Err(GraphError::ArityMismatch { .. })));
        assert!(matches!(parse("look troll"), Err(GraphError::ArityMismatch { .. })));
        assert!(matches!(parse("go"), Err(GraphError::ArityMismatch { .. })));
    }

    #[test]
    fn ambiguous_alias_is_reported() {
        let mut c = Catalog::default();
        c.objects.iter_mut().find(|o| o.name == "rusty sword").unwrap().aliases.push("sword".into());
        c.objects.iter_mut().find(|o| o.name == "elven sword").unwrap().aliases.push("sword".into());
        assert!(matches!(parse_action("wield sword", &c), Err(GraphError::AmbiguousParse { .. })));
    }

    #[test]
    fn concatenated_sequences() {
        let seq = parse_action_sequence("take silver crown from troll wear silver crown", &Catalog::default()).unwrap();
        assert_eq!(
            seq,
            vec![
                GroundedAction::binary(ActionType::TakeFrom, "silver crown", "troll"),
                GroundedAction::unary(ActionType::Wear, "silver crown"),
            ]
        );
        let seq = parse_action_sequence("go cavern; get apple", &Catalog::default()).unwrap();
        assert_eq!(seq.len(), 2);
    }
}
