//! Labeled examples: a command, its gold action sequence and the world it was
//! given in. Datasets are stored as JSON lines, one example per line.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::graphworld::{execute_sequence, GroundedAction, WorldGraph};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub id: String,
    pub command: String,
    pub actions: Vec<GroundedAction>,
    pub world: WorldGraph,
    pub annotator: String,
    pub round: u32,
    /// Logical timestamp: simulations use a counter, the service wall-clock
    /// seconds.
    pub timestamp: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Example {
    /// Builds an example whose id is a content hash over everything except
    /// the timestamp. `ordinal` separates otherwise identical submissions.
    pub fn new(
        command: &str,
        actions: Vec<GroundedAction>,
        world: WorldGraph,
        annotator: &str,
        round: u32,
        ordinal: u64,
    ) -> Self {
        let mut h = Sha256::new();
        h.update(command.as_bytes());
        h.update([0]);
        h.update(serde_json::to_string(&actions).expect("actions serialize").as_bytes());
        h.update([0]);
        h.update(world.canonical_string().as_bytes());
        h.update([0]);
        h.update(annotator.as_bytes());
        h.update(round.to_le_bytes());
        h.update(ordinal.to_le_bytes());
        let digest = h.finalize();
        Example {
            id: hex::encode(&digest[..12]),
            command: command.to_string(),
            actions,
            world,
            annotator: annotator.to_string(),
            round,
            timestamp: ordinal,
        }
    }

    /// The world after running the gold sequence.
    pub fn gold_end_state(&self) -> WorldGraph {
        execute_sequence(&self.world, &self.actions).0
    }

    pub fn replays(&self) -> bool {
        execute_sequence(&self.world, &self.actions).1 == self.actions.len()
    }
}

pub fn to_jsonl(examples: &[Example]) -> String {
    let mut out = String::new();
    for e in examples {
        out.push_str(&serde_json::to_string(e).expect("examples serialize"));
        out.push('\n');
    }
    out
}

pub fn from_jsonl(text: &str) -> Result<Vec<Example>, DataError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|source| DataError::Parse { line: i + 1, source }))
        .collect()
}

pub fn read_jsonl(path: &Path) -> Result<Vec<Example>, DataError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| DataError::Parse { line: i + 1, source })?);
    }
    Ok(out)
}

pub fn write_jsonl(path: &Path, examples: &[Example]) -> Result<(), DataError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, to_jsonl(examples))?;
    Ok(())
}

/// Appends one example and fsyncs before returning.
pub fn append_jsonl(path: &Path, example: &Example) -> Result<(), DataError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    let mut line = serde_json::to_string(example).expect("examples serialize");
    line.push('\n');
    f.write_all(line.as_bytes())?;
    f.sync_all()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphworld::fixtures::walkthrough_world;
    use crate::graphworld::{parse_action_sequence, Catalog};

    fn sample(ordinal: u64) -> Example {
        let actions = parse_action_sequence("hit troll; go cavern", &Catalog::default()).unwrap();
        Example::new("kill the troll then head to the cavern", actions, walkthrough_world(), "a1", 1, ordinal)
    }

    #[test]
    fn jsonl_round_trip() {
        let examples = vec![sample(0), sample(1)];
        assert_ne!(examples[0].id, examples[1].id);
        let back = from_jsonl(&to_jsonl(&examples)).unwrap();
        assert_eq!(back, examples);
        assert!(back.iter().all(Example::replays));
    }

    #[test]
    fn append_is_readable() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r1/a1.jsonl");
        append_jsonl(&path, &sample(0)).unwrap();
        append_jsonl(&path, &sample(1)).unwrap();
        assert_eq!(read_jsonl(&path).unwrap().len(), 2);
        assert!(matches!(from_jsonl("{not json"), Err(DataError::Parse { line: 1, .. })));
    }
}
