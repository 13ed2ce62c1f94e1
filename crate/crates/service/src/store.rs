//! On-disk layout under the data directory:
//!
//! ```text
//! manifest.json               round counter and completed-round history
//! sessions.jsonl              session events (creation and world reseeds)
//! rounds/{r}/{annotator}.jsonl  examples taught in round r
//! pools/train.jsonl, pools/test.jsonl
//! model/                      latest pooled model
//! ```
//!
//! Examples are appended and fsynced before a teach request returns; the
//! manifest, pools and model are replaced atomically by rename.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use dungeon_api::SessionMode;
use dungeon_core::data::{append_jsonl, read_jsonl, to_jsonl, Example};
use dungeon_core::models::Model;
use dungeon_core::mtd::SharedPools;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u32,
    pub submissions: BTreeMap<String, usize>,
    pub scores: BTreeMap<String, f64>,
    pub leaderboard: Vec<String>,
    pub bonus: BTreeSet<String>,
    pub excluded: BTreeSet<String>,
    pub train_pool: usize,
    pub test_pool: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub round: u32,
    pub history: Vec<RoundRecord>,
}

impl Default for Manifest {
    fn default() -> Self {
        Manifest { round: 1, history: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub session: String,
    pub annotator: String,
    pub mode: SessionMode,
    pub round: u32,
    pub seed: Option<u64>,
    pub fixture: Option<String>,
    /// Examples taught so far in this session.
    pub taught: u64,
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(tmp, path)
}

impl Store {
    pub fn new(root: impl Into<PathBuf>) -> std::io::Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Store { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn round_file(&self, round: u32, annotator: &str) -> PathBuf {
        self.root.join("rounds").join(round.to_string()).join(format!("{annotator}.jsonl"))
    }

    pub fn load_manifest(&self) -> anyhow::Result<Option<Manifest>> {
        let path = self.root.join("manifest.json");
        if !path.exists() {
            return Ok(None);
        }
        Ok(Some(serde_json::from_str(&fs::read_to_string(path)?)?))
    }

    pub fn save_manifest(&self, manifest: &Manifest) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
        write_atomic(&self.root.join("manifest.json"), text.as_bytes())
    }

    pub fn append_example(&self, example: &Example) -> anyhow::Result<()> {
        append_jsonl(&self.round_file(example.round, &example.annotator), example)?;
        Ok(())
    }

    /// Every example taught in `round`, by annotator.
    pub fn load_round(&self, round: u32) -> anyhow::Result<BTreeMap<String, Vec<Example>>> {
        let dir = self.root.join("rounds").join(round.to_string());
        let mut out = BTreeMap::new();
        if !dir.exists() {
            return Ok(out);
        }
        for entry in fs::read_dir(dir)? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "jsonl") {
                let examples = read_jsonl(&path)?;
                if let Some(first) = examples.first() {
                    out.insert(first.annotator.clone(), examples);
                }
            }
        }
        Ok(out)
    }

    pub fn save_pools(&self, pools: &SharedPools) -> std::io::Result<()> {
        write_atomic(&self.root.join("pools").join("train.jsonl"), to_jsonl(&pools.train).as_bytes())?;
        write_atomic(&self.root.join("pools").join("test.jsonl"), to_jsonl(&pools.test).as_bytes())
    }

    pub fn load_pools(&self) -> anyhow::Result<SharedPools> {
        let dir = self.root.join("pools");
        let read = |name: &str| -> anyhow::Result<Vec<Example>> {
            let p = dir.join(name);
            Ok(if p.exists() { read_jsonl(&p)? } else { Vec::new() })
        };
        Ok(SharedPools { train: read("train.jsonl")?, test: read("test.jsonl")? })
    }

    pub fn save_model(&self, model: &Model) -> anyhow::Result<()> {
        let staging = self.root.join("model.staging");
        if staging.exists() {
            fs::remove_dir_all(&staging)?;
        }
        model.save(&staging)?;
        let target = self.root.join("model");
        if target.exists() {
            fs::remove_dir_all(&target)?;
        }
        fs::rename(staging, target)?;
        Ok(())
    }

    pub fn load_model(&self) -> anyhow::Result<Option<Model>> {
        let dir = self.root.join("model");
        if !dir.join("model.json").exists() {
            return Ok(None);
        }
        Ok(Some(Model::load(&dir)?))
    }

    pub fn append_session(&self, event: &SessionEvent) -> std::io::Result<()> {
        let mut f = OpenOptions::new().create(true).append(true).open(self.root.join("sessions.jsonl"))?;
        let mut line = serde_json::to_string(event).expect("events serialize");
        line.push('\n');
        f.write_all(line.as_bytes())?;
        f.sync_all()
    }

    /// The latest event of every session, in creation order.
    pub fn load_sessions(&self) -> anyhow::Result<Vec<SessionEvent>> {
        let path = self.root.join("sessions.jsonl");
        if !path.exists() {
            return Ok(Vec::new());
        }
        let mut order = Vec::new();
        let mut latest: BTreeMap<String, SessionEvent> = BTreeMap::new();
        for line in fs::read_to_string(path)?.lines().filter(|l| !l.trim().is_empty()) {
            let event: SessionEvent = serde_json::from_str(line)?;
            if !latest.contains_key(&event.session) {
                order.push(event.session.clone());
            }
            latest.insert(event.session.clone(), event);
        }
        Ok(order.into_iter().map(|id| latest.remove(&id).expect("recorded above")).collect())
    }
}
