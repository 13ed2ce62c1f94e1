use std::path::{Path, PathBuf};

use dungeon_core::models::{Hyperparameters, ModelConfig, ModelFamily};
use dungeon_core::mtd::{CollectionMode, MtdConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub port: u16,
    pub data_dir: PathBuf,
    pub admin_token: String,
    /// Seeds session worlds and the round merges.
    pub seed: u64,
    /// Pilot examples used to initialize empty pools on first start.
    pub pilot_count: usize,
    /// Close intake once a round has been open this long.
    pub enforce_deadline: bool,
    pub catalog: Option<PathBuf>,
    pub templates: Option<PathBuf>,
    pub mtd: MtdConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            port: 8080,
            data_dir: PathBuf::from("data"),
            admin_token: "change-me".to_string(),
            seed: 0,
            pilot_count: 0,
            enforce_deadline: true,
            catalog: None,
            templates: None,
            mtd: MtdConfig {
                collection: CollectionMode::TimeBudget,
                learner: ModelConfig::new(ModelFamily::AcSeq2seq, Hyperparameters::small()),
                scoring_epochs: Some(15),
                ..MtdConfig::default()
            },
        }
    }
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Defaults, then the optional config file, then `PORT`, `DATA_DIR` and
    /// `ADMIN_TOKEN` from the environment.
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let mut config = match path {
            Some(p) => Self::from_toml(&std::fs::read_to_string(p)?)?,
            None => Self::default(),
        };
        if let Ok(port) = std::env::var("PORT") {
            config.port = port.parse()?;
        }
        if let Ok(dir) = std::env::var("DATA_DIR") {
            config.data_dir = dir.into();
        }
        if let Ok(token) = std::env::var("ADMIN_TOKEN") {
            config.admin_token = token;
        }
        Ok(config)
    }
}
