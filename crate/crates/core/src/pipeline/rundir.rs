use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::datasets::io::{read_text, write_text};
use crate::error::{Error, Result};
use crate::eval::RUN_STREAM_BASE;

pub const SYNTH_STREAM: u64 = 0;
pub const TRANSE_STREAM: u64 = 1;
pub const CONCEPT_STREAM: u64 = 2;
pub const PARTITION_STREAM: u64 = 3;
pub const INIT_STREAM: u64 = 4;
pub const ORDER_STREAM: u64 = RUN_STREAM_BASE - 1;

/// Every RNG stream a run directory draws from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedManifest {
    pub base_seed: u64,
    pub streams: BTreeMap<String, u64>,
    /// Run `i` uses stream `run_stream_base + i`.
    pub run_stream_base: u64,
}

impl SeedManifest {
    pub fn new(base_seed: u64) -> Self {
        let streams = [
            ("synth", SYNTH_STREAM),
            ("transe", TRANSE_STREAM),
            ("concept", CONCEPT_STREAM),
            ("partition", PARTITION_STREAM),
            ("init", INIT_STREAM),
            ("orders", ORDER_STREAM),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        Self {
            base_seed,
            streams,
            run_stream_base: RUN_STREAM_BASE,
        }
    }
}

/// Layout of one experiment's artifacts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunDirectory {
    root: PathBuf,
}

impl RunDirectory {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    /// Creates the directory and pins `config` to it. An existing directory
    /// must hold the same config up to execution settings.
    pub fn open(root: impl Into<PathBuf>, config: &ExperimentConfig) -> Result<Self> {
        let dir = Self::new(root);
        fs::create_dir_all(&dir.root).map_err(|e| Error::io(&dir.root, e))?;
        let path = dir.config_path();
        if path.exists() {
            let stored = ExperimentConfig::from_json(&read_text(&path)?)?;
            if stored.experiment_value()? != config.experiment_value()? {
                return Err(Error::Config(format!(
                    "{} was created with a different config",
                    dir.root.display()
                )));
            }
        } else {
            write_text(&path, &config.to_json()?)?;
        }
        let seeds = serde_json::to_string_pretty(&SeedManifest::new(config.base_seed))? + "\n";
        write_text(&dir.seeds_path(), &seeds)?;
        Ok(dir)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn config_path(&self) -> PathBuf {
        self.root.join("config.json")
    }

    pub fn seeds_path(&self) -> PathBuf {
        self.root.join("seeds.json")
    }

    pub fn data_dir(&self) -> PathBuf {
        self.root.join("data")
    }

    pub fn transe_dir(&self) -> PathBuf {
        self.root.join("kg").join("transe")
    }

    pub fn concept_dir(&self) -> PathBuf {
        self.root.join("kg").join("concept")
    }

    pub fn kg_trace_path(&self) -> PathBuf {
        self.root.join("kg").join("loss_trace.json")
    }

    pub fn embeddings_path(&self) -> PathBuf {
        self.root.join("embeddings.tsv")
    }

    pub fn partition_path(&self) -> PathBuf {
        self.root.join("partition.json")
    }

    pub fn run_dir(&self, run_id: usize) -> PathBuf {
        self.root.join("study").join(format!("run_{run_id:03}"))
    }

    pub fn train_dir(&self) -> PathBuf {
        self.root.join("train")
    }

    pub fn metrics_path(&self) -> PathBuf {
        self.root.join("metrics.json")
    }

    pub fn grid_path(&self) -> PathBuf {
        self.root.join("grid.csv")
    }

    pub fn similarity_path(&self) -> PathBuf {
        self.root.join("task_similarity.csv")
    }

    pub fn difficulty_path(&self) -> PathBuf {
        self.root.join("task_difficulty.csv")
    }
}
