use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::datasets::{RunOrder, SynthConfig};
use crate::error::{Error, Result};
use crate::eval::StudyMode;
use crate::kgembed::{ConceptConfig, TransEConfig};
use crate::learner::{Strategy, TrainConfig};

/// How relations are grouped into tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionMode {
    /// Keep the tasks stored with the dataset.
    #[default]
    Given,
    /// k-means over relation-name vectors.
    Cluster,
    Random,
}

impl PartitionMode {
    pub fn name(self) -> &'static str {
        match self {
            PartitionMode::Given => "given",
            PartitionMode::Cluster => "cluster",
            PartitionMode::Random => "random",
        }
    }
}

impl fmt::Display for PartitionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PartitionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "given" => Ok(PartitionMode::Given),
            "cluster" => Ok(PartitionMode::Cluster),
            "random" => Ok(PartitionMode::Random),
            _ => Err(Error::Config(format!("unknown partition mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Dataset directory as written by `synth`. Generated into the run
    /// directory when absent.
    pub data: Option<PathBuf>,
    /// Directory with `triples.tsv` and `concepts.tsv`; defaults to the
    /// dataset's `kg/`.
    pub kg: Option<PathBuf>,
    /// Precomputed relation embeddings; skips the KG stages.
    pub embeddings: Option<PathBuf>,
    /// Relation-name vectors for cluster partitioning.
    pub relation_vectors: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub mode: StudyMode,
    /// Orders drawn in Monte Carlo mode.
    pub samples: usize,
    /// Base order of the study; identity when absent.
    pub base_order: Option<Vec<usize>>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            mode: StudyMode::Cyclic,
            samples: 10,
            base_order: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub base_seed: u64,
    /// Number of tasks K.
    pub num_tasks: usize,
    pub partition: PartitionMode,
    pub confidence: f64,
    /// Parallel study runs.
    pub workers: usize,
    /// Dimension of generated relation-name vectors.
    pub name_vector_dim: usize,
    pub study: StudyConfig,
    pub paths: Paths,
    pub synth: SynthConfig,
    pub transe: TransEConfig,
    pub concept: ConceptConfig,
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            base_seed: 0,
            num_tasks: 5,
            partition: PartitionMode::Given,
            confidence: 0.95,
            workers: 1,
            name_vector_dim: 50,
            study: StudyConfig::default(),
            paths: Paths::default(),
            synth: SynthConfig::default(),
            transe: TransEConfig::default(),
            concept: ConceptConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.num_tasks == 0 {
            return bad("num_tasks must be positive".into());
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return bad(format!("confidence must be in (0, 1), got {}", self.confidence));
        }
        if self.workers == 0 {
            return bad("workers must be positive".into());
        }
        if self.name_vector_dim == 0 {
            return bad("name_vector_dim must be positive".into());
        }
        if self.study.mode == StudyMode::MonteCarlo && self.study.samples == 0 {
            return bad("monte carlo study needs samples > 0".into());
        }
        if let Some(order) = &self.study.base_order {
            if order.len() != self.num_tasks {
                return bad(format!("base_order has {} tasks, num_tasks is {}", order.len(), self.num_tasks));
            }
            RunOrder::new(order.clone()).map_err(|e| Error::Config(format!("base_order: {e}")))?;
        }
        if self.paths.data.is_none() {
            self.synth.validate().map_err(|e| Error::Config(format!("synth: {e}")))?;
            if self.partition == PartitionMode::Given && self.synth.tasks != self.num_tasks {
                return bad(format!(
                    "synth.tasks is {} but num_tasks is {}",
                    self.synth.tasks, self.num_tasks
                ));
            }
        }
        if self.transe.dim == 0 || self.transe.epochs == 0 || self.transe.batch_size == 0 {
            return bad("transe dim, epochs and batch_size must be positive".into());
        }
        if self.concept.d1 == 0 || self.concept.d2 == 0 || self.concept.batch_size == 0 {
            return bad("concept d1, d2 and batch_size must be positive".into());
        }
        self.train.validate()
    }

    pub fn strategy(&self) -> Strategy {
        self.train.strategy
    }

    /// Whether the KG stages run: everything but vanilla needs relation
    /// embeddings, unless they are supplied.
    pub fn needs_kg(&self) -> bool {
        self.train.strategy != Strategy::Vanilla && self.paths.embeddings.is_none()
    }

    pub fn base_order(&self) -> Vec<usize> {
        self.study.base_order.clone().unwrap_or_else(|| (0..self.num_tasks).collect())
    }

    /// The config without execution settings (`workers`, `paths.out`),
    /// as embedded in reports and compared when reopening a run directory.
    pub fn experiment_value(&self) -> Result<serde_json::Value> {
        let mut v = serde_json::to_value(self)?;
        if let Some(map) = v.as_object_mut() {
            map.remove("workers");
            if let Some(paths) = map.get_mut("paths").and_then(|p| p.as_object_mut()) {
                paths.remove("out");
            }
        }
        Ok(v)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub strategy: Option<Strategy>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, config: &mut ExperimentConfig) {
        if let Some(s) = self.seed {
            config.base_seed = s;
        }
        if let Some(s) = self.strategy {
            config.train.strategy = s;
        }
        if let Some(w) = self.workers {
            config.workers = w;
        }
        if let Some(o) = &self.out {
            config.paths.out = Some(o.clone());
        }
    }
}
