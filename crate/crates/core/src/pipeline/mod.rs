//! Experiment configuration, run directories and the staged workflow
//! behind the `cml-lab` binary.
//!
//! A run directory holds:
//!
//! ```text
//! config.json  seeds.json           resolved config and RNG streams
//! data/                             generated dataset, when none is supplied
//! kg/transe/  kg/concept/           checkpoints of the KG models
//! embeddings.tsv  partition.json
//! study/run_NNN/                    steps.jsonl, record.json, checkpoint/
//! metrics.json  grid.csv            report and position grid
//! task_similarity.csv  task_difficulty.csv
//! ```

pub mod config;
pub mod dataset;
pub mod merge;
pub mod rundir;
pub mod stages;

use std::path::{Path, PathBuf};

pub use config::{ExperimentConfig, Overrides, PartitionMode, Paths, StudyConfig};
pub use dataset::{load_dataset, load_kg, write_synthetic};
pub use merge::{load_report, merge_reports, mismatched_keys, ComparisonTables, MERGE_IGNORED_KEYS};
pub use rundir::{RunDirectory, SeedManifest};
pub use stages::{format_plan, Pipeline, PlannedStage, Stage, StageAction};

use crate::error::Result;
use crate::eval::MetricsReport;

/// Writes the synthetic dataset described by `config` to `out`.
pub fn cmd_synth(config: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    config.synth.validate()?;
    write_synthetic(&config.synth, config.base_seed, rundir::SYNTH_STREAM, out)
}

/// Runs every stage into the run directory `out`.
pub fn cmd_pipeline(config: &ExperimentConfig, out: &Path) -> Result<MetricsReport> {
    Pipeline::open(config.clone(), out)?.run()
}

/// Merges finished run directories into comparison tables written to `out`.
pub fn cmd_report(run_dirs: &[PathBuf], out: &Path) -> Result<(ComparisonTables, Vec<PathBuf>)> {
    let reports = run_dirs.iter().map(|d| load_report(d)).collect::<Result<Vec<_>>>()?;
    let tables = merge_reports(&reports)?;
    let files = tables.write(out)?;
    Ok((tables, files))
}
