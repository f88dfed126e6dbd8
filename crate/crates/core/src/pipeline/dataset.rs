//! On-disk dataset layout:
//!
//! ```text
//! train.jsonl  test.jsonl  tasks.json
//! kg/triples.tsv  kg/concepts.tsv
//! similarity.csv   designed relation similarity (synthetic data only)
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::datasets::io::{matrix_csv, write_text};
use crate::datasets::{build_tasks, generate_synthetic, load_jsonl, load_partition, write_jsonl, write_partition};
use crate::datasets::{Benchmark, Instance, SynthConfig};
use crate::error::Result;
use crate::kgembed::KnowledgeGraph;
use crate::numerics::Rng;

pub fn train_path(dir: &Path) -> PathBuf {
    dir.join("train.jsonl")
}

pub fn test_path(dir: &Path) -> PathBuf {
    dir.join("test.jsonl")
}

pub fn tasks_path(dir: &Path) -> PathBuf {
    dir.join("tasks.json")
}

pub fn triples_path(kg_dir: &Path) -> PathBuf {
    kg_dir.join("triples.tsv")
}

pub fn concepts_path(kg_dir: &Path) -> PathBuf {
    kg_dir.join("concepts.tsv")
}

/// Generates the synthetic benchmark from `(seed, stream)` and writes it to
/// `dir`. Returns the written file paths.
pub fn write_synthetic(config: &SynthConfig, seed: u64, stream: u64, dir: &Path) -> Result<Vec<PathBuf>> {
    let out = generate_synthetic(config, &mut Rng::new(seed, stream))?;
    let train: Vec<Instance> = out.benchmark.tasks.iter().flat_map(|t| t.train.iter().cloned()).collect();
    let test: Vec<Instance> = out.benchmark.tasks.iter().flat_map(|t| t.test.iter().cloned()).collect();
    let groups: Vec<Vec<String>> = out.benchmark.tasks.iter().map(|t| t.relations.clone()).collect();
    let kg_dir = dir.join("kg");
    let files = vec![
        train_path(dir),
        test_path(dir),
        tasks_path(dir),
        triples_path(&kg_dir),
        concepts_path(&kg_dir),
        dir.join("similarity.csv"),
    ];
    write_jsonl(&files[0], &train)?;
    write_jsonl(&files[1], &test)?;
    write_partition(&files[2], &groups)?;
    out.kg.write_tsv(&files[3], &files[4])?;
    write_text(&files[5], &matrix_csv(&out.relations, &out.ground_truth))?;
    Ok(files)
}

pub fn load_dataset(dir: &Path) -> Result<Benchmark> {
    let train = load_jsonl(&train_path(dir))?;
    let test = load_jsonl(&test_path(dir))?;
    let groups = load_partition(&tasks_path(dir))?;
    build_tasks(&groups, &train, &test, BTreeMap::new())
}

pub fn load_kg(kg_dir: &Path) -> Result<KnowledgeGraph> {
    KnowledgeGraph::load_tsv(&triples_path(kg_dir), &concepts_path(kg_dir))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_roundtrip() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = SynthConfig { tasks: 2, relations_per_task: 2, train_per_relation: 5, test_per_relation: 3, ..SynthConfig::default() };
        let files = write_synthetic(&cfg, 4, 0, tmp.path()).unwrap();
        assert!(files.iter().all(|f| f.exists()));
        let b = load_dataset(tmp.path()).unwrap();
        let direct = generate_synthetic(&cfg, &mut Rng::new(4, 0)).unwrap().benchmark;
        assert_eq!(b.tasks, direct.tasks);
        let kg = load_kg(&tmp.path().join("kg")).unwrap();
        assert_eq!(kg.num_relations(), 4);
    }
}
