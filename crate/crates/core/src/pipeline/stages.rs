use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::{ExperimentConfig, PartitionMode};
use super::dataset::{load_dataset, load_kg, write_synthetic};
use super::rundir::*;
use crate::curriculum::{DifficultyScores, EmbeddingTable, SimilarityMatrix};
use crate::datasets::io::{read_text, write_text};
use crate::datasets::{
    load_partition, load_relation_vectors, partition_kmeans, partition_random, relation_name_vectors, write_partition,
    Benchmark, RunOrder,
};
use crate::error::{Error, Result};
use crate::eval::{
    difficulty_correlation, study_orders, MetricsReport, PermutationStudy, RunRecord, RUN_STREAM_BASE,
};
use crate::eval::report::position_grid_csv;
use crate::kgembed::{
    export_relation_embeddings, load_relation_embeddings, train_concept_model, train_transe, write_relation_embeddings,
    TransEModel,
};
use crate::learner::{train_sequence, ExtractorModel};
use crate::numerics::{load_checkpoint, save_checkpoint, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Synth,
    PretrainKg,
    EmbedRelations,
    Partition,
    Study,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Synth,
        Stage::PretrainKg,
        Stage::EmbedRelations,
        Stage::Partition,
        Stage::Study,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::PretrainKg => "pretrain-kg",
            Stage::EmbedRelations => "embed-relations",
            Stage::Partition => "partition",
            Stage::Study => "study",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StageAction {
    Run,
    /// Artifacts already present.
    Reuse,
    Skip(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlannedStage {
    pub stage: Stage,
    pub action: StageAction,
}

pub fn format_plan(plan: &[PlannedStage]) -> String {
    let mut out = String::new();
    for (i, p) in plan.iter().enumerate() {
        let what = match &p.action {
            StageAction::Run => "run".to_string(),
            StageAction::Reuse => "reuse existing artifacts".to_string(),
            StageAction::Skip(why) => format!("skip ({why})"),
        };
        out.push_str(&format!("{}. {:<16} {what}\n", i + 1, p.stage.name()));
    }
    out
}

fn at(stage: Stage) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::Stage { .. } => e,
        e => Error::Stage {
            stage: stage.name().into(),
            source: Box::new(e),
        },
    }
}

/// Writes `text` to `path` unless the file already holds exactly that.
fn write_if_changed(path: &Path, text: &str) -> Result<()> {
    if read_text(path).ok().as_deref() == Some(text) {
        return Ok(());
    }
    write_text(path, text)
}

pub struct Pipeline {
    pub config: ExperimentConfig,
    pub dir: RunDirectory,
}

impl Pipeline {
    pub fn open(config: ExperimentConfig, root: impl Into<PathBuf>) -> Result<Self> {
        config.validate()?;
        let dir = RunDirectory::open(root, &config)?;
        Ok(Self { config, dir })
    }

    pub fn data_dir(&self) -> PathBuf {
        self.config.paths.data.clone().unwrap_or_else(|| self.dir.data_dir())
    }

    pub fn kg_dir(&self) -> PathBuf {
        self.config.paths.kg.clone().unwrap_or_else(|| self.data_dir().join("kg"))
    }

    pub fn embeddings_path(&self) -> Option<PathBuf> {
        if let Some(p) = &self.config.paths.embeddings {
            return Some(p.clone());
        }
        self.config.needs_kg().then(|| self.dir.embeddings_path())
    }

    fn done(&self, stage: Stage) -> bool {
        let d = &self.dir;
        match stage {
            Stage::Synth => d.data_dir().join("tasks.json").exists(),
            Stage::PretrainKg => d.transe_dir().join("manifest.json").exists(),
            Stage::EmbedRelations => d.embeddings_path().exists(),
            Stage::Partition => d.partition_path().exists(),
            Stage::Study => self.study_orders().is_ok_and(|o| (0..o.len()).all(|i| self.record_path(i).exists())),
            Stage::Report => d.metrics_path().exists(),
        }
    }

    /// What running through `last` would do.
    pub fn plan(&self, last: Stage) -> Vec<PlannedStage> {
        Stage::ALL
            .iter()
            .filter(|s| **s <= last)
            .map(|&stage| {
                let skip = match stage {
                    Stage::Synth if self.config.paths.data.is_some() => Some("dataset supplied".to_string()),
                    Stage::PretrainKg | Stage::EmbedRelations if self.config.paths.embeddings.is_some() => {
                        Some("embeddings supplied".to_string())
                    }
                    Stage::PretrainKg | Stage::EmbedRelations if !self.config.needs_kg() => {
                        Some(format!("not needed by {}", self.config.strategy()))
                    }
                    _ => None,
                };
                let action = match skip {
                    Some(why) => StageAction::Skip(why),
                    None if self.done(stage) => StageAction::Reuse,
                    None => StageAction::Run,
                };
                PlannedStage { stage, action }
            })
            .collect()
    }

    fn record_path(&self, run_id: usize) -> PathBuf {
        self.dir.run_dir(run_id).join("record.json")
    }

    fn study_orders(&self) -> Result<Vec<RunOrder>> {
        let mut rng = Rng::new(self.config.base_seed, ORDER_STREAM);
        study_orders(self.config.study.mode, &self.config.base_order(), self.config.study.samples, &mut rng)
    }

    fn synth(&self) -> Result<()> {
        if self.config.paths.data.is_none() && !self.done(Stage::Synth) {
            write_synthetic(&self.config.synth, self.config.base_seed, SYNTH_STREAM, &self.dir.data_dir())?;
        }
        Ok(())
    }

    fn pretrain_kg(&self) -> Result<()> {
        if self.done(Stage::PretrainKg) {
            return Ok(());
        }
        let kg = load_kg(&self.kg_dir())?;
        let trained = train_transe(&kg, &self.config.transe, &mut Rng::new(self.config.base_seed, TRANSE_STREAM))?;
        write_text(&self.dir.kg_trace_path(), &(serde_json::to_string(&trained.loss_trace)? + "\n"))?;
        save_checkpoint(&trained.model, &self.dir.transe_dir())
    }

    fn load_transe(&self) -> Result<TransEModel> {
        let kg = load_kg(&self.kg_dir())?;
        let mut m = TransEModel::init(kg.num_entities(), kg.num_relations(), &self.config.transe, &mut Rng::new(0, 0));
        load_checkpoint(&mut m, &self.dir.transe_dir())?;
        Ok(m)
    }

    fn embed_relations(&self) -> Result<()> {
        if self.done(Stage::EmbedRelations) {
            return Ok(());
        }
        let kg = load_kg(&self.kg_dir())?;
        let transe = self.load_transe()?;
        let mut rng = Rng::new(self.config.base_seed, CONCEPT_STREAM);
        let trained = train_concept_model(&kg, &self.config.concept, Some(&transe), &mut rng)?;
        save_checkpoint(&trained.model, &self.dir.concept_dir())?;
        let emb = export_relation_embeddings(&trained.model, self.config.concept.extraction)?;
        write_relation_embeddings(&self.dir.embeddings_path(), &emb)
    }

    fn embedding_table(&self) -> Result<Option<EmbeddingTable>> {
        self.embeddings_path()
            .map(|p| Ok(EmbeddingTable::from_relation_embeddings(&load_relation_embeddings(&p)?)))
            .transpose()
    }

    fn partition(&self) -> Result<Benchmark> {
        let data = load_dataset(&self.data_dir())?;
        if !self.done(Stage::Partition) {
            let k = self.config.num_tasks;
            let mut rng = Rng::new(self.config.base_seed, PARTITION_STREAM);
            let groups = match self.config.partition {
                PartitionMode::Given => {
                    if data.num_tasks() != k {
                        return Err(Error::Config(format!(
                            "dataset has {} tasks but num_tasks is {k}",
                            data.num_tasks()
                        )));
                    }
                    data.tasks.iter().map(|t| t.relations.clone()).collect()
                }
                PartitionMode::Random => partition_random(&data.relations(), k, &mut rng)?,
                PartitionMode::Cluster => {
                    let vectors = match &self.config.paths.relation_vectors {
                        Some(p) => load_relation_vectors(p)?,
                        None => {
                            let names: Vec<(String, Vec<String>)> = data
                                .relations()
                                .into_iter()
                                .map(|r| {
                                    let t = data.relation_names[&r].clone();
                                    (r, t)
                                })
                                .collect();
                            relation_name_vectors(&names, self.config.name_vector_dim, self.config.base_seed)
                        }
                    };
                    partition_kmeans(&vectors, k, &mut rng)?
                }
            };
            write_partition(&self.dir.partition_path(), &groups)?;
        }
        let groups = load_partition(&self.dir.partition_path())?;
        data.regroup(&groups)
    }

    fn init_model(&self, benchmark: &Benchmark) -> Result<ExtractorModel> {
        ExtractorModel::new(benchmark, &self.config.train.model, &mut Rng::new(self.config.base_seed, INIT_STREAM))
    }

    fn train_run(
        &self,
        benchmark: &Benchmark,
        table: Option<&EmbeddingTable>,
        init: &ExtractorModel,
        run_id: usize,
        order: &RunOrder,
        dir: &Path,
    ) -> Result<RunRecord> {
        let mut rng = Rng::new(self.config.base_seed, RUN_STREAM_BASE + run_id as u64);
        let (record, state) = train_sequence(benchmark, order, &self.config.train, table, init, run_id, &mut rng)?;
        let mut log = String::new();
        for s in &record.steps {
            log.push_str(&serde_json::to_string(s)?);
            log.push('\n');
        }
        write_text(&dir.join("steps.jsonl"), &log)?;
        save_checkpoint(&state.model, &dir.join("checkpoint"))?;
        if !state.warnings.is_empty() {
            write_text(&dir.join("warnings.txt"), &(state.warnings.join("\n") + "\n"))?;
        }
        write_text(&dir.join("record.json"), &(serde_json::to_string_pretty(&record)? + "\n"))?;
        Ok(record)
    }

    fn load_record(path: &Path) -> Result<RunRecord> {
        Ok(serde_json::from_str(&read_text(path)?)?)
    }

    fn study(&self, benchmark: &Benchmark, table: Option<&EmbeddingTable>) -> Result<PermutationStudy> {
        let orders = self.study_orders()?;
        let missing: Vec<usize> = (0..orders.len()).filter(|&i| !self.record_path(i).exists()).collect();
        if !missing.is_empty() {
            let init = self.init_model(benchmark)?;
            let run = |&i: &usize| -> Result<()> {
                self.train_run(benchmark, table, &init, i, &orders[i], &self.dir.run_dir(i)).map(|_| ())
            };
            if self.config.workers <= 1 {
                missing.iter().try_for_each(run)?;
            } else {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(self.config.workers)
                    .build()
                    .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
                pool.install(|| missing.par_iter().try_for_each(run))?;
            }
        }
        // Records are always read back so fresh and resumed runs report the
        // same values.
        let records = (0..orders.len()).map(|i| Self::load_record(&self.record_path(i))).collect::<Result<Vec<_>>>()?;
        PermutationStudy::new(self.config.study.mode, benchmark.num_tasks(), records)
    }

    fn report(&self, benchmark: &Benchmark, table: Option<&EmbeddingTable>, study: &PermutationStudy) -> Result<MetricsReport> {
        let path = self.dir.metrics_path();
        if path.exists() {
            return MetricsReport::from_json(&read_text(&path)?);
        }
        let correlation = match table {
            Some(t) if benchmark.num_tasks() >= 2 => {
                let groups: Vec<Vec<String>> = benchmark.tasks.iter().map(|t| t.relations.clone()).collect();
                write_if_changed(&self.dir.similarity_path(), &SimilarityMatrix::of_tasks(&groups, t)?.to_csv())?;
                write_if_changed(&self.dir.difficulty_path(), &DifficultyScores::compute(&groups, t)?.to_csv())?;
                Some(difficulty_correlation(benchmark, study, t)?)
            }
            _ => None,
        };
        let report = MetricsReport::build(
            self.config.strategy().name(),
            study,
            self.config.confidence,
            correlation.as_ref(),
            self.config.experiment_value()?,
            serde_json::to_value(SeedManifest::new(self.config.base_seed))?,
        )?;
        write_text(&self.dir.grid_path(), &position_grid_csv(&report))?;
        write_text(&path, &report.to_canonical_json()?)?;
        Ok(report)
    }

    /// Runs the stages up to the one that produces the benchmark and
    /// embeddings.
    fn prepare(&self, last: Stage) -> Result<(Option<Benchmark>, Option<EmbeddingTable>)> {
        self.synth().map_err(at(Stage::Synth))?;
        if last >= Stage::PretrainKg && self.config.needs_kg() {
            self.pretrain_kg().map_err(at(Stage::PretrainKg))?;
        }
        if last >= Stage::EmbedRelations && self.config.needs_kg() {
            self.embed_relations().map_err(at(Stage::EmbedRelations))?;
        }
        if last < Stage::Partition {
            return Ok((None, None));
        }
        let bench = self.partition().map_err(at(Stage::Partition))?;
        let table = self.embedding_table().map_err(at(Stage::EmbedRelations))?;
        Ok((Some(bench), table))
    }

    /// Runs every stage through `last`, reusing finished artifacts. Returns
    /// the report when `last` is [`Stage::Report`].
    pub fn run_until(&self, last: Stage) -> Result<Option<MetricsReport>> {
        let (bench, table) = self.prepare(last)?;
        let Some(bench) = bench else {
            return Ok(None);
        };
        if last < Stage::Study {
            return Ok(None);
        }
        let study = self.study(&bench, table.as_ref()).map_err(at(Stage::Study))?;
        if last < Stage::Report {
            return Ok(None);
        }
        self.report(&bench, table.as_ref(), &study).map(Some).map_err(at(Stage::Report))
    }

    pub fn run(&self) -> Result<MetricsReport> {
        Ok(self.run_until(Stage::Report)?.expect("report stage returns a report"))
    }

    /// One training run over the base order, stored under `train/`.
    pub fn train_single(&self) -> Result<RunRecord> {
        let (bench, table) = self.prepare(Stage::Partition)?;
        let bench = bench.expect("partition stage yields a benchmark");
        let path = self.dir.train_dir().join("record.json");
        if path.exists() {
            return Self::load_record(&path);
        }
        let order = RunOrder::new(self.config.base_order())?;
        let init = self.init_model(&bench)?;
        self.train_run(&bench, table.as_ref(), &init, 0, &order, &self.dir.train_dir())
            .map_err(at(Stage::Study))?;
        Self::load_record(&path)
    }
}

