use std::collections::BTreeMap;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::model::{merge_optimizer_state, reptile_aggregate, ExtractorModel, ModelConfig};
use crate::curriculum::{build_curriculum, Curriculum, EmbeddingTable, SortOrder};
use crate::datasets::{memory_select, Benchmark, Instance, MemoryBuffer, RunOrder, SelectionStrategy};
use crate::error::{Error, Result};
use crate::eval::{accuracy, average_accuracy, RunRecord, StepLog};
use crate::numerics::{Adam, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    #[default]
    Cml,
    Vanilla,
    Replay,
    MetaNoncurriculum,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Cml, Strategy::Vanilla, Strategy::Replay, Strategy::MetaNoncurriculum];

    pub fn name(self) -> &'static str {
        match self {
            Self::Cml => "cml",
            Self::Vanilla => "vanilla",
            Self::Replay => "replay",
            Self::MetaNoncurriculum => "meta_noncurriculum",
        }
    }

    pub fn uses_memory(self) -> bool {
        self != Self::Vanilla
    }

    pub fn uses_embeddings(self) -> bool {
        self == Self::Cml
    }

    fn is_meta(self) -> bool {
        matches!(self, Self::Cml | Self::MetaNoncurriculum)
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Argument(format!("unknown strategy `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub strategy: Strategy,
    pub epochs: usize,
    pub lr: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub curriculum_k: usize,
    pub curriculum_n: usize,
    /// Mini-batch size over the curriculum sequence; `n` when unset, so each
    /// batch holds one curriculum relation.
    pub curriculum_batch_size: Option<usize>,
    pub sort_order: SortOrder,
    pub memory_per_task: usize,
    /// Add the memory to every task's training data.
    pub memory_union: bool,
    pub selection: SelectionStrategy,
    pub finetune_epochs: usize,
    /// Carry the adapted copies' mean Adam moments into the meta parameters.
    pub merge_optimizer_state: bool,
    pub model: ModelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Cml,
            epochs: 3,
            lr: 2e-3,
            epsilon: 0.4,
            batch_size: 50,
            curriculum_k: 4,
            curriculum_n: 20,
            curriculum_batch_size: None,
            sort_order: SortOrder::Ascending,
            memory_per_task: 50,
            memory_union: true,
            selection: SelectionStrategy::Centroid,
            finetune_epochs: 1,
            merge_optimizer_state: true,
            model: ModelConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::Config(format!("epsilon must be in (0, 1], got {}", self.epsilon)));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be positive".into()));
        }
        if self.curriculum_k == 0 || self.curriculum_n == 0 || self.curriculum_batch_size == Some(0) {
            return Err(Error::Config("curriculum k, n and batch size must be positive".into()));
        }
        self.model.validate()
    }

    fn curriculum_order(&self) -> SortOrder {
        match self.strategy {
            Strategy::MetaNoncurriculum => SortOrder::Shuffled,
            _ => self.sort_order,
        }
    }
}

/// Learner state carried across the tasks of one run.
#[derive(Debug, Clone)]
pub struct RunState {
    pub model: ExtractorModel,
    pub memory: MemoryBuffer,
    pub logs: Vec<StepLog>,
    pub trained: Vec<usize>,
    pub warnings: Vec<String>,
}

impl RunState {
    pub fn new(model: ExtractorModel, config: &TrainConfig) -> Self {
        Self {
            model,
            memory: MemoryBuffer::new(config.memory_per_task),
            logs: Vec::new(),
            trained: Vec::new(),
            warnings: Vec::new(),
        }
    }
}

/// `base` followed by any batch relation not already present.
fn candidates_for(base: &[String], batch: &[Instance]) -> Vec<String> {
    let mut out = base.to_vec();
    for inst in batch {
        if !out.contains(&inst.relation) {
            out.push(inst.relation.clone());
        }
    }
    out
}

fn train_batches(
    model: &mut ExtractorModel,
    data: &[Instance],
    batch_size: usize,
    base_candidates: &[String],
    adam: &Adam,
) -> Result<f64> {
    let mut total = 0.0;
    for batch in data.chunks(batch_size.max(1)) {
        let cands = candidates_for(base_candidates, batch);
        total += model.loss_backward(batch, &cands, 1.0 / batch.len() as f64)?;
        adam.step(model)?;
    }
    Ok(total)
}

/// One adaptation pass for relation `relation` starting from `theta`: the
/// curriculum's batches first (when given), then the relation's data.
#[allow(clippy::too_many_arguments)]
pub fn inner_adapt_relation(
    theta: &ExtractorModel,
    relation_data: &[Instance],
    curriculum: Option<&Curriculum>,
    task_relations: &[String],
    config: &TrainConfig,
    rng: &mut Rng,
) -> Result<ExtractorModel> {
    let adam = Adam::new(config.lr);
    let mut adapted = theta.clone();
    if let Some(c) = curriculum {
        let bs = config.curriculum_batch_size.unwrap_or(config.curriculum_n);
        for batch in c.batches(bs) {
            let cands = candidates_for(task_relations, batch);
            adapted.loss_backward(batch, &cands, 1.0 / batch.len() as f64)?;
            adam.step(&mut adapted)?;
        }
    }
    let mut data = relation_data.to_vec();
    data.shuffle(rng);
    train_batches(&mut adapted, &data, config.batch_size, task_relations, &adam)?;
    Ok(adapted)
}

/// Deals the shuffled memory round-robin into `n` shares.
fn memory_shares(memory: &MemoryBuffer, n: usize, rng: &mut Rng) -> Vec<Vec<Instance>> {
    let mut all: Vec<Instance> = memory.contents().into_iter().cloned().collect();
    all.shuffle(rng);
    let mut shares = vec![Vec::new(); n];
    for (i, inst) in all.into_iter().enumerate() {
        shares[i % n].push(inst);
    }
    shares
}

fn finetune_on_memory(state: &mut RunState, config: &TrainConfig, rng: &mut Rng) -> Result<()> {
    if state.memory.is_empty() {
        return Ok(());
    }
    let adam = Adam::new(config.lr);
    let cands: Vec<String> = state.memory.relations().to_vec();
    for _ in 0..config.finetune_epochs {
        let mut data: Vec<Instance> = state.memory.contents().into_iter().cloned().collect();
        data.shuffle(rng);
        train_batches(&mut state.model, &data, config.batch_size, &cands, &adam)?;
    }
    Ok(())
}

/// Per-task accuracies over every trained task, with all relations seen so
/// far as candidates.
pub fn evaluate_seen(model: &ExtractorModel, benchmark: &Benchmark, trained: &[usize]) -> Result<(BTreeMap<usize, f64>, f64, f64)> {
    let seen: Vec<String> = trained
        .iter()
        .flat_map(|&t| benchmark.tasks[t].relations.iter().cloned())
        .collect();
    let mut per_task = BTreeMap::new();
    let mut correct = 0.0;
    let mut total = 0usize;
    for &t in trained {
        let test = &benchmark.tasks[t].test;
        let acc = accuracy(model, test, &seen)?;
        correct += acc * test.len() as f64;
        total += test.len();
        per_task.insert(t, acc);
    }
    let accs: Vec<f64> = trained.iter().map(|t| per_task[t]).collect();
    Ok((per_task, average_accuracy(&accs)?, correct / total as f64))
}

/// Trains task `task_idx` of `benchmark` into `state`.
pub fn train_task(
    state: &mut RunState,
    benchmark: &Benchmark,
    task_idx: usize,
    config: &TrainConfig,
    embeddings: Option<&EmbeddingTable>,
    rng: &mut Rng,
) -> Result<()> {
    let task = benchmark
        .tasks
        .get(task_idx)
        .ok_or(Error::IndexOutOfRange { index: task_idx, len: benchmark.num_tasks() })?;
    if state.trained.contains(&task_idx) {
        return Err(Error::Precondition(format!("task {task_idx} was already trained")));
    }
    let strategy = config.strategy;
    let first = state.memory.is_empty();
    let union = config.memory_union && !first && strategy.uses_memory();
    let adam = Adam::new(config.lr);

    if strategy.is_meta() {
        let table = match (strategy, embeddings) {
            (Strategy::Cml, Some(t)) => Some(t),
            (Strategy::Cml, None) if !first => {
                return Err(Error::Precondition("cml needs relation embeddings".into()));
            }
            _ => None,
        };
        let empty = EmbeddingTable::default();
        for _ in 0..config.epochs {
            let shares = if union {
                memory_shares(&state.memory, task.relations.len(), rng)
            } else {
                vec![Vec::new(); task.relations.len()]
            };
            let mut adapted = Vec::with_capacity(task.relations.len());
            for (rel, share) in task.relations.iter().zip(shares) {
                let curriculum = if first {
                    None
                } else {
                    Some(build_curriculum(
                        &task.relations,
                        &state.memory,
                        table.unwrap_or(&empty),
                        config.curriculum_k,
                        config.curriculum_n,
                        config.curriculum_order(),
                        rng,
                    )?)
                };
                let mut data: Vec<Instance> = task.train_for(rel).cloned().collect();
                data.extend(share);
                adapted.push(inner_adapt_relation(&state.model, &data, curriculum.as_ref(), &task.relations, config, rng)?);
            }
            reptile_aggregate(&mut state.model, &adapted, config.epsilon)?;
            if config.merge_optimizer_state {
                merge_optimizer_state(&mut state.model, &adapted);
            }
        }
    } else {
        for _ in 0..config.epochs {
            let mut data = task.train.clone();
            if union {
                data.extend(state.memory.contents().into_iter().cloned());
            }
            data.shuffle(rng);
            train_batches(&mut state.model, &data, config.batch_size, &task.relations, &adam)?;
        }
    }

    if strategy.uses_memory() {
        let sel = memory_select(task, &state.model, config.memory_per_task, config.selection, rng)?;
        state.warnings.extend(sel.warnings);
        state.memory.add_task(sel.instances)?;
        finetune_on_memory(state, config, rng)?;
    }

    state.trained.push(task_idx);
    let (per_task_acc, acc_a, acc_w) = evaluate_seen(&state.model, benchmark, &state.trained)?;
    state.logs.push(StepLog {
        step: state.trained.len(),
        trained_task: task_idx,
        per_task_acc,
        acc_a,
        acc_w,
    });
    Ok(())
}

/// Trains every task in `order` from `init` and records the run.
pub fn train_sequence(
    benchmark: &Benchmark,
    order: &RunOrder,
    config: &TrainConfig,
    embeddings: Option<&EmbeddingTable>,
    init: &ExtractorModel,
    run_id: usize,
    rng: &mut Rng,
) -> Result<(RunRecord, RunState)> {
    config.validate()?;
    if order.len() != benchmark.num_tasks() {
        return Err(Error::Argument(format!(
            "order covers {} tasks, benchmark has {}",
            order.len(),
            benchmark.num_tasks()
        )));
    }
    RunOrder::new(order.permutation.clone())?;
    let mut state = RunState::new(init.clone(), config);
    for &t in &order.permutation {
        train_task(&mut state, benchmark, t, config, embeddings, rng)?;
        log::debug!(
            "run {run_id} {}: task {t} acc_a {:.4}",
            config.strategy,
            state.logs.last().map_or(0.0, |l| l.acc_a)
        );
    }
    let record = RunRecord::from_steps(run_id, order.clone(), state.logs.clone())?;
    Ok((record, state))
}
