use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{forgetting_rate, mean, pearson_cc, sample_std};
use super::record::RunRecord;
use crate::curriculum::{task_difficulty, EmbeddingTable};
use crate::datasets::{Benchmark, RunOrder};
use crate::error::{Error, Result};
use crate::learner::{train_sequence, ExtractorModel, TrainConfig};
use crate::numerics::Rng;

/// Largest K accepted by exhaustive enumeration (8! = 40320 runs).
pub const MAX_EXHAUSTIVE_TASKS: usize = 8;

/// Stream offset for per-run training streams, keeps them clear of the
/// small stream ids used by the pipeline stages.
pub const RUN_STREAM_BASE: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyMode {
    #[default]
    Cyclic,
    MonteCarlo,
    Exhaustive,
}

impl StudyMode {
    pub fn name(self) -> &'static str {
        match self {
            StudyMode::Cyclic => "cyclic",
            StudyMode::MonteCarlo => "monte_carlo",
            StudyMode::Exhaustive => "exhaustive",
        }
    }
}

impl fmt::Display for StudyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StudyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cyclic" => Ok(StudyMode::Cyclic),
            "monte_carlo" => Ok(StudyMode::MonteCarlo),
            "exhaustive" => Ok(StudyMode::Exhaustive),
            _ => Err(Error::Config(format!("unknown study mode `{s}`"))),
        }
    }
}

/// Every permutation of `0..k` in lexicographic order.
pub fn all_permutations(k: usize) -> Vec<Vec<usize>> {
    let mut p: Vec<usize> = (0..k).collect();
    let mut out = vec![p.clone()];
    loop {
        let Some(i) = (1..k).rev().find(|&i| p[i - 1] < p[i]) else {
            return out;
        };
        let j = (i..k).rev().find(|&j| p[j] > p[i - 1]).unwrap();
        p.swap(i - 1, j);
        p[i..].reverse();
        out.push(p.clone());
    }
}

/// Task orders for a study. `samples` is only read in Monte Carlo mode.
pub fn study_orders(mode: StudyMode, base: &[usize], samples: usize, rng: &mut Rng) -> Result<Vec<RunOrder>> {
    let k = base.len();
    RunOrder::new(base.to_vec())?;
    match mode {
        StudyMode::Cyclic => (0..k).map(|o| RunOrder::rotated(base, o)).collect(),
        StudyMode::Exhaustive => {
            if k > MAX_EXHAUSTIVE_TASKS {
                return Err(Error::Config(format!(
                    "exhaustive study over {k} tasks, at most {MAX_EXHAUSTIVE_TASKS} allowed"
                )));
            }
            Ok(all_permutations(k)
                .into_iter()
                .enumerate()
                .map(|(i, p)| RunOrder { permutation: p, offset: i })
                .collect())
        }
        StudyMode::MonteCarlo => {
            if samples == 0 {
                return Err(Error::Config("monte carlo study needs at least one sample".into()));
            }
            Ok((0..samples)
                .map(|i| {
                    let mut p = base.to_vec();
                    p.shuffle(rng);
                    RunOrder { permutation: p, offset: i }
                })
                .collect())
        }
    }
}

/// Mean final accuracy of task `task` over the records that trained it at
/// `position`.
pub fn position_avg_accuracy(records: &[RunRecord], task: usize, position: usize) -> Result<f64> {
    let hits: Vec<f64> = records
        .iter()
        .filter(|r| r.order.permutation.get(position) == Some(&task))
        .map(|r| r.final_acc[task])
        .collect();
    if hits.is_empty() {
        return Err(Error::Lookup(format!("no run trains task {task} at position {}", position + 1)));
    }
    mean(&hits)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationStudy {
    pub mode: StudyMode,
    pub num_tasks: usize,
    pub records: Vec<RunRecord>,
}

/// Per-task forgetting rates with the cells or tasks that had to be skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct ForgettingSummary {
    pub per_task: Vec<Option<f64>>,
    pub warnings: Vec<String>,
}

impl PermutationStudy {
    pub fn new(mode: StudyMode, num_tasks: usize, records: Vec<RunRecord>) -> Result<Self> {
        for r in &records {
            if r.order.len() != num_tasks || r.final_acc.len() != num_tasks {
                return Err(Error::Dimension(format!(
                    "run {} covers {} tasks, study has {num_tasks}",
                    r.run_id,
                    r.order.len()
                )));
            }
        }
        Ok(Self { mode, num_tasks, records })
    }

    pub fn position_avg_accuracy(&self, task: usize, position: usize) -> Result<f64> {
        position_avg_accuracy(&self.records, task, position)
    }

    /// Number of runs that trained `task` at `position`.
    pub fn cell_count(&self, task: usize, position: usize) -> usize {
        self.records.iter().filter(|r| r.order.permutation.get(position) == Some(&task)).count()
    }

    /// `table[position][task]`, `None` where no run covers the cell.
    pub fn position_table(&self) -> Vec<Vec<Option<f64>>> {
        (0..self.num_tasks)
            .map(|i| (0..self.num_tasks).map(|j| self.position_avg_accuracy(j, i).ok()).collect())
            .collect()
    }

    /// Column mean and sample std of each task over the covered positions.
    pub fn column_stats(&self) -> (Vec<Option<f64>>, Vec<Option<f64>>) {
        let table = self.position_table();
        (0..self.num_tasks)
            .map(|j| {
                let col: Vec<f64> = table.iter().filter_map(|row| row[j]).collect();
                (mean(&col).ok(), sample_std(&col).ok())
            })
            .unzip()
    }

    /// Forgetting rate of `task` over its covered positions, in position order.
    pub fn task_forgetting(&self, task: usize) -> Result<f64> {
        let seq: Vec<f64> = (0..self.num_tasks).filter_map(|i| self.position_avg_accuracy(task, i).ok()).collect();
        forgetting_rate(&seq)
    }

    pub fn forgetting(&self) -> ForgettingSummary {
        let mut warnings = Vec::new();
        let mut per_task = Vec::with_capacity(self.num_tasks);
        for j in 0..self.num_tasks {
            let missing: Vec<usize> = (0..self.num_tasks).filter(|&i| self.cell_count(j, i) == 0).map(|i| i + 1).collect();
            if !missing.is_empty() {
                warnings.push(format!("task {j}: positions {missing:?} not covered, excluded from Fr"));
            }
            match self.task_forgetting(j) {
                Ok(f) => per_task.push(Some(f)),
                Err(e) => {
                    warnings.push(format!("task {j}: no forgetting rate ({e})"));
                    per_task.push(None);
                }
            }
        }
        ForgettingSummary { per_task, warnings }
    }

    pub fn acc_a_values(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.acc_a).collect()
    }

    pub fn acc_w_values(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.acc_w).collect()
    }
}

/// Everything a study run shares.
#[derive(Clone, Copy)]
pub struct StudyContext<'a> {
    pub benchmark: &'a Benchmark,
    pub config: &'a TrainConfig,
    pub embeddings: Option<&'a EmbeddingTable>,
    pub init: &'a ExtractorModel,
    pub base_seed: u64,
    pub workers: usize,
}

/// Trains one run per order. Run `i` draws from stream
/// `RUN_STREAM_BASE + i` of `base_seed`, so results do not depend on
/// `workers`.
pub fn run_study(ctx: &StudyContext<'_>, orders: &[RunOrder]) -> Result<Vec<RunRecord>> {
    let one = |(i, order): (usize, &RunOrder)| {
        let mut rng = Rng::new(ctx.base_seed, RUN_STREAM_BASE + i as u64);
        train_sequence(ctx.benchmark, order, ctx.config, ctx.embeddings, ctx.init, i, &mut rng).map(|(r, _)| r)
    };
    if ctx.workers <= 1 {
        return orders.iter().enumerate().map(one).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(ctx.workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| orders.par_iter().enumerate().map(one).collect())
}

pub fn run_permutation_study(
    ctx: &StudyContext<'_>,
    mode: StudyMode,
    base_order: &[usize],
    samples: usize,
) -> Result<PermutationStudy> {
    let mut rng = Rng::new(ctx.base_seed, RUN_STREAM_BASE - 1);
    let orders = study_orders(mode, base_order, samples, &mut rng)?;
    let records = run_study(ctx, &orders)?;
    PermutationStudy::new(mode, base_order.len(), records)
}

/// K runs over the rotations of `base_order`.
pub fn cyclic_shift_protocol(ctx: &StudyContext<'_>, base_order: &[usize]) -> Result<PermutationStudy> {
    run_permutation_study(ctx, StudyMode::Cyclic, base_order, 0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifficultyCorrelation {
    pub prior: Vec<f64>,
    /// `None` for tasks without a forgetting rate.
    pub posterior: Vec<Option<f64>>,
    /// Over the tasks that have both values.
    pub pcc: Option<f64>,
    pub warnings: Vec<String>,
}

/// Prior task difficulty against the study's per-task forgetting rate.
pub fn difficulty_correlation(
    benchmark: &Benchmark,
    study: &PermutationStudy,
    embeddings: &EmbeddingTable,
) -> Result<DifficultyCorrelation> {
    let groups: Vec<Vec<String>> = benchmark.tasks.iter().map(|t| t.relations.clone()).collect();
    if groups.len() != study.num_tasks {
        return Err(Error::Dimension(format!(
            "benchmark has {} tasks, study has {}",
            groups.len(),
            study.num_tasks
        )));
    }
    let prior = (0..groups.len()).map(|i| task_difficulty(i, &groups, embeddings)).collect::<Result<Vec<_>>>()?;
    let fr = study.forgetting();
    let mut warnings = fr.warnings;
    let (xs, ys): (Vec<f64>, Vec<f64>) = prior
        .iter()
        .zip(&fr.per_task)
        .filter_map(|(p, f)| f.map(|f| (*p, f)))
        .unzip();
    let pcc = match pearson_cc(&xs, &ys) {
        Ok(r) => Some(r),
        Err(e) => {
            warnings.push(format!("pcc undefined: {e}"));
            None
        }
    };
    Ok(DifficultyCorrelation {
        prior,
        posterior: fr.per_task,
        pcc,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::StepLog;
    use std::collections::BTreeMap;

    /// Record whose final accuracy of task `t` is `f(t, position of t)`.
    fn record(id: usize, perm: Vec<usize>, f: impl Fn(usize, usize) -> f64) -> RunRecord {
        let order = RunOrder::new(perm).unwrap();
        let per_task: BTreeMap<usize, f64> = order.permutation.iter().enumerate().map(|(i, &t)| (t, f(t, i))).collect();
        let acc_a = per_task.values().sum::<f64>() / per_task.len() as f64;
        let step = StepLog { step: order.len(), trained_task: *order.permutation.last().unwrap(), per_task_acc: per_task, acc_a, acc_w: acc_a };
        RunRecord::from_steps(id, order, vec![step]).unwrap()
    }

    #[test]
    fn permutations_lexicographic() {
        let p = all_permutations(3);
        assert_eq!(p, vec![vec![0, 1, 2], vec![0, 2, 1], vec![1, 0, 2], vec![1, 2, 0], vec![2, 0, 1], vec![2, 1, 0]]);
        assert_eq!(all_permutations(5).len(), 120);
        assert_eq!(all_permutations(1), vec![vec![0]]);
    }

    #[test]
    fn cyclic_orders() {
        let o = study_orders(StudyMode::Cyclic, &[0, 1, 2], 0, &mut Rng::new(0, 0)).unwrap();
        let perms: Vec<_> = o.iter().map(|o| o.permutation.clone()).collect();
        assert_eq!(perms, vec![vec![0, 1, 2], vec![2, 0, 1], vec![1, 2, 0]]);
        assert_eq!(o[2].offset, 2);
    }

    #[test]
    fn exhaustive_and_monte_carlo_orders() {
        let mut rng = Rng::new(0, 0);
        assert!(study_orders(StudyMode::Exhaustive, &(0..9).collect::<Vec<_>>(), 0, &mut rng).is_err());
        assert!(study_orders(StudyMode::MonteCarlo, &[0, 1], 0, &mut rng).is_err());
        let mc = study_orders(StudyMode::MonteCarlo, &[0, 1, 2, 3], 7, &mut rng).unwrap();
        assert_eq!(mc.len(), 7);
        let again = study_orders(StudyMode::MonteCarlo, &[0, 1, 2, 3], 7, &mut Rng::new(0, 0)).unwrap();
        assert_eq!(mc, again);
    }

    #[test]
    fn exhaustive_matches_enumeration() {
        let f = |t: usize, i: usize| 0.3 + 0.1 * t as f64 + 0.05 * i as f64 + 0.01 * (t * i) as f64;
        let orders = study_orders(StudyMode::Exhaustive, &[0, 1, 2], 0, &mut Rng::new(0, 0)).unwrap();
        let recs: Vec<_> = orders.iter().map(|o| record(o.offset, o.permutation.clone(), f)).collect();
        for j in 0..3 {
            for i in 0..3 {
                let brute: Vec<f64> = all_permutations(3).iter().filter(|p| p[i] == j).map(|_| f(j, i)).collect();
                assert_eq!(brute.len(), 2);
                assert_eq!(position_avg_accuracy(&recs, j, i).unwrap(), brute.iter().sum::<f64>() / 2.0);
            }
        }
    }

    #[test]
    fn cyclic_fills_each_cell_once() {
        let base = [3, 0, 4, 1, 2];
        let orders = study_orders(StudyMode::Cyclic, &base, 0, &mut Rng::new(0, 0)).unwrap();
        let recs: Vec<_> = orders.iter().map(|o| record(o.offset, o.permutation.clone(), |t, i| 0.5 + 0.01 * (t + i) as f64)).collect();
        let s = PermutationStudy::new(StudyMode::Cyclic, 5, recs).unwrap();
        for j in 0..5 {
            for i in 0..5 {
                assert_eq!(s.cell_count(j, i), 1);
            }
        }
        assert!(s.position_table().iter().flatten().all(Option::is_some));
        assert!(s.forgetting().warnings.is_empty());
    }

    #[test]
    fn missing_cells_are_reported() {
        let recs = vec![record(0, vec![0, 1, 2], |_, i| 0.9 - 0.1 * i as f64)];
        assert!(matches!(position_avg_accuracy(&recs, 0, 1), Err(Error::Lookup(_))));
        let s = PermutationStudy::new(StudyMode::MonteCarlo, 3, recs).unwrap();
        let fr = s.forgetting();
        assert!(fr.per_task.iter().all(Option::is_none));
        assert_eq!(s.position_table()[0], vec![Some(0.9), None, None]);
        assert!(!fr.warnings.is_empty());
    }

    #[test]
    fn forgetting_uses_position_order() {
        let orders = study_orders(StudyMode::Cyclic, &[0, 1], 0, &mut Rng::new(0, 0)).unwrap();
        let recs: Vec<_> = orders.iter().map(|o| record(o.offset, o.permutation.clone(), |_, i| [0.5, 0.6][i])).collect();
        let s = PermutationStudy::new(StudyMode::Cyclic, 2, recs).unwrap();
        for f in s.forgetting().per_task {
            assert!((f.unwrap() - 0.2).abs() < 1e-12);
        }
        let (mu, sd) = s.column_stats();
        assert!((mu[0].unwrap() - 0.55).abs() < 1e-12);
        assert!(sd[1].unwrap() > 0.0);
    }

    #[test]
    fn study_mode_parsing() {
        for m in [StudyMode::Cyclic, StudyMode::MonteCarlo, StudyMode::Exhaustive] {
            assert_eq!(m.name().parse::<StudyMode>().unwrap(), m);
        }
        assert!("random".parse::<StudyMode>().is_err());
    }
}
