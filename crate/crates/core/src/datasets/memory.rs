use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::types::{Instance, Task};
use crate::error::{Error, Result};
use crate::numerics::{cosine_similarity, Rng};

/// Maps an instance to a vector in encoder space.
pub trait InstanceEncoder {
    fn encode(&self, instance: &Instance) -> Result<Vec<f64>>;
}

impl<F> InstanceEncoder for F
where
    F: Fn(&Instance) -> Result<Vec<f64>>,
{
    fn encode(&self, instance: &Instance) -> Result<Vec<f64>> {
        self(instance)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionStrategy {
    /// Instances closest (cosine) to the relation's mean encoding.
    Centroid,
    Random,
}

impl std::str::FromStr for SelectionStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "centroid" => Ok(Self::Centroid),
            "random" => Ok(Self::Random),
            other => Err(Error::Argument(format!("unknown selection strategy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub instances: Vec<Instance>,
    pub warnings: Vec<String>,
}

/// Per-relation quotas: `quota / |relations|` each, remainder to the first
/// relations in task order.
pub fn relation_quotas(num_relations: usize, quota: usize) -> Vec<usize> {
    if num_relations == 0 {
        return Vec::new();
    }
    let base = quota / num_relations;
    let extra = quota % num_relations;
    (0..num_relations).map(|i| base + usize::from(i < extra)).collect()
}

/// Picks the prototype instances of `task` to keep in memory.
pub fn memory_select(
    task: &Task,
    encoder: &dyn InstanceEncoder,
    quota: usize,
    strategy: SelectionStrategy,
    rng: &mut Rng,
) -> Result<Selection> {
    let mut warnings = Vec::new();
    if quota < task.relations.len() {
        let msg = format!(
            "memory quota {quota} is below the {} relations of task {}; some relations get no slots",
            task.relations.len(),
            task.task_id
        );
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let quotas = relation_quotas(task.relations.len(), quota);
    let mut instances = Vec::new();
    for (rel, &q) in task.relations.iter().zip(&quotas) {
        let pool: Vec<&Instance> = task.train_for(rel).collect();
        if q == 0 || pool.is_empty() {
            continue;
        }
        if q >= pool.len() {
            instances.extend(pool.into_iter().cloned());
            continue;
        }
        match strategy {
            SelectionStrategy::Random => {
                let mut idx: Vec<usize> = (0..pool.len()).collect();
                idx.shuffle(rng);
                let mut chosen = idx[..q].to_vec();
                chosen.sort_unstable();
                instances.extend(chosen.into_iter().map(|i| pool[i].clone()));
            }
            SelectionStrategy::Centroid => {
                let encodings = pool
                    .iter()
                    .map(|i| encoder.encode(i))
                    .collect::<Result<Vec<_>>>()?;
                let dim = encodings[0].len();
                let mut mean = vec![0.0; dim];
                for e in &encodings {
                    for (m, v) in mean.iter_mut().zip(e) {
                        *m += v;
                    }
                }
                mean.iter_mut().for_each(|m| *m /= encodings.len() as f64);
                let mut scored: Vec<(usize, f64)> = encodings
                    .iter()
                    .enumerate()
                    .map(|(i, e)| (i, cosine_similarity(e, &mean).unwrap_or(-1.0)))
                    .collect();
                scored.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite").then(a.0.cmp(&b.0)));
                instances.extend(scored[..q].iter().map(|(i, _)| pool[*i].clone()));
            }
        }
    }
    Ok(Selection { instances, warnings })
}

/// Bounded store of prototype instances of already-trained tasks.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MemoryBuffer {
    budget_per_task: usize,
    tasks_seen: usize,
    relation_order: Vec<String>,
    per_relation: BTreeMap<String, Vec<Instance>>,
}

impl MemoryBuffer {
    pub fn new(budget_per_task: usize) -> Self {
        Self {
            budget_per_task,
            ..Self::default()
        }
    }

    pub fn budget_per_task(&self) -> usize {
        self.budget_per_task
    }

    pub fn tasks_seen(&self) -> usize {
        self.tasks_seen
    }

    /// Stores the selection for one completed task.
    pub fn add_task(&mut self, selected: Vec<Instance>) -> Result<()> {
        if selected.len() > self.budget_per_task {
            return Err(Error::Precondition(format!(
                "{} instances exceed the per-task memory budget {}",
                selected.len(),
                self.budget_per_task
            )));
        }
        self.tasks_seen += 1;
        for inst in selected {
            if !self.per_relation.contains_key(&inst.relation) {
                self.relation_order.push(inst.relation.clone());
            }
            self.per_relation.entry(inst.relation.clone()).or_default().push(inst);
        }
        debug_assert!(self.len() <= self.budget_per_task * self.tasks_seen);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.per_relation.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Relations in insertion order.
    pub fn relations(&self) -> &[String] {
        &self.relation_order
    }

    pub fn instances_of(&self, relation: &str) -> &[Instance] {
        self.per_relation.get(relation).map_or(&[], Vec::as_slice)
    }

    /// All stored instances, grouped by relation in insertion order.
    pub fn contents(&self) -> Vec<&Instance> {
        self.relation_order
            .iter()
            .flat_map(|r| self.per_relation[r].iter())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn task(n_rel: usize, per_rel: usize) -> Task {
        let relations: Vec<String> = (0..n_rel).map(|r| format!("r{r}")).collect();
        let train = relations
            .iter()
            .flat_map(|r| {
                (0..per_rel).map(move |i| Instance::new(format!("{r}-{i}"), vec![format!("t{i}")], r).unwrap())
            })
            .collect();
        Task {
            task_id: 0,
            relations,
            train,
            test: vec![],
        }
    }

    /// Encodes token `t{i}` as a fixed 2-d vector.
    fn toy_encoder(inst: &Instance) -> Result<Vec<f64>> {
        let i: f64 = inst.tokens[0][1..].parse().unwrap();
        Ok(vec![1.0, i])
    }

    #[test]
    fn quotas_split_evenly() {
        assert_eq!(relation_quotas(5, 50), vec![10; 5]);
        assert_eq!(relation_quotas(4, 50), vec![13, 13, 12, 12]);
        let t = task(5, 20);
        let s = memory_select(&t, &toy_encoder, 50, SelectionStrategy::Centroid, &mut Rng::new(1, 0)).unwrap();
        assert_eq!(s.instances.len(), 50);
        for r in &t.relations {
            assert_eq!(s.instances.iter().filter(|i| &i.relation == r).count(), 10);
        }
    }

    #[test]
    fn quota_equal_to_task_stores_everything() {
        let t = task(2, 5);
        let s = memory_select(&t, &toy_encoder, 10, SelectionStrategy::Random, &mut Rng::new(1, 0)).unwrap();
        assert_eq!(s.instances, t.train);
    }

    #[test]
    fn small_quota_warns() {
        let t = task(3, 4);
        let s = memory_select(&t, &toy_encoder, 2, SelectionStrategy::Random, &mut Rng::new(1, 0)).unwrap();
        assert_eq!(s.instances.len(), 2);
        assert_eq!(s.warnings.len(), 1);
    }

    #[test]
    fn centroid_prefers_instance_at_the_mean() {
        // Vectors (1, i) for i in {0, 2, 6, 8, 4}; (1, 4) coincides with the mean.
        let relations = vec!["r".to_string()];
        let train: Vec<Instance> = [0, 2, 6, 8, 4]
            .iter()
            .map(|i| Instance::new(format!("x{i}"), vec![format!("t{i}")], "r").unwrap())
            .collect();
        let t = Task {
            task_id: 0,
            relations,
            train,
            test: vec![],
        };
        // Brute-force oracle: mean and best cosine.
        let enc: Vec<Vec<f64>> = t.train.iter().map(|i| toy_encoder(i).unwrap()).collect();
        let mean = [1.0, enc.iter().map(|e| e[1]).sum::<f64>() / enc.len() as f64];
        let best = (0..enc.len())
            .max_by(|&a, &b| {
                let ca = cosine_similarity(&enc[a], &mean).unwrap();
                let cb = cosine_similarity(&enc[b], &mean).unwrap();
                ca.partial_cmp(&cb).unwrap()
            })
            .unwrap();
        let s = memory_select(&t, &toy_encoder, 1, SelectionStrategy::Centroid, &mut Rng::new(1, 0)).unwrap();
        assert_eq!(s.instances[0].id, t.train[best].id);
        assert_eq!(s.instances[0].id, "x4");
    }

    #[test]
    fn buffer_budget_holds() {
        let mut m = MemoryBuffer::new(50);
        for step in 1..=3 {
            let t = task(4, 20);
            let s = memory_select(&t, &toy_encoder, 50, SelectionStrategy::Random, &mut Rng::new(step, 0)).unwrap();
            m.add_task(s.instances).unwrap();
            assert!(m.len() <= 50 * step as usize);
        }
        assert_eq!(m.relations().len(), 4);
        let too_many = task(1, 60).train;
        assert!(m.add_task(too_many).is_err());
    }
}
