use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A labeled sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub id: String,
    pub tokens: Vec<String>,
    pub relation: String,
}

impl Instance {
    pub fn new(id: impl Into<String>, tokens: Vec<String>, relation: impl Into<String>) -> Result<Self> {
        let inst = Self {
            id: id.into(),
            tokens,
            relation: relation.into(),
        };
        if inst.tokens.is_empty() {
            return Err(Error::Argument(format!("instance `{}` has no tokens", inst.id)));
        }
        if inst.relation.is_empty() {
            return Err(Error::Argument(format!("instance `{}` has an empty relation", inst.id)));
        }
        Ok(inst)
    }
}

/// One supervised classification task over a set of relations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub task_id: usize,
    pub relations: Vec<String>,
    pub train: Vec<Instance>,
    pub test: Vec<Instance>,
}

impl Task {
    pub fn train_for<'a>(&'a self, relation: &'a str) -> impl Iterator<Item = &'a Instance> + 'a {
        self.train.iter().filter(move |i| i.relation == relation)
    }
}

/// Token to index map. Index 0 is reserved for out-of-vocabulary tokens.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: BTreeMap<String, usize>,
}

pub const OOV_TOKEN: &str = "<unk>";

impl Vocabulary {
    pub fn new() -> Self {
        let mut v = Self {
            tokens: Vec::new(),
            index: BTreeMap::new(),
        };
        v.insert(OOV_TOKEN);
        v
    }

    pub fn insert(&mut self, token: &str) -> usize {
        if let Some(&i) = self.index.get(token) {
            return i;
        }
        let i = self.tokens.len();
        self.tokens.push(token.to_string());
        self.index.insert(token.to_string(), i);
        i
    }

    /// Index of `token`, or 0 for unknown tokens.
    pub fn get(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(0)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() <= 1
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn from_tokens<'a>(tokens: impl IntoIterator<Item = &'a str>) -> Self {
        let mut v = Self::new();
        for t in tokens {
            v.insert(t);
        }
        v
    }
}

/// Splits a relation id into name tokens on `_`, `/`, `:`, `-` and whitespace.
pub fn relation_name_tokens(relation: &str) -> Vec<String> {
    let tokens: Vec<String> = relation
        .split(|c: char| c == '_' || c == '/' || c == ':' || c == '-' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect();
    if tokens.is_empty() {
        vec![relation.to_string()]
    } else {
        tokens
    }
}

/// A stream of relation-disjoint tasks.
#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    pub tasks: Vec<Task>,
    pub vocabulary: Vocabulary,
    pub relation_names: BTreeMap<String, Vec<String>>,
}

impl Benchmark {
    /// Validates the task set and builds the vocabulary from every instance
    /// and relation name. Relations without an entry in `relation_names` use
    /// [`relation_name_tokens`].
    pub fn new(tasks: Vec<Task>, mut relation_names: BTreeMap<String, Vec<String>>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for task in &tasks {
            let own: BTreeSet<&str> = task.relations.iter().map(String::as_str).collect();
            for r in &task.relations {
                if !seen.insert(r.clone()) {
                    return Err(Error::Data(format!(
                        "relation `{r}` appears in more than one task"
                    )));
                }
            }
            for inst in task.train.iter().chain(&task.test) {
                if !own.contains(inst.relation.as_str()) {
                    return Err(Error::Data(format!(
                        "instance `{}` of relation `{}` is not in task {}",
                        inst.id, inst.relation, task.task_id
                    )));
                }
            }
        }
        let mut vocabulary = Vocabulary::new();
        for task in &tasks {
            for r in &task.relations {
                let names = relation_names
                    .entry(r.clone())
                    .or_insert_with(|| relation_name_tokens(r));
                for t in names.iter() {
                    vocabulary.insert(t);
                }
            }
            for inst in task.train.iter().chain(&task.test) {
                for t in &inst.tokens {
                    vocabulary.insert(t);
                }
            }
        }
        Ok(Self {
            tasks,
            vocabulary,
            relation_names,
        })
    }

    pub fn num_tasks(&self) -> usize {
        self.tasks.len()
    }

    /// All relations in task order.
    pub fn relations(&self) -> Vec<String> {
        self.tasks.iter().flat_map(|t| t.relations.iter().cloned()).collect()
    }

    pub fn task(&self, task_id: usize) -> Result<&Task> {
        self.tasks
            .iter()
            .find(|t| t.task_id == task_id)
            .ok_or_else(|| Error::Lookup(format!("task {task_id}")))
    }

    pub fn num_instances(&self) -> usize {
        self.tasks.iter().map(|t| t.train.len() + t.test.len()).sum()
    }

    /// Regroups the instances of this benchmark into new tasks, keeping each
    /// instance's train/test assignment.
    pub fn regroup(&self, groups: &[Vec<String>]) -> Result<Benchmark> {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for t in &self.tasks {
            train.extend(t.train.iter().cloned());
            test.extend(t.test.iter().cloned());
        }
        build_tasks(groups, &train, &test, self.relation_names.clone())
    }
}

/// Builds a benchmark from relation groups and pre-split instances.
pub fn build_tasks(
    groups: &[Vec<String>],
    train: &[Instance],
    test: &[Instance],
    relation_names: BTreeMap<String, Vec<String>>,
) -> Result<Benchmark> {
    let mut owner: BTreeMap<&str, usize> = BTreeMap::new();
    for (g, rels) in groups.iter().enumerate() {
        for r in rels {
            owner.insert(r.as_str(), g);
        }
    }
    let mut tasks: Vec<Task> = groups
        .iter()
        .enumerate()
        .map(|(task_id, rels)| Task {
            task_id,
            relations: rels.clone(),
            train: Vec::new(),
            test: Vec::new(),
        })
        .collect();
    for inst in train {
        let g = *owner
            .get(inst.relation.as_str())
            .ok_or_else(|| Error::Data(format!("relation `{}` is in no task", inst.relation)))?;
        tasks[g].train.push(inst.clone());
    }
    for inst in test {
        let g = *owner
            .get(inst.relation.as_str())
            .ok_or_else(|| Error::Data(format!("relation `{}` is in no task", inst.relation)))?;
        tasks[g].test.push(inst.clone());
    }
    Benchmark::new(tasks, relation_names)
}

/// Order in which tasks are presented, `order[position] = task_id`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOrder {
    pub permutation: Vec<usize>,
    pub offset: usize,
}

impl RunOrder {
    pub fn new(permutation: Vec<usize>) -> Result<Self> {
        let mut sorted = permutation.clone();
        sorted.sort_unstable();
        if sorted.iter().enumerate().any(|(i, &v)| i != v) {
            return Err(Error::Argument(format!(
                "{permutation:?} is not a permutation of 0..{}",
                permutation.len()
            )));
        }
        Ok(Self {
            permutation,
            offset: 0,
        })
    }

    pub fn identity(k: usize) -> Self {
        Self {
            permutation: (0..k).collect(),
            offset: 0,
        }
    }

    /// Cyclic right-rotation of `base` by `offset`: offset 1 of `[0,1,2]` is
    /// `[2,0,1]`.
    pub fn rotated(base: &[usize], offset: usize) -> Result<Self> {
        let k = base.len();
        let mut perm = Self::new(base.to_vec())?.permutation;
        if k > 0 {
            perm.rotate_right(offset % k);
        }
        Ok(Self {
            permutation: perm,
            offset,
        })
    }

    pub fn len(&self) -> usize {
        self.permutation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.permutation.is_empty()
    }

    /// Position of `task_id` in this order.
    pub fn position_of(&self, task_id: usize) -> Option<usize> {
        self.permutation.iter().position(|&t| t == task_id)
    }
}
