use std::collections::BTreeMap;

use crate::datasets::io::matrix_csv;
use crate::error::{Error, Result};
use crate::kgembed::RelationEmbeddings;
use crate::numerics::cosine_similarity;

/// Relation id to embedding vector.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmbeddingTable {
    vectors: BTreeMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(vectors: BTreeMap<String, Vec<f64>>) -> Self {
        Self { vectors }
    }

    pub fn from_relation_embeddings(embeddings: &RelationEmbeddings) -> Self {
        Self::new(embeddings.iter().map(|(k, e)| (k.clone(), e.emd.as_slice().to_vec())).collect())
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (String, Vec<f64>)>) -> Self {
        Self::new(pairs.into_iter().collect())
    }

    pub fn get(&self, relation: &str) -> Result<&[f64]> {
        self.vectors
            .get(relation)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Lookup(format!("no embedding for relation `{relation}`")))
    }

    pub fn contains(&self, relation: &str) -> bool {
        self.vectors.contains_key(relation)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Vec<f64>)> {
        self.vectors.iter()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::new(
            self.vectors
                .iter()
                .map(|(k, v)| (k.clone(), v.iter().map(|x| x * c).collect()))
                .collect(),
        )
    }
}

pub fn relation_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    cosine_similarity(a, b)
}

/// Mean cosine over the cross pairs of two relation sets.
pub fn task_similarity(a: &[String], b: &[String], table: &EmbeddingTable) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Argument("task similarity of an empty task".into()));
    }
    let mut sum = 0.0;
    for m in a {
        let em = table.get(m)?;
        for n in b {
            sum += relation_similarity(em, table.get(n)?)?;
        }
    }
    Ok(sum / (a.len() * b.len()) as f64)
}

/// Mean similarity of task `i` to every other task.
pub fn task_difficulty(i: usize, tasks: &[Vec<String>], table: &EmbeddingTable) -> Result<f64> {
    let k = tasks.len();
    if k < 2 {
        return Err(Error::Precondition("difficulty is undefined for fewer than two tasks".into()));
    }
    if i >= k {
        return Err(Error::IndexOutOfRange { index: i, len: k });
    }
    let mut sum = 0.0;
    for (j, other) in tasks.iter().enumerate() {
        if j != i {
            sum += task_similarity(&tasks[i], other, table)?;
        }
    }
    Ok(sum / (k - 1) as f64)
}

/// Similarity of one relation to a task's relations.
pub fn relation_difficulty(relation: &str, task: &[String], table: &EmbeddingTable) -> Result<f64> {
    task_similarity(&[relation.to_string()], task, table)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub ids: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl SimilarityMatrix {
    pub fn of_relations(ids: &[String], table: &EmbeddingTable) -> Result<Self> {
        let mut values = vec![vec![0.0; ids.len()]; ids.len()];
        for i in 0..ids.len() {
            values[i][i] = 1.0;
            for j in i + 1..ids.len() {
                let s = relation_similarity(table.get(&ids[i])?, table.get(&ids[j])?)?;
                values[i][j] = s;
                values[j][i] = s;
            }
        }
        Ok(Self { ids: ids.to_vec(), values })
    }

    pub fn of_tasks(tasks: &[Vec<String>], table: &EmbeddingTable) -> Result<Self> {
        let n = tasks.len();
        let mut values = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i..n {
                let s = task_similarity(&tasks[i], &tasks[j], table)?;
                values[i][j] = s;
                values[j][i] = s;
            }
        }
        Ok(Self {
            ids: (0..n).map(|i| format!("task{i}")).collect(),
            values,
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i][j]
    }

    pub fn to_csv(&self) -> String {
        matrix_csv(&self.ids, &self.values)
    }
}

/// Per-task mean similarity to the other tasks.
#[derive(Debug, Clone, PartialEq)]
pub struct DifficultyScores {
    pub per_task: Vec<f64>,
}

impl DifficultyScores {
    pub fn compute(tasks: &[Vec<String>], table: &EmbeddingTable) -> Result<Self> {
        let per_task = (0..tasks.len())
            .map(|i| task_difficulty(i, tasks, table))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { per_task })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("task,difficulty\n");
        for (i, d) in self.per_task.iter().enumerate() {
            s.push_str(&format!("task{i},{d:.6}\n"));
        }
        s
    }
}
