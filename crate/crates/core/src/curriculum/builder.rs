use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::similarity::{relation_difficulty, EmbeddingTable};
use crate::datasets::{Instance, MemoryBuffer};
use crate::error::{Error, Result};
use crate::numerics::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SortOrder {
    /// Least similar relations to the current task first.
    #[default]
    Ascending,
    Descending,
    /// No ordering: the sampled instances are shuffled together.
    Shuffled,
}

impl FromStr for SortOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ascending" => Ok(Self::Ascending),
            "descending" => Ok(Self::Descending),
            "shuffled" => Ok(Self::Shuffled),
            other => Err(Error::Argument(format!("unknown sort order `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurriculumRelation {
    pub relation: String,
    /// Mean cosine to the current task's relations.
    pub difficulty: f64,
    pub instances: Vec<Instance>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curriculum {
    pub order: SortOrder,
    /// Relations in presentation order (sample order for `Shuffled`).
    pub relations: Vec<CurriculumRelation>,
    /// The flattened instance sequence that training consumes.
    pub sequence: Vec<Instance>,
}

impl Curriculum {
    pub fn len(&self) -> usize {
        self.sequence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequence.is_empty()
    }

    pub fn relation_ids(&self) -> Vec<&str> {
        self.relations.iter().map(|r| r.relation.as_str()).collect()
    }

    pub fn batches(&self, batch_size: usize) -> std::slice::Chunks<'_, Instance> {
        self.sequence.chunks(batch_size.max(1))
    }
}

fn draw(pool: &[Instance], n: usize, rng: &mut Rng) -> Vec<Instance> {
    if pool.len() >= n {
        let mut idx = index::sample(rng, pool.len(), n).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| pool[i].clone()).collect()
    } else {
        (0..n).map(|_| pool[rng.gen_range(0..pool.len())].clone()).collect()
    }
}

/// Samples `k` memory relations with `n` instances each and orders them by
/// their similarity to `current_task`.
pub fn build_curriculum(
    current_task: &[String],
    memory: &MemoryBuffer,
    table: &EmbeddingTable,
    k: usize,
    n: usize,
    order: SortOrder,
    rng: &mut Rng,
) -> Result<Curriculum> {
    let rels: Vec<&String> = memory
        .relations()
        .iter()
        .filter(|r| !memory.instances_of(r).is_empty())
        .collect();
    if rels.is_empty() {
        return Err(Error::Precondition("curriculum needs a non-empty memory".into()));
    }
    if k == 0 || n == 0 {
        return Err(Error::Argument("curriculum k and n must be positive".into()));
    }
    let mut picked = index::sample(rng, rels.len(), k.min(rels.len())).into_vec();
    picked.sort_unstable();
    let mut relations = Vec::with_capacity(picked.len());
    for i in picked {
        let rel = rels[i];
        let instances = draw(memory.instances_of(rel), n, rng);
        let difficulty = match order {
            SortOrder::Shuffled => 0.0,
            _ => relation_difficulty(rel, current_task, table)?,
        };
        relations.push(CurriculumRelation { relation: rel.clone(), difficulty, instances });
    }
    let by_difficulty = |a: &CurriculumRelation, b: &CurriculumRelation| {
        a.difficulty.total_cmp(&b.difficulty).then_with(|| a.relation.cmp(&b.relation))
    };
    match order {
        SortOrder::Ascending => relations.sort_by(by_difficulty),
        SortOrder::Descending => {
            relations.sort_by(|a, b| by_difficulty(b, a).then_with(|| a.relation.cmp(&b.relation)))
        }
        SortOrder::Shuffled => {}
    }
    let mut sequence: Vec<Instance> = relations.iter().flat_map(|r| r.instances.iter().cloned()).collect();
    if order == SortOrder::Shuffled {
        sequence.shuffle(rng);
    }
    Ok(Curriculum { order, relations, sequence })
}
