//! Synthetic continual relation-extraction benchmark with a matching
//! knowledge graph and known relation similarity.
//!
//! Concepts sit on a ring. Each relation draws its head and tail concepts
//! uniformly from a window of `concept_window` consecutive concepts, so the
//! designed similarity of two relations is the mean of their head-window and
//! tail-window overlap fractions. Relations in the same [`RelationCluster`]
//! get windows within `spread` of a shared center; `spread = 0` makes their
//! concept distributions identical.
//!
//! A sentence of relation `r` mentions a head entity and its concept, a tail
//! entity and its concept, with probability `keyword_prob` one of `r`'s
//! keywords, and `noise_per_sentence` background tokens. Concept and entity
//! tokens are shared between relations exactly as their windows overlap, so
//! similar relations are similar in text too.

use std::collections::BTreeMap;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::types::{Benchmark, Instance, Task};
use crate::error::{Error, Result};
use crate::kgembed::graph::KnowledgeGraph;
use crate::numerics::Rng;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelationCluster {
    /// Global relation indices (`task * relations_per_task + j`).
    pub relations: Vec<usize>,
    /// Maximum offset of a member's window from the cluster center.
    #[serde(default)]
    pub spread: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub tasks: usize,
    pub relations_per_task: usize,
    pub train_per_relation: usize,
    pub test_per_relation: usize,
    pub concepts: usize,
    pub concept_window: usize,
    pub entities_per_concept: usize,
    pub triples_per_relation: usize,
    pub keywords_per_relation: usize,
    pub keyword_prob: f64,
    pub noise_tokens: usize,
    pub noise_per_sentence: usize,
    /// Upper bound on the number of distinct tokens the generator may use.
    pub vocab_size: usize,
    pub clusters: Vec<RelationCluster>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            tasks: 5,
            relations_per_task: 4,
            train_per_relation: 50,
            test_per_relation: 20,
            concepts: 48,
            concept_window: 6,
            entities_per_concept: 6,
            triples_per_relation: 60,
            keywords_per_relation: 3,
            keyword_prob: 0.6,
            noise_tokens: 40,
            noise_per_sentence: 2,
            vocab_size: 2000,
            clusters: Vec::new(),
        }
    }
}

impl SynthConfig {
    pub fn num_relations(&self) -> usize {
        self.tasks * self.relations_per_task
    }

    /// Tokens the generator needs: concept, entity, keyword and noise tokens.
    pub fn required_vocab(&self) -> usize {
        self.concepts * (1 + self.entities_per_concept)
            + self.num_relations() * self.keywords_per_relation
            + self.noise_tokens
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Argument(m));
        if self.tasks == 0 || self.relations_per_task == 0 {
            return bad("need at least one task and one relation per task".into());
        }
        if self.train_per_relation == 0 || self.test_per_relation == 0 {
            return bad("each relation needs train and test instances".into());
        }
        if self.concepts == 0 || self.concept_window == 0 || self.concept_window > self.concepts {
            return bad(format!(
                "concept window {} must be in 1..={} concepts",
                self.concept_window, self.concepts
            ));
        }
        if self.entities_per_concept == 0 || self.keywords_per_relation == 0 {
            return bad("need entities per concept and keywords per relation".into());
        }
        if !(0.0..=1.0).contains(&self.keyword_prob) {
            return bad(format!("keyword_prob {} outside [0, 1]", self.keyword_prob));
        }
        if self.noise_per_sentence > 0 && self.noise_tokens == 0 {
            return bad("noise_per_sentence needs a non-empty noise vocabulary".into());
        }
        if self.required_vocab() > self.vocab_size {
            return bad(format!(
                "configuration needs {} tokens but vocab_size is {}",
                self.required_vocab(),
                self.vocab_size
            ));
        }
        let mut owner = vec![false; self.num_relations()];
        for c in &self.clusters {
            for &r in &c.relations {
                if r >= owner.len() {
                    return bad(format!("cluster relation {r} out of range"));
                }
                if std::mem::replace(&mut owner[r], true) {
                    return bad(format!("relation {r} is in more than one cluster"));
                }
            }
        }
        Ok(())
    }
}

/// Concept windows of one relation (start positions on the ring).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConceptProfile {
    pub head_start: usize,
    pub tail_start: usize,
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub benchmark: Benchmark,
    pub kg: KnowledgeGraph,
    /// Relation ids in global index order.
    pub relations: Vec<String>,
    pub profiles: Vec<ConceptProfile>,
    /// Designed pairwise similarity in `[0, 1]`, indexed like `relations`.
    pub ground_truth: Vec<Vec<f64>>,
}

fn window(start: usize, width: usize, ring: usize) -> Vec<usize> {
    (0..width).map(|o| (start + o) % ring).collect()
}

/// Overlap fraction of two ring windows of equal width.
pub fn window_overlap(a: usize, b: usize, width: usize, ring: usize) -> f64 {
    let wa = window(a, width, ring);
    let wb = window(b, width, ring);
    wa.iter().filter(|c| wb.contains(c)).count() as f64 / width as f64
}

fn concept_token(c: usize) -> String {
    format!("c{c}")
}

fn entity_token(c: usize, j: usize) -> String {
    format!("e{c}_{j}")
}

fn keyword_token(r: usize, j: usize) -> String {
    if j == 0 {
        format!("r{r:02}")
    } else {
        format!("r{r:02}k{j}")
    }
}

fn offset_on_ring(center: usize, spread: usize, ring: usize, rng: &mut Rng) -> usize {
    if spread == 0 {
        return center;
    }
    let off = rng.gen_range(0..=2 * spread) as i64 - spread as i64;
    (center as i64 + off).rem_euclid(ring as i64) as usize
}

pub fn generate_synthetic(config: &SynthConfig, rng: &mut Rng) -> Result<SynthOutput> {
    config.validate()?;
    let n_rel = config.num_relations();
    let ring = config.concepts;
    let width = config.concept_window;

    let mut layout_rng = rng.child_named("layout");
    let mut profiles: Vec<Option<ConceptProfile>> = vec![None; n_rel];
    for cluster in &config.clusters {
        let head_center = layout_rng.gen_range(0..ring);
        let tail_center = layout_rng.gen_range(0..ring);
        for &r in &cluster.relations {
            profiles[r] = Some(ConceptProfile {
                head_start: offset_on_ring(head_center, cluster.spread, ring, &mut layout_rng),
                tail_start: offset_on_ring(tail_center, cluster.spread, ring, &mut layout_rng),
            });
        }
    }
    let profiles: Vec<ConceptProfile> = profiles
        .into_iter()
        .map(|p| {
            p.unwrap_or_else(|| ConceptProfile {
                head_start: layout_rng.gen_range(0..ring),
                tail_start: layout_rng.gen_range(0..ring),
            })
        })
        .collect();

    let relations: Vec<String> = profiles
        .iter()
        .enumerate()
        .map(|(r, p)| {
            format!(
                "{}_{}_{}",
                keyword_token(r, 0),
                concept_token((p.head_start + width / 2) % ring),
                concept_token((p.tail_start + width / 2) % ring)
            )
        })
        .collect();

    let ground_truth: Vec<Vec<f64>> = profiles
        .iter()
        .map(|a| {
            profiles
                .iter()
                .map(|b| {
                    0.5 * (window_overlap(a.head_start, b.head_start, width, ring)
                        + window_overlap(a.tail_start, b.tail_start, width, ring))
                })
                .collect()
        })
        .collect();

    let sample_entity = |start: usize, rng: &mut Rng| -> (usize, usize) {
        let c = (start + rng.gen_range(0..width)) % ring;
        (c, rng.gen_range(0..config.entities_per_concept))
    };

    let mut kg = KnowledgeGraph::new();
    for c in 0..ring {
        for j in 0..config.entities_per_concept {
            kg.add_concept(&entity_token(c, j), &concept_token(c));
        }
    }
    let mut kg_rng = rng.child_named("triples");
    for (r, p) in profiles.iter().enumerate() {
        for _ in 0..config.triples_per_relation {
            let (hc, hj) = sample_entity(p.head_start, &mut kg_rng);
            let (tc, tj) = sample_entity(p.tail_start, &mut kg_rng);
            kg.add_triple(&entity_token(hc, hj), &relations[r], &entity_token(tc, tj));
        }
    }

    let mut text_rng = rng.child_named("sentences");
    let per_rel = config.train_per_relation + config.test_per_relation;
    let mut tasks = Vec::with_capacity(config.tasks);
    let mut relation_names = BTreeMap::new();
    for t in 0..config.tasks {
        let rels: Vec<usize> = (t * config.relations_per_task..(t + 1) * config.relations_per_task).collect();
        let mut train = Vec::new();
        let mut test = Vec::new();
        for &r in &rels {
            let p = profiles[r];
            for i in 0..per_rel {
                let (hc, hj) = sample_entity(p.head_start, &mut text_rng);
                let (tc, tj) = sample_entity(p.tail_start, &mut text_rng);
                let mut tokens = vec![entity_token(hc, hj), concept_token(hc)];
                if text_rng.gen_bool(config.keyword_prob) {
                    let k = text_rng.gen_range(0..config.keywords_per_relation);
                    tokens.push(keyword_token(r, k));
                }
                tokens.push(entity_token(tc, tj));
                tokens.push(concept_token(tc));
                for _ in 0..config.noise_per_sentence {
                    tokens.push(format!("w{}", text_rng.gen_range(0..config.noise_tokens)));
                }
                let inst = Instance {
                    id: format!("{}-{i:03}", relations[r]),
                    tokens,
                    relation: relations[r].clone(),
                };
                if i < config.train_per_relation {
                    train.push(inst);
                } else {
                    test.push(inst);
                }
            }
            relation_names.insert(
                relations[r].clone(),
                crate::datasets::types::relation_name_tokens(&relations[r]),
            );
        }
        tasks.push(Task {
            task_id: t,
            relations: rels.iter().map(|&r| relations[r].clone()).collect(),
            train,
            test,
        });
    }
    let benchmark = Benchmark::new(tasks, relation_names)?;
    Ok(SynthOutput {
        benchmark,
        kg,
        relations,
        profiles,
        ground_truth,
    })
}
