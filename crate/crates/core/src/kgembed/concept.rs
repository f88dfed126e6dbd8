use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::graph::KnowledgeGraph;
use super::transe::TransEModel;
use crate::datasets::io::{format_vector_table, parse_vector_table, read_text, write_text};
use crate::error::{Error, Result};
use crate::numerics::{dot, softmax, softmax_ce_loss, Adam, Mlp2, Mlp2Cache, Param, Parameterized, Rng, Tensor1};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Head,
    Tail,
}

/// Where a relation's side embedding is read from after training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extraction {
    /// The relation-side input vector of each network.
    #[default]
    RelationVectors,
    /// `Σ_c P(c|r) · MLP(v_c)`.
    WeightedConcepts,
}

impl FromStr for Extraction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relation_vectors" => Ok(Self::RelationVectors),
            "weighted_concepts" => Ok(Self::WeightedConcepts),
            other => Err(Error::Argument(format!("unknown extraction `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConceptConfig {
    pub d1: usize,
    pub d2: usize,
    /// Concept vector size when no TransE model is supplied.
    pub concept_dim: usize,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub extraction: Extraction,
}

impl Default for ConceptConfig {
    fn default() -> Self {
        Self {
            d1: 50,
            d2: 50,
            concept_dim: 50,
            lr: 5e-4,
            epochs: 40,
            batch_size: 32,
            extraction: Extraction::RelationVectors,
        }
    }
}

/// One triple expanded to the concept lists of its head and tail.
#[derive(Debug, Clone, PartialEq)]
pub struct ConceptPair {
    pub relation: usize,
    pub head_concepts: Vec<usize>,
    pub tail_concepts: Vec<usize>,
}

impl ConceptPair {
    fn targets(&self, side: Side) -> &[usize] {
        match side {
            Side::Head => &self.head_concepts,
            Side::Tail => &self.tail_concepts,
        }
    }
}

pub fn concept_pairs(kg: &KnowledgeGraph) -> Result<Vec<ConceptPair>> {
    if let Some(e) = kg.missing_concept() {
        return Err(Error::Data(format!("entity `{e}` has no concept")));
    }
    Ok(kg
        .triples
        .iter()
        .map(|t| ConceptPair {
            relation: t.relation,
            head_concepts: kg.concept_of[t.head].clone(),
            tail_concepts: kg.concept_of[t.tail].clone(),
        })
        .collect())
}

/// Separate head and tail scorers `NN(c, r) = MLP(v_c)ᵀ r` over a shared
/// concept table.
#[derive(Debug, Clone, PartialEq)]
pub struct ConceptModel {
    pub head_net: Mlp2,
    pub tail_net: Mlp2,
    pub concept_vectors: Param,
    pub relation_head: Param,
    pub relation_tail: Param,
    pub relation_names: Vec<String>,
    pub concept_names: Vec<String>,
}

impl Parameterized for ConceptModel {
    fn params(&self) -> Vec<&Param> {
        let mut p = self.head_net.params();
        p.extend(self.tail_net.params());
        p.extend([&self.concept_vectors, &self.relation_head, &self.relation_tail]);
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.head_net.params_mut();
        p.extend(self.tail_net.params_mut());
        p.extend([&mut self.concept_vectors, &mut self.relation_head, &mut self.relation_tail]);
        p
    }
}

struct SideForward {
    outputs: Vec<Vec<f64>>,
    caches: Vec<Mlp2Cache>,
}

impl ConceptModel {
    /// Concept vectors start at the mean TransE vector of their entities and
    /// relation vectors at the first `d2` TransE coordinates, when a TransE
    /// model is given; otherwise both are random.
    pub fn init(kg: &KnowledgeGraph, config: &ConceptConfig, transe: Option<&TransEModel>, rng: &mut Rng) -> Result<Self> {
        let nc = kg.num_concepts();
        let nr = kg.num_relations();
        if nc == 0 || nr == 0 {
            return Err(Error::Argument("concept model needs concepts and relations".into()));
        }
        let (concept_vectors, relation_head, relation_tail, cdim) = match transe {
            Some(m) => {
                if m.entity_vectors.value.rows() != kg.num_entities() || m.relation_vectors.value.rows() != nr {
                    return Err(Error::Dimension("TransE model does not match the graph".into()));
                }
                let dim = m.dim();
                if dim < config.d2 {
                    return Err(Error::Dimension(format!("TransE dim {dim} < d2 {}", config.d2)));
                }
                let mut cv = Param::zeros("concept.vectors", nc, dim);
                let mut counts = vec![0usize; nc];
                for (e, cs) in kg.concept_of.iter().enumerate() {
                    for &c in cs {
                        counts[c] += 1;
                        let src = m.entity_vectors.value.row(e);
                        for (d, v) in cv.value.row_mut(c).iter_mut().enumerate() {
                            *v += src[d];
                        }
                    }
                }
                let mut fill = rng.child_named("concept-fallback");
                for c in 0..nc {
                    if counts[c] == 0 {
                        let p = Param::uniform("tmp", 1, dim, 0.1, &mut fill);
                        cv.value.row_mut(c).copy_from_slice(p.value.row(0));
                    } else {
                        cv.value.row_mut(c).iter_mut().for_each(|v| *v /= counts[c] as f64);
                    }
                }
                let mut rh = Param::zeros("concept.relation_head", nr, config.d2);
                for r in 0..nr {
                    rh.value.row_mut(r).copy_from_slice(&m.relation_vectors.value.row(r)[..config.d2]);
                }
                let mut rt = rh.clone();
                rt.name = "concept.relation_tail".into();
                (cv, rh, rt, dim)
            }
            None => {
                let mut r = rng.child_named("concept-random");
                let s = 1.0 / (config.d2 as f64).sqrt();
                (
                    Param::uniform("concept.vectors", nc, config.concept_dim, 1.0, &mut r),
                    Param::uniform("concept.relation_head", nr, config.d2, s, &mut r),
                    Param::uniform("concept.relation_tail", nr, config.d2, s, &mut r),
                    config.concept_dim,
                )
            }
        };
        let mut net_rng = rng.child_named("concept-nets");
        Ok(Self {
            head_net: Mlp2::init("concept.head", cdim, config.d1, config.d2, &mut net_rng),
            tail_net: Mlp2::init("concept.tail", cdim, config.d1, config.d2, &mut net_rng),
            concept_vectors,
            relation_head,
            relation_tail,
            relation_names: kg.relations.names().to_vec(),
            concept_names: kg.concepts.names().to_vec(),
        })
    }

    pub fn num_concepts(&self) -> usize {
        self.concept_vectors.value.rows()
    }

    pub fn num_relations(&self) -> usize {
        self.relation_head.value.rows()
    }

    pub fn d2(&self) -> usize {
        self.relation_head.value.cols()
    }

    fn net(&self, side: Side) -> &Mlp2 {
        match side {
            Side::Head => &self.head_net,
            Side::Tail => &self.tail_net,
        }
    }

    fn relation_param(&self, side: Side) -> &Param {
        match side {
            Side::Head => &self.relation_head,
            Side::Tail => &self.relation_tail,
        }
    }

    pub fn relation_vector(&self, relation: usize, side: Side) -> Result<&[f64]> {
        self.check_relation(relation)?;
        Ok(self.relation_param(side).value.row(relation))
    }

    fn check_relation(&self, relation: usize) -> Result<()> {
        if relation >= self.num_relations() {
            return Err(Error::Lookup(format!("relation id {relation}")));
        }
        Ok(())
    }

    fn forward_side(&self, side: Side) -> Result<SideForward> {
        let net = self.net(side);
        let mut outputs = Vec::with_capacity(self.num_concepts());
        let mut caches = Vec::with_capacity(self.num_concepts());
        for c in 0..self.num_concepts() {
            let (o, cache) = net.forward(self.concept_vectors.value.row(c))?;
            outputs.push(o);
            caches.push(cache);
        }
        Ok(SideForward { outputs, caches })
    }

    fn logits_from(outputs: &[Vec<f64>], r: &[f64]) -> Vec<f64> {
        outputs.iter().map(|u| dot(u, r)).collect()
    }

    /// `P(c | r)` for every concept on one side.
    pub fn conceptual_distribution(&self, relation: usize, side: Side) -> Result<Vec<f64>> {
        self.check_relation(relation)?;
        let fwd = self.forward_side(side)?;
        Ok(softmax(&Self::logits_from(&fwd.outputs, self.relation_param(side).value.row(relation))))
    }

    pub fn concept_likelihood(&self, concept: usize, relation: usize, side: Side) -> Result<f64> {
        if concept >= self.num_concepts() {
            return Err(Error::Lookup(format!("concept id {concept}")));
        }
        Ok(self.conceptual_distribution(relation, side)?[concept])
    }

    /// Summed `−log P(h′|r) − log P(t′|r)` over `pairs`, accumulating
    /// `scale`-weighted gradients into every parameter.
    pub fn nll_backward(&mut self, pairs: &[ConceptPair], scale: f64) -> Result<f64> {
        let mut total = 0.0;
        for side in [Side::Head, Side::Tail] {
            let fwd = self.forward_side(side)?;
            let d2 = self.d2();
            let nc = self.num_concepts();
            let mut grad_out = vec![vec![0.0; d2]; nc];
            let mut touched = vec![false; nc];
            for pair in pairs {
                self.check_relation(pair.relation)?;
                let r = self.relation_param(side).value.row(pair.relation).to_vec();
                let logits = Self::logits_from(&fwd.outputs, &r);
                let mut grad_r = vec![0.0; d2];
                for &target in pair.targets(side) {
                    let (loss, probs) = softmax_ce_loss(&logits, target)?;
                    total += loss;
                    for c in 0..nc {
                        let g = scale * (probs[c] - if c == target { 1.0 } else { 0.0 });
                        if g == 0.0 {
                            continue;
                        }
                        touched[c] = true;
                        for d in 0..d2 {
                            grad_out[c][d] += g * r[d];
                            grad_r[d] += g * fwd.outputs[c][d];
                        }
                    }
                }
                let grad = match side {
                    Side::Head => &mut self.relation_head.grad,
                    Side::Tail => &mut self.relation_tail.grad,
                };
                for (d, g) in grad.row_mut(pair.relation).iter_mut().enumerate() {
                    *g += grad_r[d];
                }
            }
            for c in 0..nc {
                if !touched[c] {
                    continue;
                }
                let net = match side {
                    Side::Head => &mut self.head_net,
                    Side::Tail => &mut self.tail_net,
                };
                let gin = net.backward(&fwd.caches[c], &grad_out[c]);
                for (d, g) in self.concept_vectors.grad.row_mut(c).iter_mut().enumerate() {
                    *g += gin[d];
                }
            }
        }
        Ok(total)
    }

    pub fn nll(&self, pairs: &[ConceptPair]) -> Result<f64> {
        let mut total = 0.0;
        for side in [Side::Head, Side::Tail] {
            let fwd = self.forward_side(side)?;
            for pair in pairs {
                self.check_relation(pair.relation)?;
                let logits = Self::logits_from(&fwd.outputs, self.relation_param(side).value.row(pair.relation));
                for &t in pair.targets(side) {
                    total += softmax_ce_loss(&logits, t)?.0;
                }
            }
        }
        Ok(total)
    }
}

#[derive(Debug, Clone)]
pub struct ConceptTrained {
    pub model: ConceptModel,
    /// Mean NLL per triple; entry 0 is the initial model, then one per epoch.
    pub nll_trace: Vec<f64>,
}

pub fn train_concept_model(
    kg: &KnowledgeGraph,
    config: &ConceptConfig,
    transe: Option<&TransEModel>,
    rng: &mut Rng,
) -> Result<ConceptTrained> {
    let pairs = concept_pairs(kg)?;
    if pairs.is_empty() {
        return Err(Error::Argument("concept model needs at least one triple".into()));
    }
    let mut model = ConceptModel::init(kg, config, transe, rng)?;
    let adam = Adam::new(config.lr);
    let n = pairs.len() as f64;
    let mut nll_trace = vec![model.nll(&pairs)? / n];
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let batch = config.batch_size.max(1);
    for _ in 0..config.epochs {
        order.shuffle(rng);
        let mut total = 0.0;
        for chunk in order.chunks(batch) {
            let group: Vec<ConceptPair> = chunk.iter().map(|&i| pairs[i].clone()).collect();
            total += model.nll_backward(&group, 1.0 / group.len() as f64)?;
            adam.step(&mut model)?;
        }
        log::debug!("concept epoch nll {:.6}", total / n);
        nll_trace.push(model.nll(&pairs)? / n);
    }
    Ok(ConceptTrained { model, nll_trace })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelationEmbedding {
    pub relation: String,
    pub emd_h: Tensor1,
    pub emd_t: Tensor1,
    pub emd: Tensor1,
}

impl RelationEmbedding {
    pub fn new(relation: impl Into<String>, emd_h: Vec<f64>, emd_t: Vec<f64>) -> Result<Self> {
        let mut emd = emd_h.clone();
        emd.extend_from_slice(&emd_t);
        if emd.iter().all(|v| *v == 0.0) {
            return Err(Error::Degenerate("relation embedding is all zeros".into()));
        }
        Ok(Self {
            relation: relation.into(),
            emd_h: Tensor1::new(emd_h)?,
            emd_t: Tensor1::new(emd_t)?,
            emd: Tensor1::new(emd)?,
        })
    }
}

pub type RelationEmbeddings = BTreeMap<String, RelationEmbedding>;

pub fn export_relation_embeddings(model: &ConceptModel, extraction: Extraction) -> Result<RelationEmbeddings> {
    let mut out = BTreeMap::new();
    let fwd = match extraction {
        Extraction::RelationVectors => None,
        Extraction::WeightedConcepts => Some((model.forward_side(Side::Head)?, model.forward_side(Side::Tail)?)),
    };
    for (r, name) in model.relation_names.iter().enumerate() {
        let (h, t) = match &fwd {
            None => (
                model.relation_head.value.row(r).to_vec(),
                model.relation_tail.value.row(r).to_vec(),
            ),
            Some((fh, ft)) => {
                let weighted = |f: &SideForward, side: Side| {
                    let p = softmax(&ConceptModel::logits_from(&f.outputs, model.relation_param(side).value.row(r)));
                    let mut acc = vec![0.0; model.d2()];
                    for (pc, u) in p.iter().zip(&f.outputs) {
                        crate::numerics::axpy(*pc, u, &mut acc);
                    }
                    acc
                };
                (weighted(fh, Side::Head), weighted(ft, Side::Tail))
            }
        };
        out.insert(name.clone(), RelationEmbedding::new(name.clone(), h, t)?);
    }
    Ok(out)
}

/// `relation<TAB>f1 … f_{2·d2}`, sorted by relation id.
pub fn format_relation_embeddings(embeddings: &RelationEmbeddings) -> String {
    format_vector_table(embeddings.values().map(|e| (e.relation.as_str(), e.emd.as_slice())))
}

/// Rows must have even length; the first half is the head side.
pub fn parse_relation_embeddings(text: &str) -> Result<RelationEmbeddings> {
    let mut out = BTreeMap::new();
    for (i, (name, v)) in parse_vector_table(text)?.into_iter().enumerate() {
        if v.len() % 2 != 0 {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("embedding of `{name}` has odd length {}", v.len()),
            });
        }
        let half = v.len() / 2;
        out.insert(name.clone(), RelationEmbedding::new(name, v[..half].to_vec(), v[half..].to_vec())?);
    }
    Ok(out)
}

pub fn write_relation_embeddings(path: &Path, embeddings: &RelationEmbeddings) -> Result<()> {
    write_text(path, &format_relation_embeddings(embeddings))
}

pub fn load_relation_embeddings(path: &Path) -> Result<RelationEmbeddings> {
    parse_relation_embeddings(&read_text(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{finite_diff_check, Tensor2};

    fn small_kg() -> KnowledgeGraph {
        let kg = KnowledgeGraph::parse_tsv(
            "a\tlives_in\tx\nb\tlives_in\ty\na\tworks_for\tz\nc\tborn_in\tx\n",
            "a\tperson\nb\tperson\nc\tperson\nc\tartist\nx\tcity\ny\tcity\nz\tcompany\n",
        )
        .unwrap();
        kg
    }

    fn small_cfg() -> ConceptConfig {
        ConceptConfig { d1: 5, d2: 4, concept_dim: 3, ..ConceptConfig::default() }
    }

    #[test]
    fn zero_nets_give_uniform() {
        let kg = small_kg();
        let mut m = ConceptModel::init(&kg, &small_cfg(), None, &mut Rng::new(1, 0)).unwrap();
        m.head_net = Mlp2::zeros("h", 3, 5, 4);
        let p = m.conceptual_distribution(0, Side::Head).unwrap();
        for v in &p {
            assert!((v - 0.25).abs() < 1e-12);
        }
        assert!(m.concept_likelihood(9, 0, Side::Head).is_err());
        assert!(m.concept_likelihood(0, 9, Side::Head).is_err());
    }

    #[test]
    fn two_concept_hand_softmax() {
        // Identity first layer, second layer scaled so the scores are (ln 3, 0).
        let mut kg = KnowledgeGraph::new();
        kg.add_triple("a", "r", "b");
        kg.add_concept("a", "p");
        kg.add_concept("b", "q");
        let cfg = ConceptConfig { d1: 2, d2: 1, concept_dim: 2, ..ConceptConfig::default() };
        let mut m = ConceptModel::init(&kg, &cfg, None, &mut Rng::new(1, 0)).unwrap();
        m.head_net = Mlp2::zeros("h", 2, 2, 1);
        m.concept_vectors.value = Tensor2::identity(2);
        m.head_net.first.weight.value = Tensor2::identity(2);
        m.head_net.second.weight.value = Tensor2::new(1, 2, vec![3f64.ln() / 1f64.tanh(), 0.0]).unwrap();
        m.relation_head.value = Tensor2::new(1, 1, vec![1.0]).unwrap();
        let p = m.conceptual_distribution(0, Side::Head).unwrap();
        assert!((p[0] - 0.75).abs() < 1e-12, "{p:?}");
        assert!((p[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn concept_loss_gradient_check() {
        let kg = small_kg();
        let mut m = ConceptModel::init(&kg, &small_cfg(), None, &mut Rng::new(2, 0)).unwrap();
        let pairs = concept_pairs(&kg).unwrap();
        let err = finite_diff_check(&mut m, |m: &mut ConceptModel| m.nll_backward(&pairs[3..4], 1.0).unwrap(), 1e-5);
        assert!(err < 1e-4, "{err}");
        let err = finite_diff_check(&mut m, |m: &mut ConceptModel| m.nll_backward(&pairs, 0.5).unwrap() * 0.5, 1e-5);
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn missing_concept_is_data_error() {
        let kg = KnowledgeGraph::parse_tsv("a\tr\tb\n", "a\tx\n").unwrap();
        match train_concept_model(&kg, &small_cfg(), None, &mut Rng::new(1, 0)) {
            Err(Error::Data(msg)) => assert!(msg.contains("`b`")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn single_concept_probability_approaches_one() {
        let mut kg = KnowledgeGraph::new();
        for i in 0..6 {
            kg.add_triple(&format!("h{i}"), "r", &format!("t{i}"));
            kg.add_concept(&format!("h{i}"), "person");
            kg.add_concept(&format!("t{i}"), if i % 2 == 0 { "city" } else { "country" });
        }
        let cfg = ConceptConfig { d1: 8, d2: 6, concept_dim: 6, lr: 5e-3, epochs: 150, batch_size: 6, ..ConceptConfig::default() };
        let before = ConceptModel::init(&kg, &cfg, None, &mut Rng::new(5, 0)).unwrap();
        let p0 = before.concept_likelihood(kg.concept_id("person").unwrap(), 0, Side::Head).unwrap();
        let out = train_concept_model(&kg, &cfg, None, &mut Rng::new(5, 0)).unwrap();
        let p = out.model.concept_likelihood(kg.concept_id("person").unwrap(), 0, Side::Head).unwrap();
        assert!(p > 0.95 && p > p0, "{p0} -> {p}");
        assert!(out.nll_trace.last().unwrap() < &out.nll_trace[0]);
    }

    #[test]
    fn zero_epochs_keep_initialisation() {
        let kg = small_kg();
        let cfg = ConceptConfig { epochs: 0, ..small_cfg() };
        let init = ConceptModel::init(&kg, &cfg, None, &mut Rng::new(3, 0)).unwrap();
        let out = train_concept_model(&kg, &cfg, None, &mut Rng::new(3, 0)).unwrap();
        assert_eq!(out.model, init);
        assert_eq!(out.nll_trace.len(), 1);
    }

    #[test]
    fn distributions_sum_to_one() {
        let kg = small_kg();
        let m = ConceptModel::init(&kg, &small_cfg(), None, &mut Rng::new(4, 0)).unwrap();
        for r in 0..m.num_relations() {
            for side in [Side::Head, Side::Tail] {
                let s: f64 = m.conceptual_distribution(r, side).unwrap().iter().sum();
                assert!((s - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn export_shapes_and_round_trip() {
        let kg = small_kg();
        let m = ConceptModel::init(&kg, &ConceptConfig::default(), None, &mut Rng::new(4, 0)).unwrap();
        for extraction in [Extraction::RelationVectors, Extraction::WeightedConcepts] {
            let e = export_relation_embeddings(&m, extraction).unwrap();
            assert_eq!(e.len(), 3);
            let one = &e["lives_in"];
            assert_eq!(one.emd.len(), 100);
            assert_eq!(&one.emd[..50], one.emd_h.as_slice());
            let back = parse_relation_embeddings(&format_relation_embeddings(&e)).unwrap();
            assert_eq!(back, e);
        }
        let twin = RelationEmbedding::new("r", vec![1.0, 2.0], vec![1.0, 2.0]).unwrap();
        assert_eq!(twin.emd.as_slice(), &[1.0, 2.0, 1.0, 2.0]);
        assert!(RelationEmbedding::new("r", vec![0.0], vec![0.0]).is_err());
        assert!(parse_relation_embeddings("r\t1 2 3\n").is_err());
    }
}
