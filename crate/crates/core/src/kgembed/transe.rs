use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::graph::{KnowledgeGraph, Triple};
use crate::error::{Error, Result};
use crate::numerics::{Adam, Param, Parameterized, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransEConfig {
    pub dim: usize,
    pub margin: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for TransEConfig {
    fn default() -> Self {
        Self {
            dim: 200,
            margin: 1.0,
            lr: 1e-3,
            epochs: 50,
            batch_size: 64,
        }
    }
}

/// Translation embeddings: a triple is plausible when `h + r ≈ t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransEModel {
    pub entity_vectors: Param,
    pub relation_vectors: Param,
    pub margin: f64,
}

impl Parameterized for TransEModel {
    fn params(&self) -> Vec<&Param> {
        vec![&self.entity_vectors, &self.relation_vectors]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.entity_vectors, &mut self.relation_vectors]
    }
}

impl TransEModel {
    pub fn init(num_entities: usize, num_relations: usize, config: &TransEConfig, rng: &mut Rng) -> Self {
        let bound = 6.0 / (config.dim as f64).sqrt();
        let mut model = Self {
            entity_vectors: Param::uniform("transe.entity", num_entities, config.dim, bound, rng),
            relation_vectors: Param::uniform("transe.relation", num_relations, config.dim, bound, rng),
            margin: config.margin,
        };
        model.normalize_entities();
        model
    }

    pub fn dim(&self) -> usize {
        self.entity_vectors.value.cols()
    }

    pub fn normalize_entities(&mut self) {
        let ev = &mut self.entity_vectors.value;
        for e in 0..ev.rows() {
            let row = ev.row_mut(e);
            let n = crate::numerics::norm(row);
            if n > 0.0 {
                row.iter_mut().for_each(|v| *v /= n);
            }
        }
    }

    fn check(&self, t: Triple) -> Result<()> {
        let ne = self.entity_vectors.value.rows();
        let nr = self.relation_vectors.value.rows();
        if t.head >= ne || t.tail >= ne {
            return Err(Error::Lookup(format!("entity id {} / {}", t.head, t.tail)));
        }
        if t.relation >= nr {
            return Err(Error::Lookup(format!("relation id {}", t.relation)));
        }
        Ok(())
    }

    fn residual(&self, t: Triple) -> Vec<f64> {
        let h = self.entity_vectors.value.row(t.head);
        let r = self.relation_vectors.value.row(t.relation);
        let tl = self.entity_vectors.value.row(t.tail);
        h.iter().zip(r).zip(tl).map(|((h, r), t)| h + r - t).collect()
    }

    /// `‖v_h + v_r − v_t‖₂`; lower is more plausible.
    pub fn score(&self, t: Triple) -> Result<f64> {
        self.check(t)?;
        Ok(crate::numerics::norm(&self.residual(t)))
    }

    /// Accumulates `scale · ∂‖h + r − t‖/∂θ`.
    fn accumulate_score_grad(&mut self, t: Triple, scale: f64) {
        let res = self.residual(t);
        let n = crate::numerics::norm(&res);
        if n == 0.0 {
            return;
        }
        let g: Vec<f64> = res.iter().map(|v| scale * v / n).collect();
        let eg = &mut self.entity_vectors.grad;
        for (d, gv) in g.iter().enumerate() {
            eg.row_mut(t.head)[d] += gv;
            eg.row_mut(t.tail)[d] -= gv;
        }
        let rg = self.relation_vectors.grad.row_mut(t.relation);
        for (d, gv) in g.iter().enumerate() {
            rg[d] += gv;
        }
    }

    /// `max(0, margin + score(pos) − score(neg))`, accumulating `scale`-weighted
    /// gradients when the hinge is active.
    pub fn margin_loss(&mut self, pos: Triple, neg: Triple, scale: f64) -> Result<f64> {
        let loss = (self.margin + self.score(pos)? - self.score(neg)?).max(0.0);
        if loss > 0.0 {
            self.accumulate_score_grad(pos, scale);
            self.accumulate_score_grad(neg, -scale);
        }
        Ok(loss)
    }
}

/// Replaces the head or the tail (uniformly) with a different random entity.
pub fn corrupt(t: Triple, num_entities: usize, rng: &mut Rng) -> Triple {
    let mut out = t;
    let replace_head = rng.gen_bool(0.5);
    loop {
        let e = rng.gen_range(0..num_entities);
        if replace_head {
            out.head = e;
        } else {
            out.tail = e;
        }
        if out != t || num_entities < 2 {
            return out;
        }
    }
}

#[derive(Debug, Clone)]
pub struct TransETrained {
    pub model: TransEModel,
    /// Mean margin loss per triple, one entry per epoch.
    pub loss_trace: Vec<f64>,
}

/// Margin-ranking TransE with one corrupted sample per positive and Adam.
pub fn train_transe(kg: &KnowledgeGraph, config: &TransEConfig, rng: &mut Rng) -> Result<TransETrained> {
    if kg.triples.is_empty() {
        return Err(Error::Argument("TransE needs at least one triple".into()));
    }
    let mut init_rng = rng.child_named("transe-init");
    let mut model = TransEModel::init(kg.num_entities(), kg.num_relations(), config, &mut init_rng);
    let adam = Adam::new(config.lr);
    let mut order: Vec<usize> = (0..kg.triples.len()).collect();
    let mut loss_trace = Vec::with_capacity(config.epochs);
    let batch = config.batch_size.max(1);
    for _ in 0..config.epochs {
        order.shuffle(rng);
        let mut total = 0.0;
        for chunk in order.chunks(batch) {
            let scale = 1.0 / chunk.len() as f64;
            for &i in chunk {
                let pos = kg.triples[i];
                let neg = corrupt(pos, kg.num_entities(), rng);
                total += model.margin_loss(pos, neg, scale)?;
            }
            adam.step(&mut model)?;
        }
        model.normalize_entities();
        loss_trace.push(total / kg.triples.len() as f64);
    }
    Ok(TransETrained { model, loss_trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{finite_diff_check, Tensor2};

    fn toy_kg(n_triples: usize, seed: u64) -> KnowledgeGraph {
        // Entities e0..e19 with relation k mapping e_i to e_{(i + k + 1) % 20}.
        let mut rng = Rng::new(seed, 0);
        let mut kg = KnowledgeGraph::new();
        for _ in 0..n_triples {
            let i = rng.gen_range(0..20);
            let k = rng.gen_range(0..4);
            kg.add_triple(&format!("e{i}"), &format!("r{k}"), &format!("e{}", (i + 3 * k + 1) % 20));
        }
        kg
    }

    fn model_from(entities: Vec<f64>, relations: Vec<f64>, dim: usize) -> TransEModel {
        TransEModel {
            entity_vectors: Param::new("e", Tensor2::new(entities.len() / dim, dim, entities).unwrap()),
            relation_vectors: Param::new("r", Tensor2::new(relations.len() / dim, dim, relations).unwrap()),
            margin: 1.0,
        }
    }

    #[test]
    fn score_examples() {
        let m = model_from(vec![1.0, 0.0, 0.0, 0.0, 1.0, 1.0], vec![0.0, 1.0], 2);
        let t = |h, r, tl| Triple { head: h, relation: r, tail: tl };
        assert!((m.score(t(0, 0, 1)).unwrap() - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(m.score(t(0, 0, 2)).unwrap(), 0.0);
        assert!(m.score(t(0, 1, 1)).is_err());
        assert!(m.score(t(5, 0, 1)).is_err());
    }

    #[test]
    fn margin_loss_gradient_check() {
        let mut rng = Rng::new(4, 0);
        let cfg = TransEConfig { dim: 6, ..TransEConfig::default() };
        let mut m = TransEModel::init(5, 2, &cfg, &mut rng);
        let pos = Triple { head: 0, relation: 1, tail: 2 };
        let neg = Triple { head: 0, relation: 1, tail: 4 };
        assert!(m.margin_loss(pos, neg, 0.0).unwrap() > 0.0);
        let err = finite_diff_check(&mut m, |m: &mut TransEModel| m.margin_loss(pos, neg, 1.0).unwrap(), 1e-5);
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn training_separates_true_from_corrupted() {
        let kg = toy_kg(200, 1);
        let cfg = TransEConfig { dim: 20, epochs: 60, batch_size: 20, ..TransEConfig::default() };
        let out = train_transe(&kg, &cfg, &mut Rng::new(2, 0)).unwrap();
        assert!(out.loss_trace.iter().all(|l| *l >= 0.0));
        assert!(out.loss_trace.last().unwrap() < out.loss_trace.first().unwrap());
        let mut rng = Rng::new(3, 0);
        let mut pos = 0.0;
        let mut neg = 0.0;
        for &t in &kg.triples {
            pos += out.model.score(t).unwrap();
            neg += out.model.score(corrupt(t, kg.num_entities(), &mut rng)).unwrap();
        }
        assert!(pos < neg, "true {pos} vs corrupted {neg}");
        for e in 0..kg.num_entities() {
            let n = crate::numerics::norm(out.model.entity_vectors.value.row(e));
            assert!((n - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn empty_graph_is_rejected() {
        let kg = KnowledgeGraph::new();
        assert!(matches!(
            train_transe(&kg, &TransEConfig::default(), &mut Rng::new(1, 0)),
            Err(Error::Argument(_))
        ));
    }
}
