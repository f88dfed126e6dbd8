use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::datasets::{relation_name_tokens, Benchmark, Instance, InstanceEncoder, Vocabulary};
use crate::error::{Error, Result};
use crate::eval::Predictor;
use crate::numerics::{argmax, cosine_with_grad, softmax_ce_loss, Mlp2, Mlp2Cache, Param, Parameterized, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub embedding_dim: usize,
    pub hidden_dim: usize,
    pub output_dim: usize,
    /// Multiplier on cosine logits.
    pub temperature: f64,
    /// Half-width of the uniform token-embedding initialisation.
    pub embedding_scale: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            embedding_dim: 200,
            hidden_dim: 200,
            output_dim: 100,
            temperature: 10.0,
            embedding_scale: 0.01,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embedding_dim == 0 || self.hidden_dim == 0 || self.output_dim == 0 {
            return Err(Error::Config("model dimensions must be positive".into()));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::Config(format!("temperature must be positive, got {}", self.temperature)));
        }
        Ok(())
    }
}

/// Forward state of one encoded token sequence.
#[derive(Debug, Clone)]
pub struct Encoding {
    pub output: Vec<f64>,
    token_ids: Vec<usize>,
    cache: Mlp2Cache,
}

/// Bag-of-words relation extractor: sentences and relation names share one
/// token table and one MLP, and candidates are scored by scaled cosine.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractorModel {
    pub embedding: Param,
    pub encoder: Mlp2,
    pub temperature: f64,
    vocabulary: Vocabulary,
    relation_tokens: BTreeMap<String, Vec<String>>,
}

impl Parameterized for ExtractorModel {
    fn params(&self) -> Vec<&Param> {
        let mut p = vec![&self.embedding];
        p.extend(self.encoder.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = vec![&mut self.embedding];
        p.extend(self.encoder.params_mut());
        p
    }
}

impl ExtractorModel {
    pub fn new(benchmark: &Benchmark, config: &ModelConfig, rng: &mut Rng) -> Result<Self> {
        Self::with_vocabulary(benchmark.vocabulary.clone(), benchmark.relation_names.clone(), config, rng)
    }

    pub fn with_vocabulary(
        vocabulary: Vocabulary,
        relation_tokens: BTreeMap<String, Vec<String>>,
        config: &ModelConfig,
        rng: &mut Rng,
    ) -> Result<Self> {
        config.validate()?;
        let mut emb_rng = rng.child_named("embedding");
        let mut mlp_rng = rng.child_named("encoder");
        Ok(Self {
            embedding: Param::uniform("extractor.embedding", vocabulary.len(), config.embedding_dim, config.embedding_scale, &mut emb_rng),
            encoder: Mlp2::init("extractor.encoder", config.embedding_dim, config.hidden_dim, config.output_dim, &mut mlp_rng),
            temperature: config.temperature,
            vocabulary,
            relation_tokens,
        })
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn relation_tokens(&self, relation: &str) -> Vec<String> {
        self.relation_tokens
            .get(relation)
            .cloned()
            .unwrap_or_else(|| relation_name_tokens(relation))
    }

    /// Mean-pooled token embeddings passed through the encoder MLP. Unknown
    /// tokens map to the reserved index.
    pub fn encode_tokens(&self, tokens: &[String]) -> Result<Encoding> {
        if tokens.is_empty() {
            return Err(Error::Argument("cannot encode an empty token list".into()));
        }
        let token_ids: Vec<usize> = tokens.iter().map(|t| self.vocabulary.get(t)).collect();
        let d = self.embedding.value.cols();
        let mut pooled = vec![0.0; d];
        for &id in &token_ids {
            for (p, v) in pooled.iter_mut().zip(self.embedding.value.row(id)) {
                *p += v;
            }
        }
        let inv = 1.0 / token_ids.len() as f64;
        pooled.iter_mut().for_each(|p| *p *= inv);
        let (output, cache) = self.encoder.forward(&pooled)?;
        Ok(Encoding { output, token_ids, cache })
    }

    pub fn encode_instance(&self, instance: &Instance) -> Result<Vec<f64>> {
        Ok(self.encode_tokens(&instance.tokens)?.output)
    }

    pub fn encode_relation(&self, relation: &str) -> Result<Vec<f64>> {
        Ok(self.encode_tokens(&self.relation_tokens(relation))?.output)
    }

    fn backward_encoding(&mut self, enc: &Encoding, grad_out: &[f64]) {
        let grad_pooled = self.encoder.backward(&enc.cache, grad_out);
        let inv = 1.0 / enc.token_ids.len() as f64;
        for &id in &enc.token_ids {
            for (g, gp) in self.embedding.grad.row_mut(id).iter_mut().zip(&grad_pooled) {
                *g += gp * inv;
            }
        }
    }

    fn logits_against(&self, sentence: &[f64], relations: &[Vec<f64>]) -> Vec<f64> {
        relations
            .iter()
            .map(|r| self.temperature * cosine_with_grad(sentence, r).0)
            .collect()
    }

    /// Temperature-scaled cosine between the sentence and each candidate.
    pub fn score_candidates(&self, instance: &Instance, candidates: &[String]) -> Result<Vec<f64>> {
        if candidates.is_empty() {
            return Err(Error::Argument("no candidate relations".into()));
        }
        let s = self.encode_instance(instance)?;
        let rels = candidates
            .iter()
            .map(|c| self.encode_relation(c))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.logits_against(&s, &rels))
    }

    /// Summed cross-entropy of the gold relation over `candidates`,
    /// accumulating `scale`-weighted gradients.
    pub fn loss_backward(&mut self, batch: &[Instance], candidates: &[String], scale: f64) -> Result<f64> {
        if candidates.is_empty() {
            return Err(Error::Argument("no candidate relations".into()));
        }
        let rel_enc = candidates
            .iter()
            .map(|c| self.encode_tokens(&self.relation_tokens(c)))
            .collect::<Result<Vec<_>>>()?;
        let out_dim = self.encoder.d_out();
        let mut rel_grads = vec![vec![0.0; out_dim]; candidates.len()];
        let mut total = 0.0;
        for inst in batch {
            let target = candidates.iter().position(|c| *c == inst.relation).ok_or_else(|| {
                Error::Argument(format!("gold relation `{}` is not a candidate", inst.relation))
            })?;
            let s = self.encode_tokens(&inst.tokens)?;
            let mut logits = Vec::with_capacity(candidates.len());
            let mut grads = Vec::with_capacity(candidates.len());
            for r in &rel_enc {
                let (c, ds, dr) = cosine_with_grad(&s.output, &r.output);
                logits.push(self.temperature * c);
                grads.push((ds, dr));
            }
            let (loss, probs) = softmax_ce_loss(&logits, target)?;
            total += loss;
            let mut grad_s = vec![0.0; out_dim];
            for (c, (ds, dr)) in grads.iter().enumerate() {
                let g = scale * self.temperature * (probs[c] - if c == target { 1.0 } else { 0.0 });
                for d in 0..out_dim {
                    grad_s[d] += g * ds[d];
                    rel_grads[c][d] += g * dr[d];
                }
            }
            self.backward_encoding(&s, &grad_s);
        }
        for (enc, g) in rel_enc.iter().zip(&rel_grads) {
            self.backward_encoding(enc, g);
        }
        Ok(total)
    }

    /// Loss without touching gradients.
    pub fn loss(&self, batch: &[Instance], candidates: &[String]) -> Result<f64> {
        let rels = candidates
            .iter()
            .map(|c| self.encode_relation(c))
            .collect::<Result<Vec<_>>>()?;
        let mut total = 0.0;
        for inst in batch {
            let target = candidates
                .iter()
                .position(|c| *c == inst.relation)
                .ok_or_else(|| Error::Argument(format!("gold relation `{}` is not a candidate", inst.relation)))?;
            let logits = self.logits_against(&self.encode_instance(inst)?, &rels);
            total += softmax_ce_loss(&logits, target)?.0;
        }
        Ok(total)
    }
}

impl InstanceEncoder for ExtractorModel {
    fn encode(&self, instance: &Instance) -> Result<Vec<f64>> {
        self.encode_instance(instance)
    }
}

impl Predictor for ExtractorModel {
    fn predict(&self, instance: &Instance, candidates: &[String]) -> Result<usize> {
        let logits = self.score_candidates(instance, candidates)?;
        Ok(argmax(&logits).expect("non-empty candidates"))
    }

    fn predict_all(&self, instances: &[Instance], candidates: &[String]) -> Result<Vec<usize>> {
        if candidates.is_empty() {
            return Err(Error::Argument("no candidate relations".into()));
        }
        let rels = candidates
            .iter()
            .map(|c| self.encode_relation(c))
            .collect::<Result<Vec<_>>>()?;
        instances
            .iter()
            .map(|i| {
                let logits = self.logits_against(&self.encode_instance(i)?, &rels);
                Ok(argmax(&logits).expect("non-empty candidates"))
            })
            .collect()
    }
}

/// `θ + ε/N · Σ_i (θ*_i − θ)`, applied in place to `theta`.
pub fn reptile_aggregate<M: Parameterized>(theta: &mut M, adapted: &[M], epsilon: f64) -> Result<()> {
    if adapted.is_empty() {
        return Ok(());
    }
    let n = adapted.len() as f64;
    let adapted_params: Vec<Vec<&Param>> = adapted.iter().map(|m| m.params()).collect();
    for (p_idx, p) in theta.params_mut().into_iter().enumerate() {
        let mut delta = vec![0.0; p.len()];
        for a in &adapted_params {
            let ap = a.get(p_idx).ok_or_else(|| Error::Dimension("adapted model has fewer parameters".into()))?;
            if ap.shape() != p.shape() {
                return Err(Error::Dimension(format!(
                    "parameter `{}` shape {:?} vs {:?}",
                    p.name,
                    ap.shape(),
                    p.shape()
                )));
            }
            for ((d, a), t) in delta.iter_mut().zip(ap.value.as_slice()).zip(p.value.as_slice()) {
                *d += a - t;
            }
        }
        let k = epsilon / n;
        for (v, d) in p.value.as_mut_slice().iter_mut().zip(&delta) {
            *v += k * d;
        }
    }
    Ok(())
}

/// Replaces the Adam moments of `theta` with the mean over `adapted` and
/// advances its step count to theirs.
pub fn merge_optimizer_state<M: Parameterized>(theta: &mut M, adapted: &[M]) {
    if adapted.is_empty() {
        return;
    }
    let inv = 1.0 / adapted.len() as f64;
    let adapted_params: Vec<Vec<&Param>> = adapted.iter().map(|m| m.params()).collect();
    for (p_idx, p) in theta.params_mut().into_iter().enumerate() {
        let sources: Vec<&Param> = adapted_params.iter().filter_map(|a| a.get(p_idx).copied()).collect();
        if sources.iter().any(|a| a.shape() != p.shape()) {
            continue;
        }
        let m = p.adam_m.as_mut_slice();
        let v = p.adam_v.as_mut_slice();
        m.fill(0.0);
        v.fill(0.0);
        for a in &sources {
            for (dst, src) in m.iter_mut().zip(a.adam_m.as_slice()) {
                *dst += src * inv;
            }
            for (dst, src) in v.iter_mut().zip(a.adam_v.as_slice()) {
                *dst += src * inv;
            }
        }
        p.step_count = sources.iter().map(|a| a.step_count).max().unwrap_or(p.step_count);
    }
}
