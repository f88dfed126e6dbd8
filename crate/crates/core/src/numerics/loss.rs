use crate::error::{Error, Result};

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Softmax cross-entropy. Returns `(loss, probs)`; `probs - onehot(target)`
/// is the gradient of the loss with respect to the logits.
pub fn softmax_ce_loss(logits: &[f64], target_index: usize) -> Result<(f64, Vec<f64>)> {
    if target_index >= logits.len() {
        return Err(Error::IndexOutOfRange {
            index: target_index,
            len: logits.len(),
        });
    }
    let top = argmax(logits).expect("non-empty logits");
    let max = logits[top];
    // The max term contributes exactly 1; ln_1p keeps tiny losses precise.
    let rest: f64 = logits
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != top)
        .map(|(_, l)| (l - max).exp())
        .sum();
    let loss = (max - logits[target_index]) + rest.ln_1p();
    Ok((loss, softmax(logits)))
}

/// Index of the first maximum.
pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}
