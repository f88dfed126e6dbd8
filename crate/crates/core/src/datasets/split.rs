use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use super::types::Instance;
use crate::error::{Error, Result};
use crate::numerics::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Vec<Instance>,
    pub test: Vec<Instance>,
    pub warnings: Vec<String>,
}

/// Stratified train/test split.
///
/// Each relation sends `round(n * test_fraction)` instances to test, clamped
/// so that relations with at least two instances keep one on each side. A
/// relation with a single instance goes to train with a warning. File order is
/// preserved within each side.
pub fn split_train_test(instances: &[Instance], test_fraction: f64, rng: &mut Rng) -> Result<Split> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Argument(format!(
            "test fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    let mut by_relation: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    let mut order: Vec<&str> = Vec::new();
    for (i, inst) in instances.iter().enumerate() {
        let entry = by_relation.entry(inst.relation.as_str()).or_default();
        if entry.is_empty() {
            order.push(inst.relation.as_str());
        }
        entry.push(i);
    }

    let mut is_test = vec![false; instances.len()];
    let mut warnings = Vec::new();
    for rel in order {
        let idx = &by_relation[rel];
        let n = idx.len();
        if n < 2 {
            let msg = format!("relation `{rel}` has a single instance; kept in train");
            log::warn!("{msg}");
            warnings.push(msg);
            continue;
        }
        let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
        let mut shuffled = idx.clone();
        shuffled.shuffle(rng);
        for &i in &shuffled[..n_test] {
            is_test[i] = true;
        }
    }

    let mut train = Vec::new();
    let mut test = Vec::new();
    for (inst, t) in instances.iter().zip(is_test) {
        if t {
            test.push(inst.clone());
        } else {
            train.push(inst.clone());
        }
    }
    Ok(Split {
        train,
        test,
        warnings,
    })
}
