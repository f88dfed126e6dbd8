use crate::datasets::{Benchmark, Instance};
use crate::error::{Error, Result};
use crate::numerics::inverse_normal_cdf;

/// Anything that picks one of `candidates` for an instance.
pub trait Predictor {
    /// Index into `candidates`.
    fn predict(&self, instance: &Instance, candidates: &[String]) -> Result<usize>;

    fn predict_all(&self, instances: &[Instance], candidates: &[String]) -> Result<Vec<usize>> {
        instances.iter().map(|i| self.predict(i, candidates)).collect()
    }
}

/// Fraction of `instances` whose predicted candidate equals the gold relation.
pub fn accuracy<P: Predictor + ?Sized>(model: &P, instances: &[Instance], candidates: &[String]) -> Result<f64> {
    if instances.is_empty() {
        return Err(Error::Argument("accuracy over an empty test set".into()));
    }
    let preds = model.predict_all(instances, candidates)?;
    let correct = instances
        .iter()
        .zip(preds)
        .filter(|(inst, p)| candidates[*p] == inst.relation)
        .count();
    Ok(correct as f64 / instances.len() as f64)
}

/// Micro accuracy over every test instance of the benchmark with all relations
/// as candidates.
pub fn whole_accuracy<P: Predictor + ?Sized>(model: &P, benchmark: &Benchmark) -> Result<f64> {
    let test: Vec<Instance> = benchmark.tasks.iter().flat_map(|t| t.test.iter().cloned()).collect();
    accuracy(model, &test, &benchmark.relations())
}

pub fn mean(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Argument("mean of an empty list".into()));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Mean accuracy over the tasks seen so far.
pub fn average_accuracy(per_task: &[f64]) -> Result<f64> {
    mean(per_task)
}

/// Standard deviation with the `n − 1` denominator.
pub fn sample_std(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::Argument(format!("sample std needs n >= 2, got {}", values.len())));
    }
    if values.iter().all(|v| *v == values[0]) {
        return Ok(0.0);
    }
    let m = mean(values)?;
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    Ok((ss / (values.len() - 1) as f64).sqrt())
}

/// Mean relative change between successive positions,
/// `1/(k−1) Σ (a[i+1] − a[i]) / a[i]`.
pub fn forgetting_rate(position_acc: &[f64]) -> Result<f64> {
    let k = position_acc.len();
    if k < 2 {
        return Err(Error::Argument(format!("forgetting rate needs k >= 2, got {k}")));
    }
    let mut sum = 0.0;
    for i in 0..k - 1 {
        if position_acc[i] == 0.0 {
            return Err(Error::Degenerate(format!("zero accuracy at position {}", i + 1)));
        }
        sum += (position_acc[i + 1] - position_acc[i]) / position_acc[i];
    }
    Ok(sum / (k - 1) as f64)
}

/// Two-sided normal half-width `z_{(1+confidence)/2} · s / √n`.
pub fn error_bound(values: &[f64], confidence: f64) -> Result<f64> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::Argument(format!("confidence must be in (0, 1), got {confidence}")));
    }
    let s = sample_std(values)?;
    let z = inverse_normal_cdf(1.0 - (1.0 - confidence) / 2.0)?;
    Ok(z * s / (values.len() as f64).sqrt())
}

pub fn pearson_cc(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!("pearson over {} vs {} values", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::Argument("pearson needs at least two points".into()));
    }
    let mx = mean(x)?;
    let my = mean(y)?;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("correlation with a constant series".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!("spearman over {} vs {} values", x.len(), y.len())));
    }
    pearson_cc(&average_ranks(x), &average_ranks(y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, proptest};

    struct Constant(usize);
    impl Predictor for Constant {
        fn predict(&self, _: &Instance, _: &[String]) -> Result<usize> {
            Ok(self.0)
        }
    }

    struct Oracle;
    impl Predictor for Oracle {
        fn predict(&self, inst: &Instance, candidates: &[String]) -> Result<usize> {
            Ok(candidates.iter().position(|c| *c == inst.relation).unwrap())
        }
    }

    fn balanced(rels: &[&str], per: usize) -> Vec<Instance> {
        rels.iter()
            .flat_map(|r| (0..per).map(move |i| Instance::new(format!("{r}{i}"), vec!["t".into()], *r).unwrap()))
            .collect()
    }

    #[test]
    fn accuracy_examples() {
        let rels = ["a", "b", "c", "d"];
        let data = balanced(&rels, 5);
        let cands: Vec<String> = rels.iter().map(|s| s.to_string()).collect();
        assert_eq!(accuracy(&Oracle, &data, &cands).unwrap(), 1.0);
        assert_eq!(accuracy(&Constant(2), &data, &cands).unwrap(), 0.25);
        assert!(accuracy(&Oracle, &[], &cands).is_err());
    }

    #[test]
    fn average_accuracy_examples() {
        assert_eq!(average_accuracy(&[1.0, 0.5]).unwrap(), 0.75);
        assert_eq!(average_accuracy(&[0.3]).unwrap(), 0.3);
        assert!(average_accuracy(&[]).is_err());
    }

    #[test]
    fn forgetting_rate_examples() {
        assert_eq!(forgetting_rate(&[0.4, 0.4, 0.4]).unwrap(), 0.0);
        assert!((forgetting_rate(&[0.5, 0.6]).unwrap() - 0.2).abs() < 1e-12);
        assert!((forgetting_rate(&[0.6, 0.5]).unwrap() + 1.0 / 6.0).abs() < 1e-12);
        assert!(matches!(forgetting_rate(&[0.0, 0.5]), Err(Error::Degenerate(_))));
        assert!(forgetting_rate(&[0.5]).is_err());
    }

    #[test]
    fn error_bound_examples() {
        assert_eq!(error_bound(&[0.7, 0.7, 0.7], 0.95).unwrap(), 0.0);
        // Sample std of [-a, -a, a, a] with a = sqrt(3)/2 is exactly 1.
        let a = 3f64.sqrt() / 2.0;
        let eb = error_bound(&[-a, -a, a, a], 0.95).unwrap();
        assert!((eb - 1.959963984540054 / 2.0).abs() < 1e-12, "{eb}");
        assert!(error_bound(&[1.0], 0.95).is_err());
    }

    #[test]
    fn pearson_examples() {
        let x = [1.0, 2.0, 3.0];
        assert!((pearson_cc(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson_cc(&x, &[-1.0, -2.0, -3.0]).unwrap() + 1.0).abs() < 1e-12);
        // Hand value: sxy = 5, sxx = 2, syy = 38/3.
        let r = pearson_cc(&x, &[2.0, 4.0, 7.0]).unwrap();
        assert!((r - 5.0 / (2f64.sqrt() * (38.0f64 / 3.0).sqrt())).abs() < 1e-12);
        assert!((r - 0.993399).abs() < 1e-6);
        assert!(pearson_cc(&x, &[1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn ranks_and_spearman() {
        assert_eq!(average_ranks(&[10.0, 30.0, 20.0, 20.0]), vec![1.0, 4.0, 2.5, 2.5]);
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((spearman(&x, &[1.0, 8.0, 27.0, 64.0]).unwrap() - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn eb_duplicate_halves_by_sqrt2(v in proptest::collection::vec(-5.0f64..5.0, 2..12)) {
            if sample_std(&v).unwrap() > 1e-6 {
                let mut d = v.clone();
                d.extend_from_slice(&v);
                // Duplicating reduces s slightly (n − 1 denominator), so compare the
                // exact rescaling instead of a bare 1/√2.
                let n = v.len() as f64;
                let expect = error_bound(&v, 0.95).unwrap() / 2f64.sqrt()
                    * ((n - 1.0) * 2.0 / (2.0 * n - 1.0)).sqrt();
                prop_assert!((error_bound(&d, 0.95).unwrap() - expect).abs() < 1e-12);
            }
        }

        #[test]
        fn forgetting_scale_invariant(v in proptest::collection::vec(0.05f64..1.0, 2..8), c in 0.1f64..10.0) {
            let s: Vec<f64> = v.iter().map(|x| x * c).collect();
            prop_assert!((forgetting_rate(&v).unwrap() - forgetting_rate(&s).unwrap()).abs() < 1e-9);
        }

        #[test]
        fn pearson_affine_invariant(
            x in proptest::collection::vec(-5.0f64..5.0, 3..10),
            a in 0.1f64..5.0,
            b in -3.0f64..3.0,
        ) {
            let y: Vec<f64> = x.iter().enumerate().map(|(i, v)| v * v + i as f64).collect();
            if let Ok(r) = pearson_cc(&x, &y) {
                let xs: Vec<f64> = x.iter().map(|v| a * v + b).collect();
                prop_assert!((pearson_cc(&xs, &y).unwrap() - r).abs() < 1e-9);
                prop_assert!((-1.0..=1.0).contains(&r));
            }
        }
    }
}
