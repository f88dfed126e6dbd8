use super::param::{Param, Parameterized};
use crate::error::{Error, Result};

/// Bias-corrected Adam.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// Updates every parameter in place and zeroes the gradients. No value is
    /// touched if any gradient is non-finite.
    ///
    /// Coordinates whose gradient is exactly zero are skipped, moments
    /// included, so rows of an embedding table absent from a batch stay put.
    pub fn step<M: Parameterized + ?Sized>(&self, model: &mut M) -> Result<()> {
        let mut params = model.params_mut();
        self.step_params(&mut params)
    }

    pub fn step_params(&self, params: &mut [&mut Param]) -> Result<()> {
        if let Some(bad) = params.iter().find(|p| !p.grad_is_finite()) {
            return Err(Error::NonFinite {
                param: bad.name.clone(),
            });
        }
        for p in params.iter_mut() {
            self.update(p);
        }
        Ok(())
    }

    fn update(&self, p: &mut Param) {
        p.step_count += 1;
        let t = p.step_count as f64;
        let c1 = 1.0 - self.beta1.powf(t);
        let c2 = 1.0 - self.beta2.powf(t);
        let Param {
            value,
            grad,
            adam_m,
            adam_v,
            ..
        } = p;
        let values = value.as_mut_slice();
        let grads = grad.as_mut_slice();
        let ms = adam_m.as_mut_slice();
        let vs = adam_v.as_mut_slice();
        for i in 0..values.len() {
            let g = grads[i];
            if g == 0.0 {
                continue;
            }
            let m = self.beta1 * ms[i] + (1.0 - self.beta1) * g;
            let v = self.beta2 * vs[i] + (1.0 - self.beta2) * g * g;
            ms[i] = m;
            vs[i] = v;
            values[i] -= self.lr * (m / c1) / ((v / c2).sqrt() + self.eps);
            grads[i] = 0.0;
        }
    }
}

/// `adam_step(params, lr)` with the default betas and epsilon.
pub fn adam_step<M: Parameterized + ?Sized>(model: &mut M, lr: f64) -> Result<()> {
    Adam::new(lr).step(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::tensor::Tensor2;

    fn scalar(v: f64) -> Param {
        Param::new("v", Tensor2::new(1, 1, vec![v]).unwrap())
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut ps = vec![
            Param::new("a", Tensor2::new(2, 2, vec![1.0, -2.0, 3.0, 0.5]).unwrap()),
            scalar(7.0),
        ];
        let before: Vec<_> = ps.iter().map(|p| p.value.clone()).collect();
        adam_step(&mut ps, 0.1).unwrap();
        let after: Vec<_> = ps.iter().map(|p| p.value.clone()).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn zero_gradient_after_earlier_steps_is_a_no_op() {
        let mut p = scalar(1.0);
        p.grad.as_mut_slice()[0] = 0.5;
        adam_step(&mut p, 0.1).unwrap();
        let v = p.value.clone();
        adam_step(&mut p, 0.1).unwrap();
        assert_eq!(p.value, v);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut p = scalar(0.0);
        p.grad.as_mut_slice()[0] = 1.0;
        adam_step(&mut p, 0.1).unwrap();
        // m̂ = 1, v̂ = 1 → step = 0.1 / (1 + 1e-8)
        assert!((p.value.as_slice()[0] + 0.1).abs() < 1e-8);
        assert_eq!(p.grad.as_slice()[0], 0.0);
        assert_eq!(p.step_count, 1);
    }

    #[test]
    fn identical_inputs_identical_states() {
        let mut a = vec![scalar(0.3), scalar(-1.0)];
        let mut b = a.clone();
        for step in 0..5 {
            for (pa, pb) in a.iter_mut().zip(b.iter_mut()) {
                let g = 0.1 * step as f64 - pa.value.as_slice()[0];
                pa.grad.as_mut_slice()[0] = g;
                pb.grad.as_mut_slice()[0] = g;
            }
            adam_step(&mut a, 0.01).unwrap();
            adam_step(&mut b, 0.01).unwrap();
        }
        assert_eq!(a, b);
    }

    #[test]
    fn non_finite_gradient_names_param() {
        let mut ps = vec![scalar(1.0), scalar(2.0)];
        ps[1].name = "bad".into();
        ps[0].grad.as_mut_slice()[0] = 1.0;
        ps[1].grad.as_mut_slice()[0] = f64::NAN;
        let err = adam_step(&mut ps, 0.1).unwrap_err();
        assert!(matches!(err, Error::NonFinite { ref param } if param == "bad"));
        assert_eq!(ps[0].value.as_slice()[0], 1.0);
    }
}
