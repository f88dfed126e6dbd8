use rand::Rng as _;

use super::rng::Rng;
use super::tensor::Tensor2;
use crate::error::{Error, Result};

/// A trainable tensor with its gradient and Adam moment buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor2,
    pub grad: Tensor2,
    pub adam_m: Tensor2,
    pub adam_v: Tensor2,
    pub step_count: u64,
}

impl Param {
    pub fn new(name: impl Into<String>, value: Tensor2) -> Self {
        let (r, c) = value.shape();
        Self {
            name: name.into(),
            value,
            grad: Tensor2::zeros(r, c),
            adam_m: Tensor2::zeros(r, c),
            adam_v: Tensor2::zeros(r, c),
            step_count: 0,
        }
    }

    pub fn zeros(name: impl Into<String>, rows: usize, cols: usize) -> Self {
        Self::new(name, Tensor2::zeros(rows, cols))
    }

    /// Uniform init in `[-scale, scale]`.
    pub fn uniform(name: impl Into<String>, rows: usize, cols: usize, scale: f64, rng: &mut Rng) -> Self {
        let data = (0..rows * cols)
            .map(|_| rng.gen_range(-scale..=scale))
            .collect();
        Self::new(name, Tensor2::new(rows, cols, data).expect("finite init"))
    }

    pub fn shape(&self) -> (usize, usize) {
        self.value.shape()
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    pub fn grad_is_finite(&self) -> bool {
        self.grad.as_slice().iter().all(|g| g.is_finite())
    }

    pub fn set_value(&mut self, value: Tensor2) -> Result<()> {
        if value.shape() != self.shape() {
            return Err(Error::Dimension(format!(
                "param `{}` has shape {:?}, got {:?}",
                self.name,
                self.shape(),
                value.shape()
            )));
        }
        self.value = value;
        Ok(())
    }
}

/// Anything that owns an ordered, named set of parameters.
///
/// The order returned by `params` and `params_mut` must agree.
pub trait Parameterized {
    fn params(&self) -> Vec<&Param>;
    fn params_mut(&mut self) -> Vec<&mut Param>;

    fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    fn num_values(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }
}

impl Parameterized for Param {
    fn params(&self) -> Vec<&Param> {
        vec![self]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![self]
    }
}

impl Parameterized for Vec<Param> {
    fn params(&self) -> Vec<&Param> {
        self.iter().collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        self.iter_mut().collect()
    }
}
