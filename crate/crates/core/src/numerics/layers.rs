use super::param::{Param, Parameterized};
use super::rng::Rng;
use super::tensor::{dot, Tensor1};
use crate::error::{Error, Result};

/// Affine layer `W x + b` with `W: out x in`, `b: out x 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Param,
    pub bias: Param,
}

impl Linear {
    pub fn new(weight: Param, bias: Param) -> Result<Self> {
        let (out, _) = weight.shape();
        if bias.shape() != (out, 1) {
            return Err(Error::Dimension(format!(
                "bias `{}` has shape {:?}, expected ({out}, 1)",
                bias.name,
                bias.shape()
            )));
        }
        Ok(Self { weight, bias })
    }

    /// Glorot-uniform weights, zero bias.
    pub fn init(name: &str, d_in: usize, d_out: usize, rng: &mut Rng) -> Self {
        let scale = (6.0 / (d_in + d_out) as f64).sqrt();
        Self {
            weight: Param::uniform(format!("{name}.weight"), d_out, d_in, scale, rng),
            bias: Param::zeros(format!("{name}.bias"), d_out, 1),
        }
    }

    pub fn d_in(&self) -> usize {
        self.weight.value.cols()
    }

    pub fn d_out(&self) -> usize {
        self.weight.value.rows()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.d_in() {
            return Err(Error::Dimension(format!(
                "`{}` expects input of length {}, got {}",
                self.weight.name,
                self.d_in(),
                x.len()
            )));
        }
        let w = &self.weight.value;
        let b = self.bias.value.as_slice();
        Ok((0..self.d_out()).map(|r| dot(w.row(r), x) + b[r]).collect())
    }

    /// Accumulates parameter gradients for input `x` and returns `dL/dx`.
    pub fn backward(&mut self, x: &[f64], grad_out: &[f64]) -> Vec<f64> {
        let d_in = self.d_in();
        let mut grad_in = vec![0.0; d_in];
        for (r, &g) in grad_out.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            self.bias.grad.as_mut_slice()[r] += g;
            let wrow = self.weight.value.row(r);
            for (gi, wi) in grad_in.iter_mut().zip(wrow) {
                *gi += g * wi;
            }
            let grow = self.weight.grad.row_mut(r);
            for (gw, xi) in grow.iter_mut().zip(x) {
                *gw += g * xi;
            }
        }
        grad_in
    }
}

impl Parameterized for Linear {
    fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// `linear_forward(x, W, b) = W x + b`.
pub fn linear_forward(x: &Tensor1, weight: &Param, bias: &Param) -> Result<Tensor1> {
    let layer = Linear::new(weight.clone(), bias.clone())?;
    layer.forward(x).map(Tensor1::from_vec_unchecked)
}

/// Activations kept from a forward pass of [`Mlp2`].
#[derive(Debug, Clone)]
pub struct Mlp2Cache {
    pub input: Vec<f64>,
    pub hidden: Vec<f64>,
}

/// Two-layer perceptron `W2 tanh(W1 x + b1) + b2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp2 {
    pub first: Linear,
    pub second: Linear,
}

impl Mlp2 {
    pub fn new(first: Linear, second: Linear) -> Result<Self> {
        if first.d_out() != second.d_in() {
            return Err(Error::Dimension(format!(
                "mlp layers {} -> {} and {} -> {} do not chain",
                first.d_in(),
                first.d_out(),
                second.d_in(),
                second.d_out()
            )));
        }
        Ok(Self { first, second })
    }

    pub fn init(name: &str, d_in: usize, d_hidden: usize, d_out: usize, rng: &mut Rng) -> Self {
        Self {
            first: Linear::init(&format!("{name}.l1"), d_in, d_hidden, rng),
            second: Linear::init(&format!("{name}.l2"), d_hidden, d_out, rng),
        }
    }

    pub fn zeros(name: &str, d_in: usize, d_hidden: usize, d_out: usize) -> Self {
        Self {
            first: Linear {
                weight: Param::zeros(format!("{name}.l1.weight"), d_hidden, d_in),
                bias: Param::zeros(format!("{name}.l1.bias"), d_hidden, 1),
            },
            second: Linear {
                weight: Param::zeros(format!("{name}.l2.weight"), d_out, d_hidden),
                bias: Param::zeros(format!("{name}.l2.bias"), d_out, 1),
            },
        }
    }

    pub fn d_in(&self) -> usize {
        self.first.d_in()
    }

    pub fn d_out(&self) -> usize {
        self.second.d_out()
    }

    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, Mlp2Cache)> {
        let hidden: Vec<f64> = self.first.forward(x)?.into_iter().map(f64::tanh).collect();
        let out = self.second.forward(&hidden)?;
        Ok((
            out,
            Mlp2Cache {
                input: x.to_vec(),
                hidden,
            },
        ))
    }

    pub fn backward(&mut self, cache: &Mlp2Cache, grad_out: &[f64]) -> Vec<f64> {
        let grad_hidden = self.second.backward(&cache.hidden, grad_out);
        let grad_pre: Vec<f64> = grad_hidden
            .iter()
            .zip(&cache.hidden)
            .map(|(g, h)| g * (1.0 - h * h))
            .collect();
        self.first.backward(&cache.input, &grad_pre)
    }
}

impl Parameterized for Mlp2 {
    fn params(&self) -> Vec<&Param> {
        let mut v = self.first.params();
        v.extend(self.second.params());
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v = self.first.params_mut();
        v.extend(self.second.params_mut());
        v
    }
}

/// `mlp2_forward(x, net)`: second-layer output of a tanh two-layer net.
pub fn mlp2_forward(x: &Tensor1, net: &Mlp2) -> Result<Tensor1> {
    net.forward(x).map(|(out, _)| Tensor1::from_vec_unchecked(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::gradcheck::finite_diff_check;
    use crate::numerics::tensor::Tensor2;

    fn param(name: &str, rows: usize, cols: usize, data: Vec<f64>) -> Param {
        Param::new(name, Tensor2::new(rows, cols, data).unwrap())
    }

    #[test]
    fn linear_identity_and_zero_weights() {
        let x = Tensor1::new(vec![3.0, 4.0]).unwrap();
        let w = Param::new("w", Tensor2::identity(2));
        let b = Param::zeros("b", 2, 1);
        assert_eq!(linear_forward(&x, &w, &b).unwrap().as_slice(), &[3.0, 4.0]);

        let w = Param::zeros("w", 2, 2);
        let b = param("b", 2, 1, vec![1.0, 2.0]);
        assert_eq!(linear_forward(&x, &w, &b).unwrap().as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn linear_hand_product() {
        let x = Tensor1::new(vec![1.0, 1.0]).unwrap();
        let w = param("w", 2, 2, vec![1.0, 2.0, 3.0, 4.0]);
        let b = Param::zeros("b", 2, 1);
        assert_eq!(linear_forward(&x, &w, &b).unwrap().as_slice(), &[3.0, 7.0]);
    }

    #[test]
    fn linear_shape_mismatch() {
        let x = Tensor1::new(vec![1.0, 1.0, 1.0]).unwrap();
        let w = Param::zeros("w", 2, 2);
        let b = Param::zeros("b", 2, 1);
        assert!(matches!(linear_forward(&x, &w, &b), Err(Error::Dimension(_))));
        let b3 = Param::zeros("b", 3, 1);
        assert!(Linear::new(w, b3).is_err());
    }

    #[test]
    fn mlp2_examples() {
        let zero = Mlp2::zeros("z", 3, 4, 2);
        let x = Tensor1::new(vec![0.5, -1.0, 2.0]).unwrap();
        assert_eq!(mlp2_forward(&x, &zero).unwrap().as_slice(), &[0.0, 0.0]);

        let unit = |w1: f64, b1: f64, w2: f64, b2: f64| {
            Mlp2::new(
                Linear::new(param("w1", 1, 1, vec![w1]), param("b1", 1, 1, vec![b1])).unwrap(),
                Linear::new(param("w2", 1, 1, vec![w2]), param("b2", 1, 1, vec![b2])).unwrap(),
            )
            .unwrap()
        };
        let net = unit(1.0, 0.0, 1.0, 0.0);
        let out = mlp2_forward(&Tensor1::new(vec![0.0]).unwrap(), &net).unwrap();
        assert_eq!(out.as_slice(), &[0.0]);

        let net = unit(1.0, 0.0, 2.0, 0.5);
        let out = mlp2_forward(&Tensor1::new(vec![1.0]).unwrap(), &net).unwrap();
        // tanh(1) = 0.7615941559557649
        assert!((out[0] - (2.0 * 0.761_594_155_955_764_9 + 0.5)).abs() < 1e-12);
        assert!((out[0] - 2.0232).abs() < 1e-4);
    }

    #[test]
    fn mlp2_gradients_pass_finite_difference() {
        let mut rng = Rng::new(11, 0);
        let mut net = Mlp2::init("net", 4, 5, 3, &mut rng);
        for p in net.params_mut() {
            for v in p.value.as_mut_slice() {
                *v += 0.05;
            }
        }
        let x = vec![0.3, -0.8, 1.1, 0.2];
        let target = [0.5, -0.2, 0.9];
        let err = finite_diff_check(
            &mut net,
            |n: &mut Mlp2| {
                let (out, cache) = n.forward(&x).unwrap();
                let grad: Vec<f64> = out.iter().zip(&target).map(|(o, t)| o - t).collect();
                n.backward(&cache, &grad);
                0.5 * grad.iter().map(|g| g * g).sum::<f64>()
            },
            1e-5,
        );
        assert!(err < 1e-4, "max relative error {err}");
    }
}
