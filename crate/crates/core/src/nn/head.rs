use rand::Rng;

use crate::autograd::{Graph, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Linear classifier `W·x + b` producing `C` logits.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearHead {
    /// `[C×in]`
    pub weights: Tensor,
    /// `[C]`
    pub bias: Tensor,
}

impl LinearHead {
    pub fn new<R: Rng>(input: usize, classes: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (input as f64).sqrt();
        let mut uniform =
            |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-bound..bound)).collect() };
        LinearHead {
            weights: Tensor::new(vec![classes, input], uniform(classes * input)).unwrap(),
            bias: Tensor::vector(uniform(classes)),
        }
    }

    pub fn from_parts(weights: Tensor, bias: Tensor) -> Result<Self> {
        if weights.shape().len() != 2 || bias.shape() != [weights.rows()] {
            return Err(Error::dimension("linear head", weights.shape(), bias.shape()));
        }
        Ok(LinearHead { weights, bias })
    }

    pub fn classes(&self) -> usize {
        self.weights.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn bind(&self, g: &mut Graph) -> BoundHead {
        BoundHead {
            weights: g.param(self.weights.clone()),
            bias: g.param(self.bias.clone()),
        }
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        vec![&self.weights, &self.bias]
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.weights, &mut self.bias]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BoundHead {
    pub weights: Var,
    pub bias: Var,
}

impl BoundHead {
    /// Logits for `x` of shape `[in]` or `[B×in]`.
    pub fn apply(&self, g: &mut Graph, x: Var) -> Result<Var> {
        g.linear(x, self.weights, Some(self.bias))
    }

    pub fn vars(&self) -> [Var; 2] {
        [self.weights, self.bias]
    }
}
