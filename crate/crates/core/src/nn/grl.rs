use crate::autograd::{Graph, Var};
use crate::error::{Error, Result};

/// Gradient-reversal layer: identity on the forward pass, multiplies the
/// upstream gradient by `−λ` on the backward pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientReversal {
    lambda: f64,
}

impl Default for GradientReversal {
    fn default() -> Self {
        GradientReversal { lambda: 1.0 }
    }
}

impl GradientReversal {
    pub fn new(lambda: f64) -> Result<Self> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::Config(format!(
                "reversal scale must be finite and non-negative, got {lambda}"
            )));
        }
        Ok(GradientReversal { lambda })
    }

    /// Accepts any scale, including negative ones. Only for equivalence tests.
    #[cfg(any(test, feature = "test-hooks"))]
    pub fn unchecked(lambda: f64) -> Self {
        GradientReversal { lambda }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn apply(&self, g: &mut Graph, x: Var) -> Var {
        g.reverse_grad(x, -self.lambda)
    }
}
