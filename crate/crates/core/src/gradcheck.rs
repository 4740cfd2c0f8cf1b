//! Central finite-difference verification of analytic gradients.

use crate::autograd::{Graph, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Compares the reverse-mode gradient of a scalar function against central
/// differences `(f(x+εeᵢ) − f(x−εeᵢ)) / 2ε`, coordinate by coordinate.
///
/// `f` builds the function on a fresh graph from the input leaf it is given.
/// Returns the maximum of `|analytic − numeric| / max(|analytic|, |numeric|, 1e-8)`.
pub fn grad_check<F>(f: F, x: &Tensor, eps: f64) -> Result<f64>
where
    F: Fn(&mut Graph, Var) -> Result<Var>,
{
    Ok(grad_errors(f, x, eps)?.into_iter().fold(0.0, f64::max))
}

/// Per-coordinate relative errors behind [`grad_check`], in `x`'s row-major order.
pub fn grad_errors<F>(f: F, x: &Tensor, eps: f64) -> Result<Vec<f64>>
where
    F: Fn(&mut Graph, Var) -> Result<Var>,
{
    if !(1e-7..=1e-3).contains(&eps) {
        return Err(Error::Config(format!("finite-difference step {eps} outside [1e-7, 1e-3]")));
    }
    let eval = |point: &Tensor| -> Result<f64> {
        let mut g = Graph::new();
        let input = g.param(point.clone());
        let out = f(&mut g, input)?;
        let v = g.value(out);
        if !v.is_scalar() {
            return Err(Error::Evaluation(format!("function returned shape {:?}", v.shape())));
        }
        let v = v.data()[0];
        if !v.is_finite() {
            return Err(Error::Evaluation(format!("function value {v} is not finite")));
        }
        Ok(v)
    };

    let mut g = Graph::new();
    let input = g.param(x.clone());
    let out = f(&mut g, input)?;
    g.backward(out)?;
    let analytic = g.grad(input);

    let mut errors = Vec::with_capacity(x.numel());
    let mut probe = x.clone();
    for i in 0..x.numel() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + eps;
        let plus = eval(&probe)?;
        probe.data_mut()[i] = orig - eps;
        let minus = eval(&probe)?;
        probe.data_mut()[i] = orig;
        let numeric = (plus - minus) / (2.0 * eps);
        let a = analytic.data()[i];
        errors.push((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8));
    }
    Ok(errors)
}
