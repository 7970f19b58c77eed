use alloc::vec::Vec;

use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{bail, Result};

const FLOOR: f64 = 1e-6;

/// Worst relative error between reverse-mode gradients and five-point
/// central differences of a scalar function.
///
/// `f` receives a fresh tape and one differentiable leaf per entry of
/// `params`; it must return a `1×1` value. Relative error per component is
/// `|a - n| / max(|a|, |n|, 1e-6)`. The floor keeps components that are zero
/// up to roundoff (for example a bias whose shift cancels in a softmax) from
/// turning finite-difference noise near 1e-11 into large relative errors.
pub fn gradient_check<F>(f: F, params: &[Tensor], eps: f64) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    if !(eps > 0.0) {
        bail!(Input, "eps must be positive, got {}", eps);
    }
    let eval = |ps: &[Tensor]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = ps.iter().map(|p| tape.variable(p.clone())).collect();
        let out = f(&mut tape, &vars)?;
        let v = tape.scalar(out);
        if !v.is_finite() {
            bail!(Numeric, "function value {}", v);
        }
        Ok(v)
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.variable(p.clone())).collect();
    let out = f(&mut tape, &vars)?;
    let grads = tape.backward(out)?;

    let mut worst = 0.0_f64;
    let mut work: Vec<Tensor> = params.to_vec();
    for (pi, p) in params.iter().enumerate() {
        let analytic = grads.get(vars[pi]).cloned().unwrap_or_else(|| Tensor::zeros(p.rows(), p.cols()));
        for k in 0..p.len() {
            let orig = p.data()[k];
            let mut at = |d: f64| -> Result<f64> {
                work[pi].data_mut()[k] = orig + d;
                eval(&work)
            };
            let (p1, m1, p2, m2) = (at(eps)?, at(-eps)?, at(2.0 * eps)?, at(-2.0 * eps)?);
            work[pi].data_mut()[k] = orig;
            let numeric = (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * eps);
            let a = analytic.data()[k];
            if !a.is_finite() {
                bail!(Numeric, "analytic gradient {}", a);
            }
            let denom = a.abs().max(numeric.abs()).max(FLOOR);
            worst = worst.max((a - numeric).abs() / denom);
        }
    }
    Ok(worst)
}
