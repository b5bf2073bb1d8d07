use super::{Graph, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Worst per-coordinate relative error between the reverse-mode gradient of
/// a scalar function and central differences `(f(x+eps) - f(x-eps)) / 2eps`.
///
/// The relative error of one coordinate is `|a - n| / max(|a|, |n|, 1e-8)`.
/// `f` receives a fresh graph and the differentiable leaf holding `x`.
pub fn grad_check<'a, F>(f: F, x: &Tensor, eps: f64) -> Result<f64>
where
    F: Fn(&mut Graph<'a>, Var) -> Result<Var>,
{
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::arg("eps", "must be positive and finite"));
    }
    let eval = |t: Tensor, with_grad: bool| -> Result<(f64, Option<Vec<f64>>)> {
        let mut g = Graph::new();
        let leaf = g.leaf_owned(t.with_requires_grad(with_grad));
        let out = f(&mut g, leaf)?;
        if g.value(out).len() != 1 {
            return Err(Error::shape(
                "grad_check",
                format!("function must return a scalar, got shape {:?}", g.shape(out)),
            ));
        }
        let value = g.value(out)[0];
        if !with_grad {
            return Ok((value, None));
        }
        g.backward(out)?;
        let grad = g
            .take_grad(leaf)
            .unwrap_or_else(|| vec![0.0; g.value(leaf).len()]);
        Ok((value, Some(grad)))
    };

    let base = Tensor::new(x.shape(), x.data().to_vec())?;
    let (_, analytic) = eval(base.clone(), true)?;
    let analytic = analytic.expect("gradient requested");

    let mut worst = 0.0_f64;
    for (i, &a) in analytic.iter().enumerate() {
        let mut plus = base.clone();
        plus.data_mut()[i] += eps;
        let mut minus = base.clone();
        minus.data_mut()[i] -= eps;
        let (fp, _) = eval(plus, false)?;
        let (fm, _) = eval(minus, false)?;
        let numeric = (fp - fm) / (2.0 * eps);
        let denom = a.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((a - numeric).abs() / denom);
    }
    Ok(worst)
}
