use super::{Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Outcome of comparing reverse-mode gradients with central differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    /// Flat index of the worst element.
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    /// `‖analytic − fd‖₂ / max(‖analytic‖₂, ‖fd‖₂, 1e-300)` over the whole tensor.
    pub norm_rel_error: f64,
}

/// Evaluates `f` on a fresh tape with `x` as its only differentiable leaf.
fn analytic_grad<F>(f: &F, x: &Tensor<f64>) -> Result<Tensor<f64>>
where
    F: Fn(&mut Tape<f64>, Var) -> Result<Var>,
{
    let mut tape = Tape::new();
    let xv = tape.leaf(x.clone().with_requires_grad(true));
    let out = f(&mut tape, xv)?;
    if tape.value(out).len() != 1 {
        return Err(Error::InvalidArgument(format!(
            "grad_check needs a scalar function, got shape {:?}",
            tape.shape(out)
        )));
    }
    Ok(tape.backward(out)?.take(xv).expect("leaf gradient"))
}

/// Maximum over elements of `|analytic − fd| / max(|analytic|, |fd|, 1e-8)`,
/// with `fd` the central difference at step `eps`.
pub fn grad_check<F>(f: F, x: &Tensor<f64>, eps: f64) -> Result<f64>
where
    F: Fn(&mut Tape<f64>, Var) -> Result<Var>,
{
    grad_check_detailed(f, x, eps).map(|r| r.max_rel_error)
}

pub fn grad_check_detailed<F>(f: F, x: &Tensor<f64>, eps: f64) -> Result<GradCheck>
where
    F: Fn(&mut Tape<f64>, Var) -> Result<Var>,
{
    let grad = analytic_grad(&f, x)?;
    let mut report = GradCheck {
        max_rel_error: 0.0,
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        norm_rel_error: 0.0,
    };
    let (mut diff2, mut a2, mut n2) = (0.0, 0.0, 0.0);
    let mut probe = x.clone();
    for i in 0..x.len() {
        let orig = x.data()[i];
        probe.data_mut()[i] = orig + eps;
        let plus = eval_value(&f, &probe)?;
        probe.data_mut()[i] = orig - eps;
        let minus = eval_value(&f, &probe)?;
        probe.data_mut()[i] = orig;

        let numeric = (plus - minus) / (2.0 * eps);
        let analytic = grad.data()[i];
        let denom = analytic.abs().max(numeric.abs()).max(1e-8);
        let rel = (analytic - numeric).abs() / denom;
        diff2 += (analytic - numeric).powi(2);
        a2 += analytic * analytic;
        n2 += numeric * numeric;
        if rel > report.max_rel_error || !rel.is_finite() {
            report = GradCheck {
                max_rel_error: rel,
                worst_index: i,
                analytic,
                numeric,
                norm_rel_error: 0.0,
            };
        }
    }
    report.norm_rel_error = diff2.sqrt() / a2.sqrt().max(n2.sqrt()).max(1e-300);
    Ok(report)
}

fn eval_value<F>(f: &F, x: &Tensor<f64>) -> Result<f64>
where
    F: Fn(&mut Tape<f64>, Var) -> Result<Var>,
{
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let out = f(&mut tape, xv)?;
    Ok(tape.value(out).data()[0])
}
