use crate::data::LabelSet;
use crate::error::{Error, Result};
use crate::numerics::{Scalar, Tape, Tensor, Var};

/// Targets for one sample as tensors.
#[derive(Debug, Clone)]
pub struct Targets<T> {
    pub y_start: Tensor<T>,
    pub y_end: Tensor<T>,
    pub y_moment: Tensor<T>,
}

impl<T: Scalar> Targets<T> {
    pub fn from_labels(labels: &LabelSet) -> Self {
        Self {
            y_start: labels.y_start(),
            y_end: labels.y_end(),
            y_moment: labels.y_moment(),
        }
    }

    /// Rejects targets that are not exactly one-hot.
    pub fn validate(&self) -> Result<()> {
        for (name, t) in [
            ("Y_s", &self.y_start),
            ("Y_e", &self.y_end),
            ("Y_m", &self.y_moment),
        ] {
            let ones = t.data().iter().filter(|&&v| v == T::one()).count();
            let zeros = t.data().iter().filter(|&&v| v == T::zero()).count();
            if ones != 1 || ones + zeros != t.len() {
                return Err(Error::InvalidArgument(format!("{name} is not one-hot")));
            }
        }
        Ok(())
    }
}

/// `((1 − λ)/2)·[f(P_s, Y_s) + f(P_e, Y_e)] + λ·f(M_2D, Y_m)` with `f` the
/// element-mean binary cross entropy.
///
/// A missing pointer output forces `λ = 1`; a missing 2D map forces `λ = 0`.
/// Terms whose weight is exactly zero are not evaluated, so the loss is
/// bit-invariant to the inputs of a zero-weight term.
pub fn loss<T: Scalar>(
    tape: &mut Tape<T>,
    p_start: Option<Var>,
    p_end: Option<Var>,
    m_2d: Option<Var>,
    targets: &Targets<T>,
    lambda: f64,
) -> Result<Var> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidArgument(format!("lambda must lie in [0, 1], got {lambda}")));
    }
    targets.validate()?;
    let pointer = match (p_start, p_end) {
        (Some(s), Some(e)) => Some((s, e)),
        (None, None) => None,
        _ => {
            return Err(Error::InvalidArgument(
                "start and end pointers must both be present or both absent".into(),
            ))
        }
    };
    let lambda = match (pointer.is_some(), m_2d.is_some()) {
        (false, false) => {
            return Err(Error::InvalidArgument("loss needs at least one head".into()))
        }
        (false, true) => 1.0,
        (true, false) => 0.0,
        (true, true) => lambda,
    };

    let w_pointer = (1.0 - lambda) / 2.0;
    let mut total: Option<Var> = None;
    if let (Some((s, e)), true) = (pointer, w_pointer != 0.0) {
        let ls = tape.bce_mean(s, &targets.y_start)?;
        let le = tape.bce_mean(e, &targets.y_end)?;
        let sum = tape.add(ls, le)?;
        total = Some(tape.scale(sum, T::of(w_pointer)));
    }
    if let (Some(m), true) = (m_2d, lambda != 0.0) {
        let lm = tape.bce_mean(m, &targets.y_moment)?;
        let lm = tape.scale(lm, T::of(lambda));
        total = Some(match total {
            Some(t) => tape.add(t, lm)?,
            None => lm,
        });
    }
    Ok(total.expect("the overridden lambda leaves one weighted term"))
}
