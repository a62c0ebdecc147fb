use super::{Bound, ParamId, ParamStore};
use crate::error::{Error, Result};
use crate::numerics::{xavier_init, Scalar, SplitRng, Tape, Tensor, Var};

/// `X·W + b` with `W: d_in × d_out`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinearLayer {
    pub weight: ParamId,
    pub bias: ParamId,
    pub d_in: usize,
    pub d_out: usize,
}

impl LinearLayer {
    /// Xavier weights, zero bias.
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        name: &str,
        d_in: usize,
        d_out: usize,
        rng: &mut SplitRng,
    ) -> Result<Self> {
        let weight = store.add(format!("{name}.weight"), xavier_init(&[d_in, d_out], rng)?);
        let bias = store.add(format!("{name}.bias"), Tensor::zeros(&[d_out]));
        Ok(Self {
            weight,
            bias,
            d_in,
            d_out,
        })
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, params: &Bound, x: Var) -> Result<Var> {
        let (_, cols) = tape.value(x).dims2()?;
        if cols != self.d_in {
            return Err(Error::shape("linear", tape.shape(x), &[self.d_in, self.d_out]));
        }
        let xw = tape.matmul(x, params.var(self.weight))?;
        tape.add_row(xw, params.var(self.bias))
    }
}
