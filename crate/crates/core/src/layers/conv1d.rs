use super::{Bound, ParamId, ParamStore};
use crate::error::{Error, Result};
use crate::numerics::{xavier_init, Scalar, SplitRng, Tape, Tensor, Var};

/// Temporal convolution over the clip axis with zero "same" padding.
///
/// `weight` is `width × channels × channels`, indexed `[tap][in][out]`; tap
/// `k` reads clip `t + k − (width − 1) / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv1dLayer {
    pub weight: ParamId,
    pub bias: ParamId,
    pub width: usize,
    pub channels: usize,
}

impl Conv1dLayer {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        name: &str,
        width: usize,
        channels: usize,
        rng: &mut SplitRng,
    ) -> Result<Self> {
        if width == 0 {
            return Err(Error::InvalidArgument("conv1d width must be positive".into()));
        }
        let weight = store.add(
            format!("{name}.weight"),
            xavier_init(&[width, channels, channels], rng)?,
        );
        let bias = store.add(format!("{name}.bias"), Tensor::zeros(&[channels]));
        Ok(Self {
            weight,
            bias,
            width,
            channels,
        })
    }

    /// Rejects kernels wider than `2m − 1`, whose outer taps could never
    /// touch a real clip.
    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, params: &Bound, x: Var) -> Result<Var> {
        let (m, _) = tape.value(x).dims2()?;
        if m > 0 && self.width > 2 * m - 1 {
            return Err(Error::InvalidArgument(format!(
                "conv1d kernel width {} exceeds 2m-1 = {} for m = {m}",
                self.width,
                2 * m - 1
            )));
        }
        self.forward_clipped(tape, params, x)
    }

    /// Same as [`forward`](Self::forward) but accepts short sequences by
    /// dropping taps that only ever read padding. The result equals the
    /// zero-padded convolution with the full kernel.
    pub fn forward_clipped<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        params: &Bound,
        x: Var,
    ) -> Result<Var> {
        let (m, d) = tape.value(x).dims2()?;
        if d != self.channels {
            return Err(Error::shape(
                "conv1d",
                tape.shape(x),
                &[self.width, self.channels, self.channels],
            ));
        }
        if m == 0 {
            return Err(Error::InvalidArgument("conv1d over zero clips".into()));
        }
        let half = (self.width - 1) / 2;
        let w = params.var(self.weight);
        let mut acc: Option<Var> = None;
        for k in 0..self.width {
            let offset = k as isize - half as isize;
            if offset.unsigned_abs() >= m {
                continue;
            }
            let shifted = if offset == 0 { x } else { tape.shift_rows(x, offset)? };
            let tap = tape.select(w, k)?;
            let y = tape.matmul(shifted, tap)?;
            acc = Some(match acc {
                Some(a) => tape.add(a, y)?,
                None => y,
            });
        }
        let acc = acc.expect("center tap always in range");
        tape.add_row(acc, params.var(self.bias))
    }
}
