use crate::error::{Error, Result};
use crate::numerics::{Scalar, Tensor};

/// Gold clip indices for one sample. The one-hot targets are materialized on
/// demand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabelSet {
    pub start: usize,
    pub end: usize,
    pub clips: usize,
}

impl LabelSet {
    pub fn new(start: usize, end: usize, clips: usize) -> Result<Self> {
        if clips == 0 || start > end || end >= clips {
            return Err(Error::InvalidArgument(format!(
                "invalid label span ({start}, {end}) for {clips} clips"
            )));
        }
        Ok(Self { start, end, clips })
    }

    pub fn y_start<T: Scalar>(&self) -> Tensor<T> {
        one_hot(self.clips, self.start)
    }

    pub fn y_end<T: Scalar>(&self) -> Tensor<T> {
        one_hot(self.clips, self.end)
    }

    pub fn y_moment<T: Scalar>(&self) -> Tensor<T> {
        let m = self.clips;
        let mut t = Tensor::zeros(&[m, m]);
        t.data_mut()[self.start * m + self.end] = T::one();
        t
    }
}

fn one_hot<T: Scalar>(m: usize, i: usize) -> Tensor<T> {
    let mut t = Tensor::zeros(&[m]);
    t.data_mut()[i] = T::one();
    t
}

/// Clip `i` covers `[i·duration/m, (i+1)·duration/m)`. The start clip is the
/// one containing `start_s`; the end clip is the last one the moment enters,
/// so a moment ending exactly on a boundary excludes the following clip.
pub fn labels_from_times(start_s: f64, end_s: f64, duration_s: f64, m: usize) -> Result<LabelSet> {
    if !(duration_s > 0.0) || !duration_s.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "duration must be positive, got {duration_s}"
        )));
    }
    if m == 0 {
        return Err(Error::InvalidArgument("clip count must be positive".into()));
    }
    if !(0.0 <= start_s && start_s < end_s && end_s <= duration_s) {
        return Err(Error::InvalidArgument(format!(
            "moment [{start_s}, {end_s}] is not inside [0, {duration_s}]"
        )));
    }
    let step = duration_s / m as f64;
    let boundary = |i: usize| i as f64 * step;
    let last = (m - 1) as f64;
    // The floor/ceil estimates are nudged onto the boundaries reported by
    // `times_from_clips` so that re-labelling a clip span is exact.
    let mut s = (start_s / step).floor().clamp(0.0, last) as usize;
    while s + 1 < m && boundary(s + 1) <= start_s {
        s += 1;
    }
    while s > 0 && boundary(s) > start_s {
        s -= 1;
    }
    let mut e = ((end_s / step).ceil() - 1.0).clamp(s as f64, last) as usize;
    while e > s && boundary(e) >= end_s {
        e -= 1;
    }
    while e + 1 < m && boundary(e + 1) < end_s {
        e += 1;
    }
    LabelSet::new(s, e, m)
}

/// Time interval `[a·duration/m, (b+1)·duration/m)` covered by clips `a..=b`.
pub fn times_from_clips(a: usize, b: usize, duration_s: f64, m: usize) -> (f64, f64) {
    let step = duration_s / m as f64;
    (a as f64 * step, (b + 1) as f64 * step)
}
