use crate::error::{Error, Result};
use crate::numerics::{Scalar, Tensor};

/// Source row for each of the `m` output clips: `floor(i·n/m)` when `n ≥ m`,
/// otherwise the rows in order followed by repeats of the last row.
pub fn clip_indices(n: usize, m: usize) -> Result<Vec<usize>> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidArgument(format!(
            "cannot sample {m} clips from {n} rows"
        )));
    }
    Ok(if n >= m {
        (0..m).map(|i| i * n / m).collect()
    } else {
        (0..m).map(|i| i.min(n - 1)).collect()
    })
}

/// Fixed-interval sampling (or last-row padding) of an `n × d` feature matrix
/// to exactly `m` rows.
pub fn sample_clips<T: Scalar>(x: &Tensor<T>, m: usize) -> Result<Tensor<T>> {
    let (n, d) = x.dims2()?;
    let idx = clip_indices(n, m)?;
    let mut out = Vec::with_capacity(m * d);
    for i in idx {
        out.extend_from_slice(x.row(i));
    }
    Tensor::new(&[m, d], out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(n: usize) -> Tensor<f32> {
        Tensor::new(&[n, 2], (0..n * 2).map(|i| (i / 2) as f32).collect()).unwrap()
    }

    fn picked(t: &Tensor<f32>) -> Vec<usize> {
        (0..t.shape()[0]).map(|r| t.row(r)[0] as usize).collect()
    }

    #[test]
    fn examples() {
        assert_eq!(picked(&sample_clips(&rows(5), 5).unwrap()), vec![0, 1, 2, 3, 4]);
        assert_eq!(picked(&sample_clips(&rows(4), 2).unwrap()), vec![0, 2]);
        assert_eq!(picked(&sample_clips(&rows(2), 4).unwrap()), vec![0, 1, 1, 1]);
    }

    #[test]
    fn empty_rejected() {
        assert!(sample_clips(&Tensor::<f32>::zeros(&[0, 3]), 4).is_err());
        assert!(sample_clips(&rows(3), 0).is_err());
    }
}
