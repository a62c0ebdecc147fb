use serde::{Deserialize, Serialize};

use super::AblationConfig;
use crate::data::times_from_clips;
use crate::error::{Error, Result};
use crate::numerics::{Scalar, Tensor};

/// Probability maps of one forward pass and the fused, masked score map.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMaps<T> {
    pub p_start: Option<Tensor<T>>,
    pub p_end: Option<Tensor<T>>,
    pub m_2d: Option<Tensor<T>>,
    /// `m × m`, zero below the diagonal.
    pub fused: Tensor<T>,
}

impl<T: Scalar> ScoreMaps<T> {
    pub fn new(
        p_start: Option<Tensor<T>>,
        p_end: Option<Tensor<T>>,
        m_2d: Option<Tensor<T>>,
        config: &AblationConfig,
    ) -> Result<Self> {
        let fused = build_score_map(p_start.as_ref(), p_end.as_ref(), m_2d.as_ref(), config)?;
        Ok(Self {
            p_start,
            p_end,
            m_2d,
            fused,
        })
    }

    pub fn clips(&self) -> usize {
        self.fused.shape()[0]
    }
}

/// `M = M_s + M_e + M_2D` with `M_s[a][b] = P_s[a]` and `M_e[a][b] = P_e[b]`;
/// terms of ablated modules are left out. Cells with `a > b` are set to zero.
pub fn build_score_map<T: Scalar>(
    p_start: Option<&Tensor<T>>,
    p_end: Option<&Tensor<T>>,
    m_2d: Option<&Tensor<T>>,
    config: &AblationConfig,
) -> Result<Tensor<T>> {
    config.validate()?;
    let missing = |what: &str| Error::InvalidArgument(format!("score map needs {what}"));
    let pointer = if config.use_pointer {
        let ps = p_start.ok_or_else(|| missing("P_s"))?;
        let pe = p_end.ok_or_else(|| missing("P_e"))?;
        if ps.rank() != 1 || ps.shape() != pe.shape() {
            return Err(Error::shape("build_score_map", ps.shape(), pe.shape()));
        }
        Some((ps.data(), pe.data()))
    } else {
        None
    };
    let twod = if config.use_2dp {
        Some(m_2d.ok_or_else(|| missing("M_2D"))?)
    } else {
        None
    };
    let m = match (pointer, twod) {
        (Some((ps, _)), _) => ps.len(),
        (None, Some(t)) => t.shape()[0],
        (None, None) => unreachable!("validated"),
    };
    if let Some(t) = twod {
        if t.shape() != [m, m] {
            return Err(Error::shape("build_score_map", &[m, m], t.shape()));
        }
    }

    let mut out = Tensor::zeros(&[m, m]);
    let data = out.data_mut();
    for a in 0..m {
        for b in a..m {
            let mut v = T::zero();
            if let Some((ps, pe)) = pointer {
                v = ps[a] + pe[b];
            }
            if let Some(t) = twod {
                v = v + t.data()[a * m + b];
            }
            data[a * m + b] = v;
        }
    }
    Ok(out)
}

/// A retrieved moment: clip indices `a ≤ b` and the seconds they span.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSpan {
    pub start_clip: usize,
    pub end_clip: usize,
    pub start_s: f64,
    pub end_s: f64,
}

impl MomentSpan {
    pub fn from_clips(a: usize, b: usize, duration_s: f64, m: usize) -> Self {
        let (start_s, end_s) = times_from_clips(a, b, duration_s, m);
        Self {
            start_clip: a,
            end_clip: b,
            start_s,
            end_s,
        }
    }
}

/// Highest-scoring cell with `a ≤ b`; ties go to the smallest `a`, then the
/// smallest `b`.
pub fn decode<T: Scalar>(map: &Tensor<T>, duration_s: f64) -> Result<MomentSpan> {
    let (m, n) = map.dims2()?;
    if m == 0 {
        return Err(Error::InvalidArgument("cannot decode an empty score map".into()));
    }
    if m != n {
        return Err(Error::shape("decode", map.shape(), &[m, m]));
    }
    let d = map.data();
    let (mut best_a, mut best_b, mut best) = (0, 0, d[0]);
    for a in 0..m {
        for b in a..m {
            let v = d[a * m + b];
            if v > best || best.is_nan() {
                best = v;
                best_a = a;
                best_b = b;
            }
        }
    }
    Ok(MomentSpan::from_clips(best_a, best_b, duration_s, m))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(rows: &[Vec<f64>]) -> Tensor<f64> {
        Tensor::from_rows(rows).unwrap()
    }

    #[test]
    fn expansion_by_hand() {
        let ps = Tensor::vector(vec![1.0, 0.0]);
        let pe = Tensor::vector(vec![0.0, 1.0]);
        let z = Tensor::zeros(&[2, 2]);
        let m = build_score_map(Some(&ps), Some(&pe), Some(&z), &AblationConfig::FULL).unwrap();
        assert_eq!(m.data(), &[1.0, 2.0, 0.0, 1.0]);
    }

    #[test]
    fn zero_inputs_and_masking() {
        let z1 = Tensor::<f64>::zeros(&[3]);
        let z2 = Tensor::<f64>::zeros(&[3, 3]);
        let m = build_score_map(Some(&z1), Some(&z1), Some(&z2), &AblationConfig::FULL).unwrap();
        assert!(m.data().iter().all(|&v| v == 0.0));

        let ones = Tensor::<f64>::full(&[4], 0.7);
        let full = Tensor::<f64>::full(&[4, 4], 0.4);
        let m = build_score_map(Some(&ones), Some(&ones), Some(&full), &AblationConfig::FULL).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                let v = m.at2(a, b);
                if a > b {
                    assert_eq!(v, 0.0);
                } else {
                    assert!((v - 1.8).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn ablated_terms_are_dropped() {
        let ps = Tensor::<f64>::vector(vec![0.5, 0.25]);
        let pe = Tensor::<f64>::vector(vec![0.125, 1.0]);
        let m2 = t(&[vec![0.1, 0.2], vec![0.3, 0.4]]);
        let only_2d = build_score_map(None, None, Some(&m2), &AblationConfig::NO_POINTER).unwrap();
        assert_eq!(only_2d.data(), &[0.1, 0.2, 0.0, 0.4]);
        let only_ptr = build_score_map(Some(&ps), Some(&pe), None, &AblationConfig::NO_2DP).unwrap();
        assert_eq!(only_ptr.data(), &[0.625, 1.5, 0.0, 1.25]);
        assert!(build_score_map(None, None, Some(&m2), &AblationConfig::FULL).is_err());
    }

    #[test]
    fn decode_examples() {
        let m = t(&[
            vec![0.1, 0.2, 0.9],
            vec![0.0, 0.3, 0.4],
            vec![0.0, 0.0, 0.5],
        ]);
        let s = decode(&m, 30.0).unwrap();
        assert_eq!((s.start_clip, s.end_clip), (0, 2));
        assert_eq!((s.start_s, s.end_s), (0.0, 30.0));

        let u = Tensor::<f64>::full(&[4, 4], 0.3);
        let s = decode(&u, 8.0).unwrap();
        assert_eq!((s.start_clip, s.end_clip), (0, 0));
        assert_eq!((s.start_s, s.end_s), (0.0, 2.0));

        let one = Tensor::<f64>::full(&[1, 1], -4.0);
        let s = decode(&one, 12.5).unwrap();
        assert_eq!((s.start_clip, s.end_clip, s.start_s, s.end_s), (0, 0, 0.0, 12.5));

        assert!(decode(&Tensor::<f64>::zeros(&[0, 0]), 1.0).is_err());
    }

    #[test]
    fn decode_ignores_lower_triangle() {
        let m = t(&[vec![0.1, 0.2], vec![5.0, 0.3]]);
        let s = decode(&m, 2.0).unwrap();
        assert_eq!((s.start_clip, s.end_clip), (1, 1));
    }
}
