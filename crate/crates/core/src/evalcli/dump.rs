use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::ScoreMaps;
use crate::numerics::{Scalar, Tensor};

/// Rank-1 tensors become one line, rank-2 tensors one line per row; values
/// use six fixed decimals.
pub fn format_csv<T: Scalar>(t: &Tensor<T>) -> Result<String> {
    let (rows, cols) = match t.shape() {
        [n] => (1, *n),
        [r, c] => (*r, *c),
        s => return Err(Error::InvalidArgument(format!("cannot write rank-{} CSV", s.len()))),
    };
    let mut out = String::with_capacity(rows * cols * 10);
    for r in 0..rows {
        let line: Vec<String> = t.data()[r * cols..(r + 1) * cols]
            .iter()
            .map(|v| format!("{:.6}", v.as_f64()))
            .collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    Ok(out)
}

pub fn write_csv<T: Scalar>(path: &Path, t: &Tensor<T>) -> Result<()> {
    fs::write(path, format_csv(t)?).map_err(|e| Error::io(path, e))
}

/// Binary PGM (`P5`) of a square map. Cells with `a ≤ b` are scaled linearly
/// from their minimum (0) to their maximum (255); cells below the diagonal
/// are black. A constant upper triangle is drawn white.
pub fn pgm_bytes<T: Scalar>(map: &Tensor<T>) -> Result<Vec<u8>> {
    let (m, n) = map.dims2()?;
    if m != n || m == 0 {
        return Err(Error::shape("pgm", map.shape(), &[m, m]));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for a in 0..m {
        for b in a..m {
            let v = map.at2(a, b).as_f64();
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    let mut out = format!("P5\n{m} {m}\n255\n").into_bytes();
    for a in 0..m {
        for b in 0..m {
            let px = if a > b {
                0
            } else if hi > lo {
                ((map.at2(a, b).as_f64() - lo) / (hi - lo) * 255.0).round() as u8
            } else {
                255
            };
            out.push(px);
        }
    }
    Ok(out)
}

pub fn write_pgm<T: Scalar>(path: &Path, map: &Tensor<T>) -> Result<()> {
    fs::write(path, pgm_bytes(map)?).map_err(|e| Error::io(path, e))
}

/// Writes `<prefix>.p_start.csv`, `.p_end.csv`, `.m_2d.csv` (for heads that
/// are present), `.score.csv` and `.score.pgm` into `dir`.
pub fn dump_maps<T: Scalar>(dir: &Path, prefix: &str, maps: &ScoreMaps<T>) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let file = |suffix: &str| dir.join(format!("{prefix}.{suffix}"));
    if let Some(t) = &maps.p_start {
        write_csv(&file("p_start.csv"), t)?;
    }
    if let Some(t) = &maps.p_end {
        write_csv(&file("p_end.csv"), t)?;
    }
    if let Some(t) = &maps.m_2d {
        write_csv(&file("m_2d.csv"), t)?;
    }
    write_csv(&file("score.csv"), &maps.fused)?;
    write_pgm(&file("score.pgm"), &maps.fused)
}
