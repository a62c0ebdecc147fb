//! Planted-moment synthetic benchmark.
//!
//! Every sample draws a query prototype `q ~ N(0, I)` and a moment covering
//! 20–80% of a video whose duration is uniform in [150, 425] seconds. Rows of
//! the labelled clips carry `signal · W q` on top of unit Gaussian noise,
//! where `W` is a random map shared by the whole dataset (one for video, one
//! for ASR). Rows outside the moment are pure noise, so at `signal = 0` the
//! two are indistinguishable.

use std::fs;
use std::path::{Path, PathBuf};

use super::manifest::{Manifest, ManifestRecord, Moment};
use super::{labels_from_times, write_feature_file};
use crate::error::{Error, Result};
use crate::numerics::{SplitRng, Tensor};

pub const SYNTH_MIN_COVERAGE: f64 = 0.2;
pub const SYNTH_MAX_COVERAGE: f64 = 0.8;
pub const SYNTH_MIN_DURATION: f64 = 150.0;
pub const SYNTH_MAX_DURATION: f64 = 425.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_samples: usize,
    /// The last `val_samples` records are tagged `val`, the rest `train`.
    pub val_samples: usize,
    pub m: usize,
    pub d_v: usize,
    pub d_a: usize,
    pub d_q: usize,
    pub signal: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_samples: 600,
            val_samples: 100,
            m: 64,
            d_v: 64,
            d_a: 64,
            d_q: 64,
            signal: 2.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.signal >= 0.0) || !self.signal.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "signal must be a finite non-negative number, got {}",
                self.signal
            )));
        }
        if self.n_samples == 0 || self.m == 0 || self.d_v == 0 || self.d_a == 0 || self.d_q == 0 {
            return Err(Error::InvalidArgument(
                "sample count, clip count and feature widths must be positive".into(),
            ));
        }
        if self.val_samples > self.n_samples {
            return Err(Error::InvalidArgument(format!(
                "val_samples {} exceeds n_samples {}",
                self.val_samples, self.n_samples
            )));
        }
        Ok(())
    }
}

/// One generated sample held in memory.
#[derive(Debug, Clone)]
pub struct SynthSample {
    pub id: String,
    pub video: Tensor<f32>,
    pub asr: Tensor<f32>,
    pub query: Tensor<f32>,
    pub duration_s: f64,
    pub moment: Moment,
    pub split: &'static str,
    /// Per-row flag: `true` for clips carrying the planted signal.
    pub inside: Vec<bool>,
}

fn round_ms(t: f64) -> f64 {
    (t * 1000.0).round() / 1000.0
}

fn shared_map(rows: usize, cols: usize, rng: &mut SplitRng) -> Vec<f64> {
    let sd = 1.0 / (rows as f64).sqrt();
    (0..rows * cols).map(|_| rng.normal() * sd).collect()
}

fn image(q: &[f64], map: &[f64], cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; cols];
    for (i, &qi) in q.iter().enumerate() {
        for (o, &w) in out.iter_mut().zip(&map[i * cols..(i + 1) * cols]) {
            *o += qi * w;
        }
    }
    out
}

fn stream(inside: &[bool], planted: &[f64], signal: f64, rng: &mut SplitRng) -> Tensor<f32> {
    let cols = planted.len();
    let mut data = Vec::with_capacity(inside.len() * cols);
    for &hit in inside {
        for &p in planted {
            let noise = rng.normal();
            let v = if hit { noise + signal * p } else { noise };
            data.push(v as f32);
        }
    }
    Tensor::new(&[inside.len(), cols], data).expect("shape matches data")
}

/// Generates the dataset in memory. Deterministic in `config`.
pub fn synth_samples(config: &SynthConfig) -> Result<Vec<SynthSample>> {
    config.validate()?;
    let mut root = SplitRng::new(config.seed);
    let mut maps_rng = root.split();
    let w_video = shared_map(config.d_q, config.d_v, &mut maps_rng);
    let w_asr = shared_map(config.d_q, config.d_a, &mut maps_rng);
    let width = (config.n_samples.max(1) - 1).to_string().len().max(4);
    let n_train = config.n_samples - config.val_samples;

    let mut out = Vec::with_capacity(config.n_samples);
    for i in 0..config.n_samples {
        let mut rng = root.split();
        let q: Vec<f64> = (0..config.d_q).map(|_| rng.normal()).collect();
        let duration = round_ms(rng.uniform(SYNTH_MIN_DURATION, SYNTH_MAX_DURATION));
        let coverage = rng.uniform(SYNTH_MIN_COVERAGE, SYNTH_MAX_COVERAGE);
        let length = coverage * duration;
        let start = round_ms(rng.uniform(0.0, duration - length));
        let end = round_ms(start + length).min(duration);
        let labels = labels_from_times(start, end, duration, config.m)?;
        let inside: Vec<bool> = (0..config.m)
            .map(|c| labels.start <= c && c <= labels.end)
            .collect();

        let video = stream(&inside, &image(&q, &w_video, config.d_v), config.signal, &mut rng);
        let asr = stream(&inside, &image(&q, &w_asr, config.d_a), config.signal, &mut rng);
        let query = Tensor::new(&[1, config.d_q], q.iter().map(|&v| v as f32).collect())?;
        out.push(SynthSample {
            id: format!("s{i:0width$}"),
            video,
            asr,
            query,
            duration_s: duration,
            moment: Moment {
                start_s: start,
                end_s: end,
            },
            split: if i < n_train { "train" } else { "val" },
            inside,
        });
    }
    Ok(out)
}

/// Writes `manifest.jsonl` and `features/<id>.{video,asr,query}.mrf` under
/// `out_dir`, returning the manifest.
pub fn synth_generate(config: &SynthConfig, out_dir: &Path) -> Result<Manifest> {
    let samples = synth_samples(config)?;
    let feat_dir = out_dir.join("features");
    fs::create_dir_all(&feat_dir).map_err(|e| Error::io(&feat_dir, e))?;
    let mut records = Vec::with_capacity(samples.len());
    for s in &samples {
        let rel = |stream: &str| PathBuf::from("features").join(format!("{}.{stream}.mrf", s.id));
        let (video, asr, query) = (rel("video"), rel("asr"), rel("query"));
        write_feature_file(&out_dir.join(&video), &s.video)?;
        write_feature_file(&out_dir.join(&asr), &s.asr)?;
        write_feature_file(&out_dir.join(&query), &s.query)?;
        records.push(ManifestRecord {
            id: s.id.clone(),
            video,
            asr: Some(asr),
            query,
            duration_s: s.duration_s,
            moment: s.moment,
            split: s.split.to_string(),
        });
    }
    let manifest = Manifest {
        root: out_dir.to_path_buf(),
        records,
    };
    manifest.write(&out_dir.join("manifest.jsonl"))?;
    Ok(manifest)
}
