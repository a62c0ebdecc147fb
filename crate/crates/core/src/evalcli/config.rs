//! Training configuration and the plain-text key/value config format.
//!
//! ```text
//! # comment
//! lr = 1e-3
//! use_2dp = false
//! ```
//!
//! One `key = value` pair per line. Blank lines and lines starting with `#`
//! are skipped. A key may appear once.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{AblationConfig, ModelConfig};
use crate::numerics::{AdamWConfig, Precision};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LrSchedule {
    #[default]
    Constant,
    /// Linear decay from `lr` to zero over `max_steps`.
    Linear,
}

impl FromStr for LrSchedule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "constant" => Ok(Self::Constant),
            "linear" => Ok(Self::Linear),
            other => Err(format!("unknown lr schedule {other:?} (expected constant or linear)")),
        }
    }
}

impl std::fmt::Display for LrSchedule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Constant => "constant",
            Self::Linear => "linear",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub dropout: f64,
    pub lambda: f64,
    pub d: usize,
    pub m: usize,
    pub max_steps: usize,
    pub seed: u64,
    /// Validation cadence in steps; 0 disables periodic validation.
    pub eval_every: usize,
    pub ablation: AblationConfig,
    pub precision: Precision,
    pub lr_schedule: LrSchedule,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            weight_decay: 0.01,
            batch_size: 16,
            dropout: 0.3,
            lambda: 0.1,
            d: 512,
            m: 64,
            max_steps: 1000,
            seed: 0,
            eval_every: 100,
            ablation: AblationConfig::FULL,
            precision: Precision::F32,
            lr_schedule: LrSchedule::Constant,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be finite and non-negative, got {}", self.lr));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!("weight_decay must be non-negative, got {}", self.weight_decay));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad(format!("lambda must lie in [0, 1], got {}", self.lambda));
        }
        if self.batch_size == 0 || self.m == 0 {
            return bad("batch_size and m must be positive".into());
        }
        if self.d == 0 || self.d % 2 != 0 {
            return bad(format!("d must be positive and even, got {}", self.d));
        }
        self.ablation.validate().map_err(|e| Error::Config(e.to_string()))
    }

    pub fn adamw(&self) -> AdamWConfig {
        AdamWConfig {
            lr: self.lr,
            weight_decay: self.weight_decay,
            ..AdamWConfig::default()
        }
    }

    /// Learning rate for 1-based `step`.
    pub fn lr_at(&self, step: usize) -> f64 {
        match self.lr_schedule {
            LrSchedule::Constant => self.lr,
            LrSchedule::Linear => {
                let left = self.max_steps.saturating_sub(step - 1) as f64;
                self.lr * left / self.max_steps.max(1) as f64
            }
        }
    }

    pub fn model_config(&self, d_video: usize, d_asr: usize, d_query: usize) -> ModelConfig {
        ModelConfig::new(self.d, d_video, d_asr, d_query).with_ablation(self.ablation)
    }

    /// Overrides fields from `kv`, consuming the keys it recognizes.
    pub fn apply(&mut self, kv: &mut KvConfig) -> Result<()> {
        kv.take_into("lr", &mut self.lr)?;
        kv.take_into("weight_decay", &mut self.weight_decay)?;
        kv.take_into("batch_size", &mut self.batch_size)?;
        kv.take_into("dropout", &mut self.dropout)?;
        kv.take_into("lambda", &mut self.lambda)?;
        kv.take_into("d", &mut self.d)?;
        kv.take_into("m", &mut self.m)?;
        kv.take_into("max_steps", &mut self.max_steps)?;
        kv.take_into("seed", &mut self.seed)?;
        kv.take_into("eval_every", &mut self.eval_every)?;
        kv.take_into("use_av_encoder", &mut self.ablation.use_av_encoder)?;
        kv.take_into("use_pointer", &mut self.ablation.use_pointer)?;
        kv.take_into("use_2dp", &mut self.ablation.use_2dp)?;
        kv.take_into("precision", &mut self.precision)?;
        kv.take_into("lr_schedule", &mut self.lr_schedule)?;
        Ok(())
    }

    /// `key = value` lines that [`TrainConfig::apply`] reads back unchanged.
    pub fn to_kv(&self) -> String {
        let a = self.ablation;
        format!(
            "lr = {}\nweight_decay = {}\nbatch_size = {}\ndropout = {}\nlambda = {}\nd = {}\nm = {}\n\
             max_steps = {}\nseed = {}\neval_every = {}\nuse_av_encoder = {}\nuse_pointer = {}\n\
             use_2dp = {}\nprecision = {}\nlr_schedule = {}\n",
            self.lr,
            self.weight_decay,
            self.batch_size,
            self.dropout,
            self.lambda,
            self.d,
            self.m,
            self.max_steps,
            self.seed,
            self.eval_every,
            a.use_av_encoder,
            a.use_pointer,
            a.use_2dp,
            self.precision,
            self.lr_schedule
        )
    }
}

/// Parsed key/value file. Values stay as strings until a consumer asks for a
/// typed field.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvConfig {
    entries: BTreeMap<String, (String, usize)>,
}

impl KvConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {lineno}: expected `key = value`, got {raw:?}"))
            })?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(Error::Config(format!("line {lineno}: empty key")));
            }
            if entries.insert(k.to_string(), (v.to_string(), lineno)).is_some() {
                return Err(Error::Config(format!("line {lineno}: duplicate key {k:?}")));
            }
        }
        Ok(Self { entries })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.remove(key) {
            None => Ok(None),
            Some((v, line)) => v.parse().map(Some).map_err(|e| {
                Error::Config(format!("line {line}: bad value {v:?} for {key}: {e}"))
            }),
        }
    }

    pub fn take_into<T: FromStr>(&mut self, key: &str, slot: &mut T) -> Result<()>
    where
        T::Err: std::fmt::Display,
    {
        if let Some(v) = self.take(key)? {
            *slot = v;
        }
        Ok(())
    }
}
