//! Line-delimited JSON manifest, one sample per line:
//!
//! ```text
//! {"id":"s0000","video":"features/s0000.video.mrf","asr":"features/s0000.asr.mrf","query":"features/s0000.query.mrf","duration_s":287.5,"moment":{"start_s":12.25,"end_s":160.0},"split":"train"}
//! ```
//!
//! Feature paths are relative to the manifest's directory. `asr` may be
//! omitted for audio-less samples.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moment {
    pub start_s: f64,
    pub end_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub id: String,
    pub video: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub asr: Option<PathBuf>,
    pub query: PathBuf,
    pub duration_s: f64,
    pub moment: Moment,
    pub split: String,
}

impl ManifestRecord {
    pub fn validate(&self) -> Result<()> {
        let Moment { start_s, end_s } = self.moment;
        if !(0.0 <= start_s && start_s < end_s && end_s <= self.duration_s) {
            return Err(Error::Data(format!(
                "sample {}: moment [{start_s}, {end_s}] not inside [0, {}]",
                self.id, self.duration_s
            )));
        }
        Ok(())
    }
}

/// A parsed manifest and the directory its relative paths resolve against.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub root: PathBuf,
    pub records: Vec<ManifestRecord>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut records = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: ManifestRecord = serde_json::from_str(line).map_err(|e| {
                Error::Data(format!("{}:{}: {e}", path.display(), lineno + 1))
            })?;
            rec.validate()?;
            records.push(rec);
        }
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { root, records })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        for r in &self.records {
            serde_json::to_writer(&mut out, r).map_err(|e| Error::Data(e.to_string()))?;
            out.write_all(b"\n").expect("writing to a Vec");
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn split(&self, name: &str) -> Vec<&ManifestRecord> {
        self.records.iter().filter(|r| r.split == name).collect()
    }

    pub fn find(&self, id: &str) -> Option<&ManifestRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.root.join(p)
    }
}
