use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{iou, recall_at_1};
use crate::data::{FeatureWidths, Moment, Sample};
use crate::error::{Error, Result};
use crate::model::{decode, AblationConfig, ModelParams, MomentSpan};
use crate::numerics::Scalar;

pub const RECALL_THRESHOLDS: [f64; 2] = [0.5, 0.7];

/// One evaluated sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub id: String,
    pub pred: MomentSpan,
    pub gold: Moment,
    pub iou: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfigEcho {
    pub d: usize,
    pub m: usize,
    pub d_video: usize,
    pub d_asr: usize,
    pub d_query: usize,
    pub ablation: AblationConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub samples: usize,
    pub recall_at_1_iou_0_5: f64,
    pub recall_at_1_iou_0_7: f64,
    pub mean_iou: f64,
    pub config: EvalConfigEcho,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub summary: EvalSummary,
}

#[derive(Serialize, Deserialize)]
struct SummaryLine {
    summary: EvalSummary,
}

impl EvalReport {
    pub fn from_rows(rows: Vec<EvalRow>, config: EvalConfigEcho) -> Result<Self> {
        let ious: Vec<f64> = rows.iter().map(|r| r.iou).collect();
        let summary = EvalSummary {
            samples: rows.len(),
            recall_at_1_iou_0_5: recall_at_1(&ious, RECALL_THRESHOLDS[0])?,
            recall_at_1_iou_0_7: recall_at_1(&ious, RECALL_THRESHOLDS[1])?,
            mean_iou: ious.iter().sum::<f64>() / ious.len() as f64,
            config,
        };
        Ok(Self { rows, summary })
    }

    /// One JSON object per sample followed by a `{"summary": ...}` line.
    pub fn to_jsonl(&self) -> String {
        let mut out = Vec::new();
        for r in &self.rows {
            serde_json::to_writer(&mut out, r).expect("rows serialize");
            out.push(b'\n');
        }
        let line = SummaryLine {
            summary: self.summary.clone(),
        };
        serde_json::to_writer(&mut out, &line).expect("summary serializes");
        out.push(b'\n');
        String::from_utf8(out).expect("JSON is UTF-8")
    }

    pub fn parse_jsonl(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        let mut summary = None;
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |e: serde_json::Error| Error::Data(format!("report line {}: {e}", i + 1));
            if line.starts_with("{\"summary\"") {
                summary = Some(serde_json::from_str::<SummaryLine>(line).map_err(bad)?.summary);
            } else {
                rows.push(serde_json::from_str(line).map_err(bad)?);
            }
        }
        let summary = summary.ok_or_else(|| Error::Data("report has no summary line".into()))?;
        Ok(Self { rows, summary })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_jsonl().as_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Forward pass without dropout and decoding for one sample.
pub fn predict_sample<T: Scalar>(model: &ModelParams<T>, s: &Sample) -> Result<MomentSpan> {
    let maps = model.predict_maps(&s.video.cast(), &s.asr.cast(), &s.query.cast::<T>())?;
    decode(&maps.fused, s.duration_s)
}

/// Rejects models whose input widths or clip count differ from the data.
pub fn check_compatible<T: Scalar>(
    model: &ModelParams<T>,
    widths: FeatureWidths,
    expected_d: Option<usize>,
) -> Result<()> {
    let c = model.config;
    if (c.d_video, c.d_asr, c.d_query) != (widths.video, widths.asr, widths.query) {
        return Err(Error::Config(format!(
            "checkpoint expects widths video={} asr={} query={}, data has {}/{}/{}",
            c.d_video, c.d_asr, c.d_query, widths.video, widths.asr, widths.query
        )));
    }
    if let Some(d) = expected_d.filter(|&d| d != c.d) {
        return Err(Error::Config(format!(
            "checkpoint has hidden size {}, config asks for {d}",
            c.d
        )));
    }
    Ok(())
}

/// Evaluates every sample; rows keep the input order.
pub fn evaluate<T: Scalar>(model: &ModelParams<T>, samples: &[Sample]) -> Result<EvalReport> {
    if samples.is_empty() {
        return Err(Error::Data("evaluation split is empty".into()));
    }
    let rows = samples
        .par_iter()
        .map(|s| {
            let pred = predict_sample(model, s)?;
            let v = iou((pred.start_s, pred.end_s), (s.moment.start_s, s.moment.end_s))?;
            Ok(EvalRow {
                id: s.id.clone(),
                pred,
                gold: s.moment,
                iou: v,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let c = model.config;
    let echo = EvalConfigEcho {
        d: c.d,
        m: samples[0].video.shape()[0],
        d_video: c.d_video,
        d_asr: c.d_asr,
        d_query: c.d_query,
        ablation: c.ablation,
    };
    EvalReport::from_rows(rows, echo)
}

/// Plain inference maps for dumping.
pub fn sample_maps<T: Scalar>(
    model: &ModelParams<T>,
    s: &Sample,
) -> Result<crate::model::ScoreMaps<T>> {
    model.predict_maps(&s.video.cast(), &s.asr.cast(), &s.query.cast::<T>())
}
