use rand::seq::SliceRandom;

use super::manifest::{Manifest, ManifestRecord, Moment};
use super::{labels_from_times, read_feature_file, sample_clips, LabelSet};
use crate::error::{Error, Result};
use crate::numerics::{SplitRng, Tensor};

/// One sample resampled to `m` clips and ready for the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub video: Tensor<f32>,
    pub asr: Tensor<f32>,
    pub query: Tensor<f32>,
    pub duration_s: f64,
    pub moment: Moment,
    pub labels: LabelSet,
}

/// Feature widths every sample of a run must share.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureWidths {
    pub video: usize,
    pub asr: usize,
    pub query: usize,
}

fn data_err(id: &str, what: impl std::fmt::Display) -> Error {
    Error::Data(format!("sample {id}: {what}"))
}

/// Reads and resamples one record. A record without an ASR path gets an
/// all-zero ASR matrix of width `asr_width`.
pub fn load_sample(
    manifest: &Manifest,
    rec: &ManifestRecord,
    m: usize,
    asr_width: usize,
) -> Result<Sample> {
    let video: Tensor<f32> = read_feature_file(&manifest.resolve(&rec.video))?;
    let (n_video, _) = video.dims2()?;
    let asr: Tensor<f32> = match &rec.asr {
        Some(p) => read_feature_file(&manifest.resolve(p))?,
        None => Tensor::zeros(&[n_video, asr_width]),
    };
    let query: Tensor<f32> = read_feature_file(&manifest.resolve(&rec.query))?;
    let (q_rows, _) = query.dims2()?;
    if q_rows != 1 {
        return Err(data_err(&rec.id, format!("query must have one row, found {q_rows}")));
    }
    let (n_asr, _) = asr.dims2()?;
    if n_asr != n_video {
        return Err(data_err(
            &rec.id,
            format!("video has {n_video} rows but ASR has {n_asr}"),
        ));
    }
    let video = sample_clips(&video, m).map_err(|e| data_err(&rec.id, e))?;
    let asr = sample_clips(&asr, m).map_err(|e| data_err(&rec.id, e))?;
    let labels = labels_from_times(rec.moment.start_s, rec.moment.end_s, rec.duration_s, m)
        .map_err(|e| data_err(&rec.id, e))?;
    Ok(Sample {
        id: rec.id.clone(),
        video,
        asr,
        query,
        duration_s: rec.duration_s,
        moment: rec.moment,
        labels,
    })
}

/// Loads every record, checking that all share the widths of the first
/// sample carrying each stream. Audio-less records take the ASR width from
/// the others, or `fallback_asr_width` if none has audio.
pub fn load_records(
    manifest: &Manifest,
    records: &[&ManifestRecord],
    m: usize,
    fallback_asr_width: Option<usize>,
) -> Result<(Vec<Sample>, FeatureWidths)> {
    let mut asr_width = fallback_asr_width;
    for rec in records {
        if let Some(p) = &rec.asr {
            let t: Tensor<f32> = read_feature_file(&manifest.resolve(p))?;
            asr_width = Some(t.dims2()?.1);
            break;
        }
    }
    let asr_width = asr_width.ok_or_else(|| {
        Error::Data("no record has ASR features and no ASR width was given".into())
    })?;
    let mut widths: Option<FeatureWidths> = None;
    let mut out = Vec::with_capacity(records.len());
    for rec in records {
        let s = load_sample(manifest, rec, m, asr_width)?;
        let w = FeatureWidths {
            video: s.video.shape()[1],
            asr: s.asr.shape()[1],
            query: s.query.shape()[1],
        };
        match widths {
            None => widths = Some(w),
            Some(first) if first != w => {
                return Err(data_err(
                    &rec.id,
                    format!("feature widths {w:?} differ from the run's {first:?}"),
                ))
            }
            Some(_) => {}
        }
        out.push(s);
    }
    let widths = widths.ok_or_else(|| Error::Data("no records to load".into()))?;
    Ok((out, widths))
}

/// Epoch-based batch sampler: each epoch visits every index once in an order
/// fixed by the generator.
#[derive(Debug, Clone)]
pub struct BatchSampler {
    order: Vec<usize>,
    pos: usize,
    epoch: usize,
    rng: SplitRng,
}

impl BatchSampler {
    pub fn new(n: usize, rng: SplitRng) -> Result<Self> {
        if n == 0 {
            return Err(Error::Data("cannot batch an empty split".into()));
        }
        let mut s = Self {
            order: (0..n).collect(),
            pos: 0,
            epoch: 0,
            rng,
        };
        s.order.shuffle(&mut s.rng);
        Ok(s)
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    /// Next `size` indices. A batch never straddles epochs, so the last
    /// batch of an epoch may be short.
    pub fn next_batch(&mut self, size: usize) -> Vec<usize> {
        if self.pos >= self.order.len() {
            self.order.sort_unstable();
            self.order.shuffle(&mut self.rng);
            self.pos = 0;
            self.epoch += 1;
        }
        let end = (self.pos + size.max(1)).min(self.order.len());
        let out = self.order[self.pos..end].to_vec();
        self.pos = end;
        out
    }
}

/// Loads `records` and returns them shuffled into batches of `batch_size`
/// for one epoch.
pub fn load_batch(
    manifest: &Manifest,
    records: &[&ManifestRecord],
    m: usize,
    batch_size: usize,
    rng: &mut SplitRng,
) -> Result<Vec<Vec<Sample>>> {
    let (samples, _) = load_records(manifest, records, m, None)?;
    let mut sampler = BatchSampler::new(samples.len(), rng.split())?;
    let mut out = Vec::new();
    while sampler.epoch() == 0 {
        let idx = sampler.next_batch(batch_size);
        if sampler.epoch() != 0 {
            break;
        }
        out.push(idx.iter().map(|&i| samples[i].clone()).collect());
    }
    Ok(out)
}
