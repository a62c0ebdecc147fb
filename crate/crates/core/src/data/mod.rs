//! Feature files, manifests, clip sampling, labels and the synthetic
//! benchmark generator.

mod dataset;
mod features;
mod labels;
mod manifest;
mod sampling;
mod synth;

pub use dataset::{load_batch, load_records, load_sample, BatchSampler, FeatureWidths, Sample};
pub use features::{
    decode_feature_matrix, encode_feature_matrix, read_feature_file, write_feature_file,
    FEATURE_HEADER_LEN, FEATURE_MAGIC,
};
pub use labels::{labels_from_times, times_from_clips, LabelSet};
pub use manifest::{Manifest, ManifestRecord, Moment};
pub use sampling::{clip_indices, sample_clips};
pub use synth::{
    synth_generate, synth_samples, SynthConfig, SynthSample, SYNTH_MAX_COVERAGE,
    SYNTH_MAX_DURATION, SYNTH_MIN_COVERAGE, SYNTH_MIN_DURATION,
};
