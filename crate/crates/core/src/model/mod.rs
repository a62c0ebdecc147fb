//! The moment retrieval network: input projections, fusion, AV-Encoder, twin
//! pointer heads, the gated 2D probability encoder, score-map decoding and
//! the training objective.

mod checkpoint;
mod config;
mod loss;
mod network;
mod score;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_REVISION,
};
pub use config::{AblationConfig, ModelConfig};
pub use loss::{loss, Targets};
pub use network::{
    fuse_features, Dropout, ForwardVars, ModelParams, PointerHead, TwoDpEncoder, TwoDpVars,
};
pub use score::{build_score_map, decode, MomentSpan, ScoreMaps};
