//! Clip-based video moment retrieval with twin pointer heads and a gated 2D
//! probability encoder, plus the tensor engine, data tooling, training loop
//! and evaluation needed to run it at desk scale.

pub mod error;
pub mod evalcli;
pub mod data;
pub mod layers;
pub mod model;
pub mod numerics;

pub use error::{Error, Result};
