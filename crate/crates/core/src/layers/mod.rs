//! Learnable building blocks: linear maps, temporal convolution, a
//! bidirectional GRU, and the activations used by the model.

pub mod activation;
mod conv1d;
mod gru;
mod linear;
mod params;

pub use activation::{gelu, sigmoid, talu};
pub use conv1d::Conv1dLayer;
pub use gru::{BiGruLayer, GruCell};
pub use linear::LinearLayer;
pub use params::{Bound, ParamId, ParamStore};
