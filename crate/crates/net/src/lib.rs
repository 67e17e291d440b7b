//! A small convolutional classifier for wallpaper-group images, written from
//! scratch on top of a GEMM kernel, plus training, checkpoints and
//! interpretation tools.

pub mod checkpoint;
pub mod error;
pub mod gradcheck;
pub mod interpret;
pub mod layers;
pub mod model;
pub mod scalar;
pub mod tensor;
pub mod train;

pub use error::{NetError, Result};
pub use model::{EscherNet, Forward, ModelConfig, Stage};
pub use scalar::Scalar;
pub use tensor::Tensor;
