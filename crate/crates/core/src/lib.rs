pub mod augment;
pub mod error;
pub mod fft;
pub mod gen;
pub mod group;
pub mod image;
pub mod isometry;
pub mod lattice;
pub mod metrics;
pub mod rng;
pub mod umethod;

pub use error::{Error, Result};
