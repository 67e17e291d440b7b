//! Raw Fourier-coefficient features.
//!
//! The full unnormalized 2D spectrum of a 128x128 image is flattened row by
//! row; all real parts come first, then all imaginary parts, giving 32768
//! values. Conjugate-symmetric duplicates are kept so the layout matches the
//! per-image feature count of the original baseline.

use escher_core::fft::forward_real;
use escher_core::image::PatternImage;
use rayon::prelude::*;

use crate::error::{BaselineError, Result};

pub const FOURIER_SIDE: usize = 128;
pub const FOURIER_LEN: usize = 2 * FOURIER_SIDE * FOURIER_SIDE;

pub fn fourier_features(img: &PatternImage) -> Result<Vec<f64>> {
    if img.width() != FOURIER_SIDE || img.height() != FOURIER_SIDE {
        return Err(BaselineError::ImageSize { expected: FOURIER_SIDE, width: img.width(), height: img.height() });
    }
    let px: Vec<f64> = img.pixels().iter().map(|&v| v as f64).collect();
    let spectrum = forward_real(&px, FOURIER_SIDE, FOURIER_SIDE);
    let mut out = Vec::with_capacity(FOURIER_LEN);
    out.extend(spectrum.iter().map(|c| c.re));
    out.extend(spectrum.iter().map(|c| c.im));
    Ok(out)
}

/// Features for many images, computed in parallel and returned in order.
pub fn fourier_batch(images: &[PatternImage]) -> Result<Vec<Vec<f64>>> {
    images.par_iter().map(fourier_features).collect()
}
