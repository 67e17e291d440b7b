//! Two-dimensional FFT on row-major complex buffers.

use std::cell::RefCell;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// In-place 2D transform of a `height x width` buffer. The inverse is unnormalized.
pub fn fft2(data: &mut [Complex64], width: usize, height: usize, inverse: bool) {
    assert_eq!(data.len(), width * height);
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        let (row, col) = if inverse {
            (p.plan_fft_inverse(width), p.plan_fft_inverse(height))
        } else {
            (p.plan_fft_forward(width), p.plan_fft_forward(height))
        };
        row.process(data);
        let mut column = vec![Complex64::new(0.0, 0.0); height];
        for x in 0..width {
            for y in 0..height {
                column[y] = data[y * width + x];
            }
            col.process(&mut column);
            for y in 0..height {
                data[y * width + x] = column[y];
            }
        }
    });
}

pub fn forward_real(values: &[f64], width: usize, height: usize) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft2(&mut buf, width, height, false);
    buf
}

/// Inverse transform keeping the real part, normalized by `1/(w h)`.
pub fn inverse_real(mut spectrum: Vec<Complex64>, width: usize, height: usize) -> Vec<f64> {
    fft2(&mut spectrum, width, height, true);
    let n = (width * height) as f64;
    spectrum.into_iter().map(|c| c.re / n).collect()
}
