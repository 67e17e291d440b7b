//! Layer kernels. Convolutions work on one sample laid out `[C, H, W]` and use
//! SAME padding with stride 1; linear layers and the loss work on a batch of
//! row vectors.

use crate::error::{NetError, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct Conv2d<T> {
    pub in_c: usize,
    pub out_c: usize,
    pub k: usize,
    /// `[out_c, in_c, k, k]`
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

/// Unfolds `x` (`[c, h, w]`) into `col` (`[c k k, h w]`) with zero padding `k / 2`.
pub fn im2col<T: Scalar>(x: &[T], c: usize, h: usize, w: usize, k: usize, col: &mut Vec<T>) {
    let p = (k / 2) as isize;
    let hw = h * w;
    col.clear();
    col.resize(c * k * k * hw, T::zero());
    for ch in 0..c {
        let plane = &x[ch * hw..(ch + 1) * hw];
        for ky in 0..k {
            for kx in 0..k {
                let row = ((ch * k + ky) * k + kx) * hw;
                let dx = kx as isize - p;
                let x_lo = (-dx).max(0) as usize;
                let x_hi = (w as isize - dx).min(w as isize).max(0) as usize;
                if x_lo >= x_hi {
                    continue;
                }
                for y in 0..h {
                    let sy = y as isize + ky as isize - p;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let src = sy as usize * w;
                    let dst = row + y * w;
                    let sx = (x_lo as isize + dx) as usize;
                    col[dst + x_lo..dst + x_hi].copy_from_slice(&plane[src + sx..src + sx + (x_hi - x_lo)]);
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: accumulates `col` back into `dx`.
pub fn col2im<T: Scalar>(col: &[T], c: usize, h: usize, w: usize, k: usize, dx: &mut [T]) {
    let p = (k / 2) as isize;
    let hw = h * w;
    for ch in 0..c {
        let plane = &mut dx[ch * hw..(ch + 1) * hw];
        for ky in 0..k {
            for kx in 0..k {
                let row = ((ch * k + ky) * k + kx) * hw;
                let dxo = kx as isize - p;
                let x_lo = (-dxo).max(0) as usize;
                let x_hi = (w as isize - dxo).min(w as isize).max(0) as usize;
                if x_lo >= x_hi {
                    continue;
                }
                for y in 0..h {
                    let sy = y as isize + ky as isize - p;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let src = sy as usize * w + (x_lo as isize + dxo) as usize;
                    let from = &col[row + y * w + x_lo..row + y * w + x_hi];
                    for (d, s) in plane[src..src + (x_hi - x_lo)].iter_mut().zip(from) {
                        *d += *s;
                    }
                }
            }
        }
    }
}

impl<T: Scalar> Conv2d<T> {
    pub fn new(in_c: usize, out_c: usize, k: usize) -> Result<Self> {
        if k % 2 == 0 || in_c == 0 || out_c == 0 {
            return Err(NetError::Config(format!("conv {in_c}->{out_c} with kernel {k}")));
        }
        Ok(Self {
            in_c,
            out_c,
            k,
            weight: Tensor::zeros(&[out_c, in_c, k, k]),
            bias: Tensor::zeros(&[out_c]),
        })
    }

    pub fn fan_in(&self) -> usize {
        self.in_c * self.k * self.k
    }

    /// Weight and bias storage borrowed together, for gradient accumulation.
    pub fn slices_mut(&mut self) -> (&mut [T], &mut [T]) {
        (self.weight.data_mut(), self.bias.data_mut())
    }

    /// `out` (`[out_c, h, w]`) = conv(`x`) + bias.
    pub fn forward(&self, x: &[T], h: usize, w: usize, out: &mut [T], col: &mut Vec<T>) {
        let hw = h * w;
        im2col(x, self.in_c, h, w, self.k, col);
        for (o, chunk) in out[..self.out_c * hw].chunks_mut(hw).enumerate() {
            chunk.fill(self.bias.data()[o]);
        }
        T::gemm(self.out_c, self.fan_in(), hw, T::one(), self.weight.data(), false, col, false, T::one(), out);
    }

    /// Accumulates parameter gradients into `gw`, `gb`; writes the input
    /// gradient into `dx` (overwritten) when requested.
    #[allow(clippy::too_many_arguments)]
    pub fn backward(
        &self,
        x: &[T],
        h: usize,
        w: usize,
        dout: &[T],
        dx: Option<&mut [T]>,
        grads: Option<(&mut [T], &mut [T])>,
        col: &mut Vec<T>,
    ) {
        let hw = h * w;
        let ckk = self.fan_in();
        if let Some((gw, gb)) = grads {
            im2col(x, self.in_c, h, w, self.k, col);
            T::gemm(self.out_c, hw, ckk, T::one(), dout, false, col, true, T::one(), gw);
            for (o, g) in gb.iter_mut().enumerate() {
                *g += dout[o * hw..(o + 1) * hw].iter().copied().sum::<T>();
            }
        }
        if let Some(dx) = dx {
            col.clear();
            col.resize(ckk * hw, T::zero());
            T::gemm(ckk, self.out_c, hw, T::one(), self.weight.data(), true, dout, false, T::zero(), col);
            dx[..self.in_c * hw].fill(T::zero());
            col2im(col, self.in_c, h, w, self.k, dx);
        }
    }
}

pub fn relu_forward<T: Scalar>(x: &mut [T]) {
    for v in x {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
}

/// Masks `d` where the ReLU output `y` was not positive.
pub fn relu_backward<T: Scalar>(y: &[T], d: &mut [T]) {
    for (g, v) in d.iter_mut().zip(y) {
        if *v <= T::zero() {
            *g = T::zero();
        }
    }
}

/// 2x2 stride-2 max pooling of `[c, h, w]`; `idx` receives the flat input
/// index of each maximum (first in scan order on ties).
pub fn maxpool_forward<T: Scalar>(x: &[T], c: usize, h: usize, w: usize, out: &mut [T], idx: &mut [u32]) {
    let (oh, ow) = (h / 2, w / 2);
    for ch in 0..c {
        let base = ch * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let i0 = base + 2 * oy * w + 2 * ox;
                let mut best = i0;
                for cand in [i0 + 1, i0 + w, i0 + w + 1] {
                    if x[cand] > x[best] {
                        best = cand;
                    }
                }
                let o = (ch * oh + oy) * ow + ox;
                out[o] = x[best];
                idx[o] = best as u32;
            }
        }
    }
}

/// Routes each output gradient to its argmax; `dx` is overwritten.
pub fn maxpool_backward<T: Scalar>(dout: &[T], idx: &[u32], dx: &mut [T]) {
    dx.fill(T::zero());
    for (g, &i) in dout.iter().zip(idx) {
        dx[i as usize] += *g;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Linear<T> {
    pub inputs: usize,
    pub outputs: usize,
    /// `[outputs, inputs]`
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Scalar> Linear<T> {
    pub fn new(inputs: usize, outputs: usize) -> Result<Self> {
        if inputs == 0 || outputs == 0 {
            return Err(NetError::Config(format!("linear {inputs}->{outputs}")));
        }
        Ok(Self {
            inputs,
            outputs,
            weight: Tensor::zeros(&[outputs, inputs]),
            bias: Tensor::zeros(&[outputs]),
        })
    }

    /// Weight and bias storage borrowed together, for gradient accumulation.
    pub fn slices_mut(&mut self) -> (&mut [T], &mut [T]) {
        (self.weight.data_mut(), self.bias.data_mut())
    }

    /// `y` (`[n, outputs]`) = `x` (`[n, inputs]`) W^T + b.
    pub fn forward(&self, x: &[T], n: usize, y: &mut [T]) {
        for row in y[..n * self.outputs].chunks_mut(self.outputs) {
            row.copy_from_slice(self.bias.data());
        }
        T::gemm(n, self.inputs, self.outputs, T::one(), x, false, self.weight.data(), true, T::one(), y);
    }

    pub fn backward(&self, x: &[T], n: usize, dy: &[T], dx: Option<&mut [T]>, grads: Option<(&mut [T], &mut [T])>) {
        if let Some((gw, gb)) = grads {
            T::gemm(self.outputs, n, self.inputs, T::one(), dy, true, x, false, T::one(), gw);
            for row in dy[..n * self.outputs].chunks(self.outputs) {
                for (g, v) in gb.iter_mut().zip(row) {
                    *g += *v;
                }
            }
        }
        if let Some(dx) = dx {
            T::gemm(n, self.outputs, self.inputs, T::one(), dy, false, self.weight.data(), false, T::zero(), dx);
        }
    }
}

/// Row-wise softmax, stable against large logits.
pub fn softmax<T: Scalar>(logits: &[T], classes: usize) -> Vec<T> {
    let mut p = logits.to_vec();
    for row in p.chunks_mut(classes) {
        let m = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut s = T::zero();
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            s += *v;
        }
        for v in row.iter_mut() {
            *v = *v / s;
        }
    }
    p
}

/// Mean cross-entropy over the batch and its gradient with respect to the logits.
pub fn softmax_cross_entropy<T: Scalar>(logits: &[T], labels: &[usize], classes: usize) -> Result<(f64, Vec<T>)> {
    let n = labels.len();
    if logits.len() != n * classes {
        return Err(NetError::Shape(format!("{} logits for {n} labels x {classes}", logits.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(NetError::Label(bad, classes));
    }
    let mut d = softmax(logits, classes);
    let mut loss = 0.0;
    let inv_n = T::of_f64(1.0 / n as f64);
    for (row, &l) in d.chunks_mut(classes).zip(labels) {
        loss -= row[l].as_f64().max(f64::MIN_POSITIVE).ln();
        row[l] -= T::one();
        for v in row.iter_mut() {
            *v *= inv_n;
        }
    }
    Ok((loss / n as f64, d))
}
