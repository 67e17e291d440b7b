//! The classification network: two Conv-ReLU-Conv-ReLU-Pool blocks followed
//! by FC-ReLU-FC. Convolutions use SAME padding so each pool halves the side.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{NetError, Result};
use crate::layers::*;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Square input side in pixels; must be divisible by 4.
    pub input: usize,
    /// Filters in the first and second block.
    pub channels: [usize; 2],
    /// Kernel sides in the first and second block.
    pub kernels: [usize; 2],
    pub hidden: usize,
    pub classes: usize,
}

impl ModelConfig {
    /// 128x128 input, 32 7x7 then 64 3x3 filters, 512 hidden units, 17 classes.
    pub fn paper_exact() -> Self {
        Self {
            input: 128,
            channels: [32, 64],
            kernels: [7, 3],
            hidden: 512,
            classes: 17,
        }
    }

    /// Same layers on 64x64 input.
    pub fn reduced() -> Self {
        Self { input: 64, ..Self::paper_exact() }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.input >= 4
            && self.input % 4 == 0
            && self.channels.iter().all(|&c| c > 0)
            && self.kernels.iter().all(|&k| k % 2 == 1)
            && self.hidden > 0
            && self.classes > 1;
        if ok {
            Ok(())
        } else {
            Err(NetError::Config(format!("{self:?}")))
        }
    }

    /// Flattened size after the second pool.
    pub fn feature_len(&self) -> usize {
        self.channels[1] * (self.input / 4) * (self.input / 4)
    }
}

/// Pipeline stages; each stage's output is cached by the forward pass.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stage {
    Conv1,
    Conv2,
    Pool1,
    Conv3,
    Conv4,
    Pool2,
    Fc1,
    Fc2,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Conv1,
        Stage::Conv2,
        Stage::Pool1,
        Stage::Conv3,
        Stage::Conv4,
        Stage::Pool2,
        Stage::Fc1,
        Stage::Fc2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Conv1 => "conv1",
            Stage::Conv2 => "conv2",
            Stage::Pool1 => "pool1",
            Stage::Conv3 => "conv3",
            Stage::Conv4 => "conv4",
            Stage::Pool2 => "pool2",
            Stage::Fc1 => "fc1",
            Stage::Fc2 => "fc2",
        }
    }

    pub fn from_name(s: &str) -> Option<Stage> {
        Self::ALL.into_iter().find(|x| x.name() == s)
    }

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EscherNet<T> {
    pub cfg: ModelConfig,
    pub conv1: Conv2d<T>,
    pub conv2: Conv2d<T>,
    pub conv3: Conv2d<T>,
    pub conv4: Conv2d<T>,
    pub fc1: Linear<T>,
    pub fc2: Linear<T>,
}

/// Cached stage outputs for a batch (post-ReLU where a ReLU follows).
#[derive(Clone, Debug)]
pub struct Forward<T> {
    pub n: usize,
    pub outs: Vec<Vec<T>>,
    pool1_idx: Vec<u32>,
    pool2_idx: Vec<u32>,
}

impl<T: Scalar> Forward<T> {
    pub fn stage(&self, s: Stage) -> &[T] {
        &self.outs[s.index()]
    }

    pub fn logits(&self) -> &[T] {
        self.stage(Stage::Fc2)
    }

    /// Which rectified units are active and where each pool took its
    /// maximum. Two inputs with equal patterns lie in the same linear piece
    /// of the network.
    pub fn pattern(&self) -> (Vec<bool>, Vec<u32>) {
        let mut active = Vec::new();
        for s in [Stage::Conv1, Stage::Conv2, Stage::Conv3, Stage::Conv4, Stage::Fc1] {
            active.extend(self.stage(s).iter().map(|v| *v > T::zero()));
        }
        let mut idx = self.pool1_idx.clone();
        idx.extend_from_slice(&self.pool2_idx);
        (active, idx)
    }
}

impl<T: Scalar> EscherNet<T> {
    /// All-zero parameters.
    pub fn zeros(cfg: ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let [c1, c2] = cfg.channels;
        let [k1, k2] = cfg.kernels;
        Ok(Self {
            cfg,
            conv1: Conv2d::new(1, c1, k1)?,
            conv2: Conv2d::new(c1, c1, k1)?,
            conv3: Conv2d::new(c1, c2, k2)?,
            conv4: Conv2d::new(c2, c2, k2)?,
            fc1: Linear::new(cfg.feature_len(), cfg.hidden)?,
            fc2: Linear::new(cfg.hidden, cfg.classes)?,
        })
    }

    /// Fan-in scaled uniform weights `U(-sqrt(6 / fan_in), sqrt(6 / fan_in))`, zero biases.
    pub fn init(cfg: ModelConfig, rng: &mut impl Rng) -> Result<Self> {
        let mut m = Self::zeros(cfg)?;
        for (name, t) in m.params_mut() {
            if name.ends_with(".weight") {
                let fan_in: usize = t.shape()[1..].iter().product();
                let b = (6.0 / fan_in as f64).sqrt();
                for v in t.data_mut() {
                    *v = T::of_f64(rng.gen_range(-b..b));
                }
            }
        }
        Ok(m)
    }

    pub fn params(&self) -> Vec<(&'static str, &Tensor<T>)> {
        vec![
            ("conv1.weight", &self.conv1.weight),
            ("conv1.bias", &self.conv1.bias),
            ("conv2.weight", &self.conv2.weight),
            ("conv2.bias", &self.conv2.bias),
            ("conv3.weight", &self.conv3.weight),
            ("conv3.bias", &self.conv3.bias),
            ("conv4.weight", &self.conv4.weight),
            ("conv4.bias", &self.conv4.bias),
            ("fc1.weight", &self.fc1.weight),
            ("fc1.bias", &self.fc1.bias),
            ("fc2.weight", &self.fc2.weight),
            ("fc2.bias", &self.fc2.bias),
        ]
    }

    pub fn params_mut(&mut self) -> Vec<(&'static str, &mut Tensor<T>)> {
        vec![
            ("conv1.weight", &mut self.conv1.weight),
            ("conv1.bias", &mut self.conv1.bias),
            ("conv2.weight", &mut self.conv2.weight),
            ("conv2.bias", &mut self.conv2.bias),
            ("conv3.weight", &mut self.conv3.weight),
            ("conv3.bias", &mut self.conv3.bias),
            ("conv4.weight", &mut self.conv4.weight),
            ("conv4.bias", &mut self.conv4.bias),
            ("fc1.weight", &mut self.fc1.weight),
            ("fc1.bias", &mut self.fc1.bias),
            ("fc2.weight", &mut self.fc2.weight),
            ("fc2.bias", &mut self.fc2.bias),
        ]
    }

    pub fn num_params(&self) -> usize {
        self.params().iter().map(|(_, t)| t.len()).sum()
    }

    /// Zeroed copy with the same shapes, used as a gradient accumulator.
    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.cfg).expect("validated config")
    }

    pub fn all_finite(&self) -> bool {
        self.params().iter().all(|(_, t)| t.all_finite())
    }

    /// `(channels, side)` of each stage's per-sample output; FC stages report side 1.
    pub fn stage_shape(&self, s: Stage) -> (usize, usize) {
        let (c, n) = (self.cfg.channels, self.cfg.input);
        match s {
            Stage::Conv1 | Stage::Conv2 => (c[0], n),
            Stage::Pool1 => (c[0], n / 2),
            Stage::Conv3 | Stage::Conv4 => (c[1], n / 2),
            Stage::Pool2 => (c[1], n / 4),
            Stage::Fc1 => (self.cfg.hidden, 1),
            Stage::Fc2 => (self.cfg.classes, 1),
        }
    }

    fn stage_len(&self, s: Stage) -> usize {
        let (c, side) = self.stage_shape(s);
        c * side * side
    }

    /// Forward pass over `n` samples stored back to back as `input x input` images.
    pub fn forward(&self, x: &[T], n: usize) -> Result<Forward<T>> {
        let side = self.cfg.input;
        let px = side * side;
        if x.len() != n * px || n == 0 {
            return Err(NetError::Shape(format!(
                "{} values for {n} inputs of {side}x{side}",
                x.len()
            )));
        }
        let l = |s: Stage| self.stage_len(s);
        let buf = |s: Stage| vec![T::zero(); n * l(s)];
        let (mut a1, mut a2, mut p1, mut a3, mut a4, mut p2) = (
            buf(Stage::Conv1),
            buf(Stage::Conv2),
            buf(Stage::Pool1),
            buf(Stage::Conv3),
            buf(Stage::Conv4),
            buf(Stage::Pool2),
        );
        let mut pool1_idx = vec![0u32; n * l(Stage::Pool1)];
        let mut pool2_idx = vec![0u32; n * l(Stage::Pool2)];
        let mut col = Vec::new();
        let (h1, h2) = (side, side / 2);
        let [c1, c2] = self.cfg.channels;
        let at = |s: Stage, i: usize| i * l(s)..(i + 1) * l(s);
        for i in 0..n {
            let xi = &x[i * px..(i + 1) * px];
            let a1 = &mut a1[at(Stage::Conv1, i)];
            self.conv1.forward(xi, h1, h1, a1, &mut col);
            relu_forward(a1);
            let a2 = &mut a2[at(Stage::Conv2, i)];
            self.conv2.forward(a1, h1, h1, a2, &mut col);
            relu_forward(a2);
            let p1 = &mut p1[at(Stage::Pool1, i)];
            maxpool_forward(a2, c1, h1, h1, p1, &mut pool1_idx[at(Stage::Pool1, i)]);
            let a3 = &mut a3[at(Stage::Conv3, i)];
            self.conv3.forward(p1, h2, h2, a3, &mut col);
            relu_forward(a3);
            let a4 = &mut a4[at(Stage::Conv4, i)];
            self.conv4.forward(a3, h2, h2, a4, &mut col);
            relu_forward(a4);
            maxpool_forward(a4, c2, h2, h2, &mut p2[at(Stage::Pool2, i)], &mut pool2_idx[at(Stage::Pool2, i)]);
        }
        let mut f1 = buf(Stage::Fc1);
        self.fc1.forward(&p2, n, &mut f1);
        relu_forward(&mut f1);
        let mut f2 = buf(Stage::Fc2);
        self.fc2.forward(&f1, n, &mut f2);
        let outs = vec![a1, a2, p1, a3, a4, p2, f1, f2];
        Ok(Forward { n, outs, pool1_idx, pool2_idx })
    }

    /// Backpropagates `d` (gradient with respect to the output of `from`)
    /// down to the input. Parameter gradients are accumulated into `grads`
    /// when given; the input gradient is returned.
    pub fn backward_from(
        &self,
        fwd: &Forward<T>,
        x: &[T],
        from: Stage,
        d: Vec<T>,
        mut grads: Option<&mut EscherNet<T>>,
    ) -> Result<Vec<T>> {
        let n = fwd.n;
        if d.len() != n * self.stage_len(from) {
            return Err(NetError::Shape(format!("gradient of {} for stage {}", d.len(), from.name())));
        }
        let side = self.cfg.input;
        let px = side * side;
        let (h1, h2) = (side, side / 2);
        let l = |s: Stage| self.stage_len(s);

        // fully connected part, batched
        let mut d = d;
        if from == Stage::Fc2 {
            let mut d_h = vec![T::zero(); n * l(Stage::Fc1)];
            let g = grads.as_deref_mut().map(|g| g.fc2.slices_mut());
            self.fc2.backward(fwd.stage(Stage::Fc1), n, &d, Some(&mut d_h), g);
            d = d_h;
        }
        if from >= Stage::Fc1 {
            relu_backward(fwd.stage(Stage::Fc1), &mut d);
            let mut d_p2 = vec![T::zero(); n * l(Stage::Pool2)];
            let g = grads.as_deref_mut().map(|g| g.fc1.slices_mut());
            self.fc1.backward(fwd.stage(Stage::Pool2), n, &d, Some(&mut d_p2), g);
            d = d_p2;
        }
        // entering stage for the convolutional part; `d` now holds the
        // gradient with respect to its output for the whole batch
        let entry = from.min(Stage::Pool2);

        let mut dx = vec![T::zero(); n * px];
        let mut col = Vec::new();
        let mut d_a4 = vec![T::zero(); l(Stage::Conv4)];
        let mut d_a3 = vec![T::zero(); l(Stage::Conv3)];
        let mut d_p1 = vec![T::zero(); l(Stage::Pool1)];
        let mut d_a2 = vec![T::zero(); l(Stage::Conv2)];
        let mut d_a1 = vec![T::zero(); l(Stage::Conv1)];
        let out = |s: Stage, i: usize| &fwd.outs[s.index()][i * l(s)..(i + 1) * l(s)];
        for i in 0..n {
            let di = &d[i * l(entry)..(i + 1) * l(entry)];
            let load = |s: Stage, buf: &mut [T]| {
                if entry == s {
                    buf.copy_from_slice(di);
                }
            };
            if entry >= Stage::Pool2 {
                maxpool_backward(di, &fwd.pool2_idx[i * l(Stage::Pool2)..(i + 1) * l(Stage::Pool2)], &mut d_a4);
            }
            load(Stage::Conv4, &mut d_a4);
            if entry >= Stage::Conv4 {
                relu_backward(out(Stage::Conv4, i), &mut d_a4);
                let g = grads.as_deref_mut().map(|g| g.conv4.slices_mut());
                self.conv4.backward(out(Stage::Conv3, i), h2, h2, &d_a4, Some(&mut d_a3), g, &mut col);
            }
            load(Stage::Conv3, &mut d_a3);
            if entry >= Stage::Conv3 {
                relu_backward(out(Stage::Conv3, i), &mut d_a3);
                let g = grads.as_deref_mut().map(|g| g.conv3.slices_mut());
                self.conv3.backward(out(Stage::Pool1, i), h2, h2, &d_a3, Some(&mut d_p1), g, &mut col);
            }
            load(Stage::Pool1, &mut d_p1);
            if entry >= Stage::Pool1 {
                maxpool_backward(&d_p1, &fwd.pool1_idx[i * l(Stage::Pool1)..(i + 1) * l(Stage::Pool1)], &mut d_a2);
            }
            load(Stage::Conv2, &mut d_a2);
            if entry >= Stage::Conv2 {
                relu_backward(out(Stage::Conv2, i), &mut d_a2);
                let g = grads.as_deref_mut().map(|g| g.conv2.slices_mut());
                self.conv2.backward(out(Stage::Conv1, i), h1, h1, &d_a2, Some(&mut d_a1), g, &mut col);
            } else {
                d_a1.copy_from_slice(di);
            }
            relu_backward(out(Stage::Conv1, i), &mut d_a1);
            let g = grads.as_deref_mut().map(|g| g.conv1.slices_mut());
            self.conv1.backward(&x[i * px..(i + 1) * px], h1, h1, &d_a1, Some(&mut dx[i * px..(i + 1) * px]), g, &mut col);
        }
        Ok(dx)
    }

    /// Mean cross-entropy loss and its parameter gradients for one batch.
    pub fn loss_and_grads(&self, x: &[T], labels: &[usize]) -> Result<(f64, EscherNet<T>, Forward<T>)> {
        let fwd = self.forward(x, labels.len())?;
        let (loss, d) = softmax_cross_entropy(fwd.logits(), labels, self.cfg.classes)?;
        let mut g = self.zeros_like();
        self.backward_from(&fwd, x, Stage::Fc2, d, Some(&mut g))?;
        Ok((loss, g, fwd))
    }

    /// Batch split into `chunks` pieces evaluated in parallel; gradients are
    /// summed in chunk order. Equal to [`Self::loss_and_grads`] up to rounding.
    pub fn loss_and_grads_parallel(&self, x: &[T], labels: &[usize], chunks: usize) -> Result<(f64, EscherNet<T>, Vec<T>)> {
        let n = labels.len();
        let px = self.cfg.input * self.cfg.input;
        let per = n.div_ceil(chunks.max(1));
        let parts: Vec<Result<(f64, EscherNet<T>, Vec<T>)>> = (0..n)
            .step_by(per.max(1))
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|start| {
                let end = (start + per).min(n);
                let (loss, mut g, fwd) = self.loss_and_grads(&x[start * px..end * px], &labels[start..end])?;
                // chunk losses and gradients are means over the chunk; rescale to the batch
                let w = T::of_f64((end - start) as f64 / n as f64);
                g.scale(w);
                Ok((loss * (end - start) as f64 / n as f64, g, fwd.logits().to_vec()))
            })
            .collect();
        let mut total = 0.0;
        let mut acc = self.zeros_like();
        let mut logits = Vec::with_capacity(n * self.cfg.classes);
        for p in parts {
            let (l, g, lg) = p?;
            total += l;
            acc.add_assign(&g);
            logits.extend(lg);
        }
        Ok((total, acc, logits))
    }

    pub fn scale(&mut self, s: T) {
        for (_, t) in self.params_mut() {
            t.data_mut().iter_mut().for_each(|v| *v *= s);
        }
    }

    pub fn add_assign(&mut self, other: &EscherNet<T>) {
        for ((_, a), (_, b)) in self.params_mut().into_iter().zip(other.params()) {
            for (x, y) in a.data_mut().iter_mut().zip(b.data()) {
                *x += *y;
            }
        }
    }

    /// `w <- w - lr * g`.
    pub fn sgd_step(&mut self, grads: &EscherNet<T>, lr: T) {
        for ((_, a), (_, g)) in self.params_mut().into_iter().zip(grads.params()) {
            for (x, y) in a.data_mut().iter_mut().zip(g.data()) {
                *x -= lr * *y;
            }
        }
    }

    /// Logits for `n` inputs, evaluated in batches of `batch`.
    pub fn logits(&self, x: &[T], n: usize, batch: usize) -> Result<Vec<T>> {
        let px = self.cfg.input * self.cfg.input;
        let mut out = Vec::with_capacity(n * self.cfg.classes);
        for start in (0..n).step_by(batch.max(1)) {
            let end = (start + batch.max(1)).min(n);
            out.extend_from_slice(self.forward(&x[start * px..end * px], end - start)?.logits());
        }
        Ok(out)
    }

    /// Converts every parameter to another precision.
    pub fn cast<U: Scalar>(&self) -> EscherNet<U> {
        let mut m = EscherNet::<U>::zeros(self.cfg).expect("validated config");
        for ((_, dst), (_, src)) in m.params_mut().into_iter().zip(self.params()) {
            *dst = src.cast();
        }
        m
    }
}
