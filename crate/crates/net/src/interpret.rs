//! Tools for looking inside a trained network: class activation heatmaps,
//! unregularized activation maximization, gradient-orientation histograms and
//! autocorrelation scale estimates.

use escher_core::image::PatternImage;
use escher_core::rng::rng_for;
use escher_core::umethod::{autocorrelate, PEAK_THRESHOLD};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NetError, Result};
use crate::layers::relu_backward;
use crate::model::{EscherNet, Stage};
use crate::scalar::Scalar;
use crate::train::{image_input, INPUT_OFFSET};

/// Non-negative map over a spatial grid, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl Heatmap {
    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Scaled so the maximum is 1; an all-zero map stays zero.
    pub fn normalized(&self) -> Heatmap {
        let m = self.max();
        let values = if m > 0.0 { self.values.iter().map(|v| v / m).collect() } else { self.values.clone() };
        Heatmap { values, ..*self }
    }

    /// Bilinear resampling with pixel centres aligned.
    pub fn upsample(&self, width: usize, height: usize) -> Heatmap {
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        let at = |x: usize, y: usize| self.values[y * self.width + x];
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (self.height - 1) as f64);
            let (y0, ty) = (fy.floor() as usize, fy - fy.floor());
            let y1 = (y0 + 1).min(self.height - 1);
            for x in 0..width {
                let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (self.width - 1) as f64);
                let (x0, tx) = (fx.floor() as usize, fx - fx.floor());
                let x1 = (x0 + 1).min(self.width - 1);
                let top = at(x0, y0) * (1.0 - tx) + at(x1, y0) * tx;
                let bottom = at(x0, y1) * (1.0 - tx) + at(x1, y1) * tx;
                values.push(top * (1.0 - ty) + bottom * ty);
            }
        }
        Heatmap { width, height, values }
    }

    /// Grayscale image with the maximum mapped to 1.
    pub fn to_image(&self) -> Result<PatternImage> {
        let n = self.normalized();
        Ok(PatternImage::new(self.width, self.height, n.values.iter().map(|&v| v as f32).collect())?)
    }
}

/// Gradient of one class logit with respect to the last pooled feature maps.
fn class_gradient_at_pool2<T: Scalar>(model: &EscherNet<T>, fwd: &crate::model::Forward<T>, class: usize) -> Vec<T> {
    let mut d_logits = vec![T::zero(); model.cfg.classes];
    d_logits[class] = T::one();
    let mut d_hidden = vec![T::zero(); model.cfg.hidden];
    model.fc2.backward(fwd.stage(Stage::Fc1), 1, &d_logits, Some(&mut d_hidden), None);
    relu_backward(fwd.stage(Stage::Fc1), &mut d_hidden);
    let mut d_pool = vec![T::zero(); model.cfg.feature_len()];
    model.fc1.backward(fwd.stage(Stage::Pool2), 1, &d_hidden, Some(&mut d_pool), None);
    d_pool
}

/// Class activation map on the last pooled feature maps: each channel is
/// weighted by the spatial mean of the class logit's gradient, the weighted
/// sum is rectified.
pub fn grad_cam<T: Scalar>(model: &EscherNet<T>, img: &PatternImage, class: usize) -> Result<Heatmap> {
    if class >= model.cfg.classes {
        return Err(NetError::Label(class, model.cfg.classes));
    }
    let x = image_input::<T>(img);
    let fwd = model.forward(&x, 1)?;
    let grad = class_gradient_at_pool2(model, &fwd, class);
    let (channels, side) = model.stage_shape(Stage::Pool2);
    let hw = side * side;
    let acts = fwd.stage(Stage::Pool2);
    let mut cam = vec![0.0f64; hw];
    for c in 0..channels {
        let g = &grad[c * hw..(c + 1) * hw];
        let alpha = g.iter().map(|v| v.as_f64()).sum::<f64>() / hw as f64;
        if alpha == 0.0 {
            continue;
        }
        for (out, a) in cam.iter_mut().zip(&acts[c * hw..(c + 1) * hw]) {
            *out += alpha * a.as_f64();
        }
    }
    cam.iter_mut().for_each(|v| *v = v.max(0.0));
    Ok(Heatmap { width: side, height: side, values: cam })
}

pub const ASCENT_ITERATIONS: usize = 500;
/// Step length per iteration as a fraction of the starting input's RMS.
pub const ASCENT_STEP: f64 = 1e-2;
/// Starting points tried before a unit is declared dead.
pub const DEAD_UNIT_RESEEDS: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Maximized {
    pub stage: Stage,
    pub unit: usize,
    /// Network input after the last step (already centred by [`INPUT_OFFSET`]).
    pub input: Vec<f64>,
    pub side: usize,
    /// Objective before the first step.
    pub initial: f64,
    /// Objective after each step.
    pub trace: Vec<f64>,
    pub iterations: usize,
    /// No starting point gave a non-zero gradient.
    pub dead: bool,
}

impl Maximized {
    /// Input rescaled to `[0, 1]` for display and symmetry scoring.
    pub fn image(&self) -> Result<PatternImage> {
        let v: Vec<f32> = self.input.iter().map(|&v| v as f32 + INPUT_OFFSET).collect();
        Ok(PatternImage::from_values_rescaled(self.side, self.side, &v)?)
    }

    /// Fraction of steps where the objective did not decrease.
    pub fn ascent_fraction(&self) -> f64 {
        if self.trace.is_empty() {
            return 0.0;
        }
        let mut prev = self.initial;
        let mut ok = 0;
        for &v in &self.trace {
            if v >= prev {
                ok += 1;
            }
            prev = v;
        }
        ok as f64 / self.trace.len() as f64
    }
}

/// Objective for one unit: the mean of its feature map for spatial stages,
/// the unit's value for fully connected ones. Returns the value and the
/// gradient with respect to the input.
fn unit_objective<T: Scalar>(model: &EscherNet<T>, x: &[T], stage: Stage, unit: usize) -> Result<(f64, Vec<T>)> {
    let fwd = model.forward(x, 1)?;
    let (channels, side) = model.stage_shape(stage);
    let hw = side * side;
    let out = &fwd.stage(stage)[unit * hw..(unit + 1) * hw];
    let value = out.iter().map(|v| v.as_f64()).sum::<f64>() / hw as f64;
    let mut d = vec![T::zero(); channels * hw];
    d[unit * hw..(unit + 1) * hw].fill(T::of_f64(1.0 / hw as f64));
    let grad = model.backward_from(&fwd, x, stage, d, None)?;
    Ok((value, grad))
}

fn rms<T: Scalar>(v: &[T]) -> f64 {
    (v.iter().map(|x| x.as_f64().powi(2)).sum::<f64>() / v.len() as f64).sqrt()
}

/// Gradient ascent on the input for exactly [`ASCENT_ITERATIONS`] fixed-length
/// steps along the normalized gradient, with no regularization. Starts from
/// uniform noise drawn from `seed`; a unit whose gradient is zero for every
/// one of [`DEAD_UNIT_RESEEDS`] starts is reported as dead.
pub fn maximize_activation<T: Scalar>(model: &EscherNet<T>, stage: Stage, unit: usize, seed: u64) -> Result<Maximized> {
    let (channels, _) = model.stage_shape(stage);
    if unit >= channels {
        return Err(NetError::Label(unit, channels));
    }
    let side = model.cfg.input;
    for attempt in 0..DEAD_UNIT_RESEEDS {
        let mut rng = rng_for(seed, &[attempt as u64]);
        let mut x: Vec<T> = (0..side * side).map(|_| T::of_f64(rng.gen_range(-0.5..0.5))).collect();
        let step = ASCENT_STEP * rms(&x);
        let (initial, mut grad) = unit_objective(model, &x, stage, unit)?;
        if rms(&grad) == 0.0 {
            continue;
        }
        let mut trace = Vec::with_capacity(ASCENT_ITERATIONS);
        for _ in 0..ASCENT_ITERATIONS {
            let g = rms(&grad);
            if g > 0.0 {
                let s = T::of_f64(step / g);
                for (xi, gi) in x.iter_mut().zip(&grad) {
                    *xi += s * *gi;
                }
            }
            let (value, next) = unit_objective(model, &x, stage, unit)?;
            trace.push(value);
            grad = next;
        }
        return Ok(Maximized {
            stage,
            unit,
            input: x.iter().map(|v| v.as_f64()).collect(),
            side,
            initial,
            trace,
            iterations: ASCENT_ITERATIONS,
            dead: false,
        });
    }
    Ok(Maximized {
        stage,
        unit,
        input: Vec::new(),
        side,
        initial: 0.0,
        trace: Vec::new(),
        iterations: 0,
        dead: true,
    })
}

pub const ORIENTATION_BINS: usize = 36;

/// Softmax-normalized histogram of edge orientations over `[0, 180)` degrees.
/// Bin `i` is centred on `i * 5` degrees. The angle is the edge direction
/// measured from the vertical image axis, which equals the gradient angle
/// folded into `[0, 180)`: vertical stripes fall in bin 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrientationHistogram {
    pub weights: Vec<f64>,
}

impl OrientationHistogram {
    pub fn bin_width() -> f64 {
        180.0 / ORIENTATION_BINS as f64
    }

    pub fn argmax(&self) -> usize {
        (0..self.weights.len()).fold(0, |b, i| if self.weights[i] > self.weights[b] { i } else { b })
    }

    /// Circular local maxima above the uniform level, strongest first, in degrees.
    pub fn dominant_angles(&self) -> Vec<f64> {
        let n = self.weights.len();
        let uniform = 1.0 / n as f64;
        let mut peaks: Vec<(usize, f64)> = (0..n)
            .filter(|&i| {
                let w = self.weights[i];
                w > uniform && w > self.weights[(i + n - 1) % n] && w >= self.weights[(i + 1) % n]
            })
            .map(|i| (i, self.weights[i]))
            .collect();
        peaks.sort_by(|a, b| b.1.total_cmp(&a.1));
        peaks.into_iter().map(|(i, _)| i as f64 * Self::bin_width()).collect()
    }
}

/// Numerically stable softmax; adding a constant to every vote leaves the
/// result unchanged.
pub fn softmax_votes(votes: &[f64]) -> Vec<f64> {
    let m = votes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = votes.iter().map(|v| (v - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

/// Hough-style accumulation of gradient orientations: every pixel votes with
/// its gradient magnitude, split linearly between the two nearest bins.
/// Votes are divided by the number of voting pixels and multiplied by the
/// bin count, so an image whose edges all share one orientation puts its
/// mean gradient magnitude times the bin count into that bin, independent
/// of image size.
pub fn orientation_votes(img: &PatternImage) -> Result<Vec<f64>> {
    if img.is_constant() {
        return Err(escher_core::Error::Degenerate("constant image has no orientation".into()).into());
    }
    let (w, h) = (img.width(), img.height());
    let mut votes = vec![0.0; ORIENTATION_BINS];
    let mut voters = 0usize;
    let bw = OrientationHistogram::bin_width();
    for y in 1..h.saturating_sub(1) {
        for x in 1..w.saturating_sub(1) {
            if !(img.is_valid(x - 1, y) && img.is_valid(x + 1, y) && img.is_valid(x, y - 1) && img.is_valid(x, y + 1)) {
                continue;
            }
            voters += 1;
            let gx = (img.get(x + 1, y) - img.get(x - 1, y)) as f64 * 0.5;
            let gy = (img.get(x, y + 1) - img.get(x, y - 1)) as f64 * 0.5;
            let mag = gx.hypot(gy);
            if mag == 0.0 {
                continue;
            }
            let angle = gy.atan2(gx).to_degrees().rem_euclid(180.0);
            let pos = angle / bw;
            let lo = pos.floor();
            let t = pos - lo;
            let lo = lo as usize % ORIENTATION_BINS;
            votes[lo] += mag * (1.0 - t);
            votes[(lo + 1) % ORIENTATION_BINS] += mag * t;
        }
    }
    let norm = ORIENTATION_BINS as f64 / voters.max(1) as f64;
    votes.iter_mut().for_each(|v| *v *= norm);
    Ok(votes)
}

pub fn orientation_histogram(img: &PatternImage) -> Result<OrientationHistogram> {
    Ok(OrientationHistogram { weights: softmax_votes(&orientation_votes(img)?) })
}

/// Distance from the zero lag to the nearest autocorrelation peak, or `None`
/// when no off-centre peak reaches the detection threshold. Peaks joined to
/// the zero lag by a ridge (the correlation halfway there is still at least
/// half the peak height, as along the direction of stripes) are not repeats
/// and are ignored.
pub fn estimate_scale(img: &PatternImage) -> Result<Option<f64>> {
    if img.is_constant() {
        return Err(escher_core::Error::Degenerate("constant image has no scale".into()).into());
    }
    let surface = autocorrelate(img)?;
    Ok(surface
        .peaks(PEAK_THRESHOLD)
        .into_iter()
        .filter(|&(p, v)| surface.sample(p[0] / 2.0, p[1] / 2.0).is_some_and(|mid| mid < 0.5 * v))
        .map(|(p, _)| p[0].hypot(p[1]))
        .min_by(f64::total_cmp))
}

/// Indices ordered by ascending period; aperiodic images go last, ties keep
/// their input order.
pub fn sort_filters_by_scale(periods: &[Option<f64>]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..periods.len()).collect();
    idx.sort_by(|&a, &b| match (periods[a], periods[b]) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    idx
}

/// Per-filter summary written next to gallery images.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub stage: String,
    pub unit: usize,
    pub dead: bool,
    pub period: Option<f64>,
    pub dominant_angles: Vec<f64>,
    pub trace: Vec<f64>,
}

impl FilterReport {
    pub fn from_maximized(m: &Maximized) -> Result<Self> {
        let (period, dominant_angles) = if m.dead {
            (None, Vec::new())
        } else {
            let img = m.image()?;
            let period = estimate_scale(&img).unwrap_or(None);
            let angles = orientation_histogram(&img).map(|h| h.dominant_angles()).unwrap_or_default();
            (period, angles)
        };
        Ok(Self {
            stage: m.stage.name().to_string(),
            unit: m.unit,
            dead: m.dead,
            period,
            dominant_angles,
            trace: m.trace.clone(),
        })
    }
}
