//! Finite-difference verification of every backward pass.
//!
//! Analytic gradients are computed in the precision under test; the
//! numerical reference is always a central difference in `f64`. Each
//! compared entry's error is `|analytic - numeric| / scale`, where `scale`
//! is the largest analytic magnitude in that tensor (at least
//! [`SCALE_FLOOR`]). Perturbations that flip a ReLU or move a pooling
//! argmax cross a kink, so those entries are skipped and counted.

use std::collections::BTreeMap;

use escher_core::rng::rng_for;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::layers::*;
use crate::model::{EscherNet, ModelConfig, Stage};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const STEP: f64 = 1e-5;
pub const SCALE_FLOOR: f64 = 1e-3;
/// Entries compared per tensor in each trial.
const ENTRIES_PER_TENSOR: usize = 8;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub dtype: String,
    pub trials: usize,
    pub checked: usize,
    pub skipped: usize,
    /// Largest relative error seen per tensor or layer name.
    pub max_rel: BTreeMap<String, f64>,
}

impl GradcheckReport {
    fn new<T: Scalar>() -> Self {
        Self { dtype: T::DTYPE.to_string(), ..Self::default() }
    }

    fn record(&mut self, name: &str, err: f64) {
        let e = self.max_rel.entry(name.to_string()).or_insert(0.0);
        *e = e.max(err);
        self.checked += 1;
    }

    pub fn worst(&self) -> f64 {
        self.max_rel.values().copied().fold(0.0, f64::max)
    }

    pub fn skipped_fraction(&self) -> f64 {
        self.skipped as f64 / (self.checked + self.skipped).max(1) as f64
    }

    fn merge(&mut self, other: GradcheckReport) {
        self.trials += other.trials;
        self.checked += other.checked;
        self.skipped += other.skipped;
        for (k, v) in other.max_rel {
            let e = self.max_rel.entry(k).or_insert(0.0);
            *e = e.max(v);
        }
    }
}

fn to_f64<T: Scalar>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.as_f64()).collect()
}

fn cast<T: Scalar>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&x| T::of_f64(x)).collect()
}

fn uniform(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn pick(rng: &mut impl Rng, len: usize) -> Vec<usize> {
    if len <= ENTRIES_PER_TENSOR {
        (0..len).collect()
    } else {
        (0..ENTRIES_PER_TENSOR).map(|_| rng.gen_range(0..len)).collect()
    }
}

fn scale_of(analytic: &[f64]) -> f64 {
    analytic.iter().fold(SCALE_FLOOR, |m, v| m.max(v.abs()))
}

/// Compares the listed entries of `analytic` against central differences
/// of `f` around `base`. `f` returns `None` when the perturbed point lies in
/// a different linear piece than `base`.
fn compare(
    report: &mut GradcheckReport,
    name: &str,
    base: &[f64],
    analytic: &[f64],
    entries: &[usize],
    mut f: impl FnMut(&[f64]) -> Option<f64>,
) {
    let scale = scale_of(analytic);
    let mut x = base.to_vec();
    for &i in entries {
        x[i] = base[i] + STEP;
        let plus = f(&x);
        x[i] = base[i] - STEP;
        let minus = f(&x);
        x[i] = base[i];
        match (plus, minus) {
            (Some(p), Some(m)) => {
                let numeric = (p - m) / (2.0 * STEP);
                report.record(name, (analytic[i] - numeric).abs() / scale);
            }
            _ => report.skipped += 1,
        }
    }
}

/// Random small configuration: input 4 or 8, 1..=3 channels per block,
/// kernels in {1, 3, 5}, 2..=6 hidden units, 2..=5 classes.
fn random_config(rng: &mut impl Rng) -> ModelConfig {
    let k = [1, 3, 5];
    ModelConfig {
        input: [4, 8][rng.gen_range(0..2)],
        channels: [rng.gen_range(1..=3), rng.gen_range(1..=3)],
        kernels: [k[rng.gen_range(0..3)], k[rng.gen_range(0..3)]],
        hidden: rng.gen_range(2..=6),
        classes: rng.gen_range(2..=5),
    }
}

fn net_loss(model: &EscherNet<f64>, x: &[f64], n: usize, labels: &[usize]) -> (f64, (Vec<bool>, Vec<u32>)) {
    let fwd = model.forward(x, n).expect("valid shapes");
    let (loss, _) = softmax_cross_entropy(fwd.logits(), labels, model.cfg.classes).expect("valid labels");
    (loss, fwd.pattern())
}

/// Whole-network check: every parameter tensor and the input, on random
/// small networks and batches.
pub fn check_network<T: Scalar>(trials: usize, seed: u64) -> Result<GradcheckReport> {
    let mut report = GradcheckReport::new::<T>();
    for trial in 0..trials {
        let mut rng = rng_for(seed, &[trial as u64]);
        // redraw until the tested precision and the reference agree on the
        // activation pattern at the base point
        for _ in 0..20 {
            let cfg = random_config(&mut rng);
            let reference = EscherNet::<f64>::init(cfg, &mut StdRng::seed_from_u64(rng.gen()))?;
            let tested: EscherNet<T> = reference.cast();
            let reference: EscherNet<f64> = tested.cast();
            let n = rng.gen_range(1..=3);
            let x64 = to_f64(&cast::<T>(&uniform(&mut rng, n * cfg.input * cfg.input)));
            let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..cfg.classes)).collect();

            let xt: Vec<T> = cast(&x64);
            let fwd = tested.forward(&xt, n)?;
            let (_, base_pattern) = net_loss(&reference, &x64, n, &labels);
            if fwd.pattern() != base_pattern {
                continue;
            }
            let (_, d) = softmax_cross_entropy(fwd.logits(), &labels, cfg.classes)?;
            let mut grads = tested.zeros_like();
            let dx = to_f64(&tested.backward_from(&fwd, &xt, Stage::Fc2, d, Some(&mut grads))?);

            let same = |m: &EscherNet<f64>, x: &[f64]| {
                let (loss, p) = net_loss(m, x, n, &labels);
                (p == base_pattern).then_some(loss)
            };
            let entries = pick(&mut rng, x64.len());
            compare(&mut report, "input", &x64, &dx, &entries, |x| same(&reference, x));
            let names: Vec<&str> = reference.params().iter().map(|(n, _)| *n).collect();
            for (pi, name) in names.iter().enumerate() {
                let analytic = to_f64(grads.params()[pi].1.data());
                let base = reference.params()[pi].1.data().to_vec();
                let entries = pick(&mut rng, base.len());
                let mut probe = reference.clone();
                compare(&mut report, name, &base, &analytic, &entries, |w| {
                    let shape = probe.params()[pi].1.shape().to_vec();
                    *probe.params_mut()[pi].1 = Tensor::from_vec(&shape, w.to_vec()).expect("same length");
                    same(&probe, x64.as_slice())
                });
            }
            report.trials += 1;
            break;
        }
    }
    Ok(report)
}

/// Each layer type on its own, with loss `sum(r * output)` for a random
/// probe `r` (cross-entropy for the loss layer).
pub fn check_layers<T: Scalar>(trials: usize, seed: u64) -> Result<GradcheckReport> {
    let mut report = GradcheckReport::new::<T>();
    for trial in 0..trials {
        let mut rng = rng_for(seed, &[trial as u64, 1]);
        report.merge(check_conv::<T>(&mut rng)?);
        report.merge(check_linear::<T>(&mut rng)?);
        report.merge(check_relu::<T>(&mut rng));
        report.merge(check_pool::<T>(&mut rng));
        report.merge(check_softmax_xent::<T>(&mut rng)?);
        report.trials += 1;
    }
    report.trials = trials;
    Ok(report)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Rounds through the tested precision so both paths see the same values.
fn through<T: Scalar>(v: Vec<f64>) -> Vec<f64> {
    to_f64(&cast::<T>(&v))
}

fn check_conv<T: Scalar>(rng: &mut impl Rng) -> Result<GradcheckReport> {
    let mut report = GradcheckReport::new::<T>();
    let (cin, cout, k) = (rng.gen_range(1..=3), rng.gen_range(1..=3), [1, 3, 5][rng.gen_range(0..3)]);
    let (h, w) = (rng.gen_range(2..=6), rng.gen_range(2..=6));
    let x = through::<T>(uniform(rng, cin * h * w));
    let wt = through::<T>(uniform(rng, cout * cin * k * k));
    let b = through::<T>(uniform(rng, cout));
    let r = through::<T>(uniform(rng, cout * h * w));
    let layer = |wt: &[f64], b: &[f64]| -> Conv2d<f64> {
        let mut c = Conv2d::new(cin, cout, k).expect("valid");
        c.weight = Tensor::from_vec(&[cout, cin, k, k], wt.to_vec()).expect("len");
        c.bias = Tensor::from_vec(&[cout], b.to_vec()).expect("len");
        c
    };
    let eval = |c: &Conv2d<f64>, x: &[f64]| {
        let mut out = vec![0.0; cout * h * w];
        c.forward(x, h, w, &mut out, &mut Vec::new());
        Some(dot(&out, &r))
    };
    let mut ct = Conv2d::<T>::new(cin, cout, k)?;
    ct.weight = Tensor::from_vec(&[cout, cin, k, k], cast(&wt))?;
    ct.bias = Tensor::from_vec(&[cout], cast(&b))?;
    let mut dx = vec![T::zero(); cin * h * w];
    let mut gw = vec![T::zero(); wt.len()];
    let mut gb = vec![T::zero(); cout];
    ct.backward(&cast::<T>(&x), h, w, &cast::<T>(&r), Some(&mut dx), Some((&mut gw, &mut gb)), &mut Vec::new());
    let c64 = layer(&wt, &b);
    compare(&mut report, "conv.input", &x, &to_f64(&dx), &pick(rng, x.len()), |x| eval(&c64, x));
    compare(&mut report, "conv.weight", &wt, &to_f64(&gw), &pick(rng, wt.len()), |wv| eval(&layer(wv, &b), &x));
    compare(&mut report, "conv.bias", &b, &to_f64(&gb), &pick(rng, b.len()), |bv| eval(&layer(&wt, bv), &x));
    Ok(report)
}

fn check_linear<T: Scalar>(rng: &mut impl Rng) -> Result<GradcheckReport> {
    let mut report = GradcheckReport::new::<T>();
    let (n, din, dout) = (rng.gen_range(1..=4), rng.gen_range(1..=8), rng.gen_range(1..=6));
    let x = through::<T>(uniform(rng, n * din));
    let wt = through::<T>(uniform(rng, dout * din));
    let b = through::<T>(uniform(rng, dout));
    let r = through::<T>(uniform(rng, n * dout));
    let layer = |wt: &[f64], b: &[f64]| -> Linear<f64> {
        let mut l = Linear::new(din, dout).expect("valid");
        l.weight = Tensor::from_vec(&[dout, din], wt.to_vec()).expect("len");
        l.bias = Tensor::from_vec(&[dout], b.to_vec()).expect("len");
        l
    };
    let eval = |l: &Linear<f64>, x: &[f64]| {
        let mut y = vec![0.0; n * dout];
        l.forward(x, n, &mut y);
        Some(dot(&y, &r))
    };
    let mut lt = Linear::<T>::new(din, dout)?;
    lt.weight = Tensor::from_vec(&[dout, din], cast(&wt))?;
    lt.bias = Tensor::from_vec(&[dout], cast(&b))?;
    let mut dx = vec![T::zero(); n * din];
    let mut gw = vec![T::zero(); wt.len()];
    let mut gb = vec![T::zero(); dout];
    lt.backward(&cast::<T>(&x), n, &cast::<T>(&r), Some(&mut dx), Some((&mut gw, &mut gb)));
    let l64 = layer(&wt, &b);
    compare(&mut report, "fc.input", &x, &to_f64(&dx), &pick(rng, x.len()), |x| eval(&l64, x));
    compare(&mut report, "fc.weight", &wt, &to_f64(&gw), &pick(rng, wt.len()), |wv| eval(&layer(wv, &b), &x));
    compare(&mut report, "fc.bias", &b, &to_f64(&gb), &pick(rng, b.len()), |bv| eval(&layer(&wt, bv), &x));
    Ok(report)
}

fn check_relu<T: Scalar>(rng: &mut impl Rng) -> GradcheckReport {
    let mut report = GradcheckReport::new::<T>();
    let len = rng.gen_range(1..=32);
    let x = through::<T>(uniform(rng, len));
    let r = through::<T>(uniform(rng, len));
    let mut y: Vec<T> = cast(&x);
    relu_forward(&mut y);
    let mut d: Vec<T> = cast(&r);
    relu_backward(&y, &mut d);
    let signs: Vec<bool> = x.iter().map(|v| *v > 0.0).collect();
    compare(&mut report, "relu", &x, &to_f64(&d), &pick(rng, len), |xv| {
        let same = xv.iter().map(|v| *v > 0.0).eq(signs.iter().copied());
        same.then(|| xv.iter().zip(&r).map(|(v, r)| v.max(0.0) * r).sum())
    });
    report
}

fn check_pool<T: Scalar>(rng: &mut impl Rng) -> GradcheckReport {
    let mut report = GradcheckReport::new::<T>();
    let (c, h, w) = (rng.gen_range(1..=3), 2 * rng.gen_range(1..=4), 2 * rng.gen_range(1..=4));
    let out_len = c * (h / 2) * (w / 2);
    let x = through::<T>(uniform(rng, c * h * w));
    let r = through::<T>(uniform(rng, out_len));
    let pool = |x: &[f64]| {
        let mut out = vec![0.0; out_len];
        let mut idx = vec![0u32; out_len];
        maxpool_forward(x, c, h, w, &mut out, &mut idx);
        (dot(&out, &r), idx)
    };
    let (_, base_idx) = pool(&x);
    let mut out = vec![T::zero(); out_len];
    let mut idx = vec![0u32; out_len];
    maxpool_forward(&cast::<T>(&x), c, h, w, &mut out, &mut idx);
    let mut dx = vec![T::zero(); x.len()];
    maxpool_backward(&cast::<T>(&r), &idx, &mut dx);
    compare(&mut report, "pool", &x, &to_f64(&dx), &pick(rng, x.len()), |xv| {
        let (v, i) = pool(xv);
        (i == base_idx).then_some(v)
    });
    report
}

fn check_softmax_xent<T: Scalar>(rng: &mut impl Rng) -> Result<GradcheckReport> {
    let mut report = GradcheckReport::new::<T>();
    let (n, classes) = (rng.gen_range(1..=4), rng.gen_range(2..=17));
    let z: Vec<f64> = through::<T>(uniform(rng, n * classes).into_iter().map(|v| 3.0 * v).collect());
    let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..classes)).collect();
    let (_, d) = softmax_cross_entropy(&cast::<T>(&z), &labels, classes)?;
    compare(&mut report, "softmax_xent", &z, &to_f64(&d), &pick(rng, z.len()), |zv| {
        // log-sum-exp form, independent of the layer's own code
        let mut loss = 0.0;
        for (row, &l) in zv.chunks(classes).zip(&labels) {
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            loss += lse - row[l];
        }
        Some(loss / n as f64)
    });
    Ok(report)
}
