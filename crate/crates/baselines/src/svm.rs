//! One-vs-one multiclass SVM with a Gaussian kernel.
//!
//! Each class pair gets a binary soft-margin machine trained by sequential
//! minimal optimization with second-order working-set selection. Prediction
//! is a majority vote over all machines; ties go to the lowest class index.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{BaselineError, Result};

pub const DEFAULT_C: f64 = 1.0;
pub const KKT_TOLERANCE: f64 = 1e-3;
const TAU: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub c: f64,
    /// Gaussian width; `None` uses the median pairwise distance.
    pub width: Option<f64>,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self { c: DEFAULT_C, width: None, tolerance: KKT_TOLERANCE, max_iterations: 1_000_000 }
    }
}

/// Binary machine separating `positive` (+1) from `negative` (-1).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinaryMachine {
    pub positive: usize,
    pub negative: usize,
    /// Indices of support vectors into the model's training rows.
    pub support: Vec<usize>,
    /// `y_i * alpha_i` for each support vector.
    pub coef: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub width: f64,
    pub c: f64,
    pub classes: Vec<usize>,
    pub rows: Vec<Vec<f64>>,
    pub machines: Vec<BinaryMachine>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn gaussian(d2: f64, width: f64) -> f64 {
    (-d2 / (2.0 * width * width)).exp()
}

/// Median Euclidean distance over all distinct pairs of rows.
pub fn median_distance(rows: &[Vec<f64>]) -> f64 {
    let mut d: Vec<f64> = (0..rows.len())
        .into_par_iter()
        .flat_map_iter(|i| (i + 1..rows.len()).map(move |j| (i, j)))
        .map(|(i, j)| sq_dist(&rows[i], &rows[j]).sqrt())
        .collect();
    if d.is_empty() {
        return 1.0;
    }
    let mid = d.len() / 2;
    let (_, m, _) = d.select_nth_unstable_by(mid, f64::total_cmp);
    if *m > 0.0 {
        *m
    } else {
        1.0
    }
}

/// Dense Gram matrix, row-major.
fn gram(rows: &[Vec<f64>], width: f64) -> Vec<f64> {
    let n = rows.len();
    let mut k = vec![0.0; n * n];
    k.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, v) in row.iter_mut().enumerate() {
            *v = gaussian(sq_dist(&rows[i], &rows[j]), width);
        }
    });
    k
}

struct Solution {
    alpha: Vec<f64>,
    bias: f64,
    iterations: usize,
}

/// Solves `min 1/2 a'Qa - e'a` s.t. `0 <= a <= c`, `y'a = 0`, with
/// `Q_ij = y_i y_j K_ij`; `kernel(i, j)` reads the Gram matrix.
fn smo(y: &[f64], kernel: impl Fn(usize, usize) -> f64, cfg: &SvmConfig) -> Solution {
    let n = y.len();
    let c = cfg.c;
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);
    let mut iterations = 0;
    while iterations < cfg.max_iterations {
        // i: maximal violator from the "up" set
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..n {
            if up(alpha[t], y[t]) && -y[t] * grad[t] > gmax {
                gmax = -y[t] * grad[t];
                i = t;
            }
        }
        if i == usize::MAX {
            break;
        }
        // j: best second-order gain from the "low" set
        let mut gmin = f64::INFINITY;
        let mut j = usize::MAX;
        let mut best = f64::INFINITY;
        for t in 0..n {
            if !low(alpha[t], y[t]) {
                continue;
            }
            let v = -y[t] * grad[t];
            gmin = gmin.min(v);
            let b = gmax - v;
            if b > 0.0 {
                let a = (kernel(i, i) + kernel(t, t) - 2.0 * kernel(i, t)).max(TAU);
                let gain = -(b * b) / a;
                if gain < best {
                    best = gain;
                    j = t;
                }
            }
        }
        if gmax - gmin < cfg.tolerance || j == usize::MAX {
            break;
        }
        iterations += 1;

        let (ai, aj) = (alpha[i], alpha[j]);
        let kij = kernel(i, j);
        let quad = (kernel(i, i) + kernel(j, j) - 2.0 * kij).max(TAU);
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = ai - aj;
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = ai + aj;
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = sum;
                }
                if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = sum;
                }
            }
        }
        let (di, dj) = (alpha[i] - ai, alpha[j] - aj);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * kernel(t, i) * di + y[j] * kernel(t, j) * dj);
        }
    }

    // threshold from free vectors, or the midpoint of the feasible range
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut sum) = (0usize, 0.0);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum += yg;
        }
    }
    let rho = if free > 0 { sum / free as f64 } else { (ub + lb) / 2.0 };
    Solution { alpha, bias: -rho, iterations }
}

pub fn svm_train(rows: &[Vec<f64>], labels: &[usize], cfg: &SvmConfig) -> Result<SvmModel> {
    if rows.len() != labels.len() || rows.is_empty() {
        return Err(BaselineError::Shape(format!("{} rows, {} labels", rows.len(), labels.len())));
    }
    if !(cfg.c > 0.0) {
        return Err(BaselineError::Shape(format!("box constraint {}", cfg.c)));
    }
    let classes: Vec<usize> = labels.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    if classes.len() < 2 {
        return Err(BaselineError::Degenerate(format!("only class {:?} present", classes)));
    }
    let width = cfg.width.unwrap_or_else(|| median_distance(rows));
    let k = gram(rows, width);
    let n = rows.len();
    let pairs: Vec<(usize, usize)> = classes
        .iter()
        .enumerate()
        .flat_map(|(a, &p)| classes[a + 1..].iter().map(move |&q| (p, q)))
        .collect();
    let machines = pairs
        .par_iter()
        .map(|&(p, q)| {
            let idx: Vec<usize> = (0..n).filter(|&i| labels[i] == p || labels[i] == q).collect();
            let y: Vec<f64> = idx.iter().map(|&i| if labels[i] == p { 1.0 } else { -1.0 }).collect();
            let sol = smo(&y, |a, b| k[idx[a] * n + idx[b]], cfg);
            let (support, coef) = idx
                .iter()
                .zip(&sol.alpha)
                .zip(&y)
                .filter(|((_, &a), _)| a > 0.0)
                .map(|((&i, &a), &yy)| (i, a * yy))
                .unzip();
            BinaryMachine { positive: p, negative: q, support, coef, bias: sol.bias, iterations: sol.iterations }
        })
        .collect();
    Ok(SvmModel { width, c: cfg.c, classes, rows: rows.to_vec(), machines })
}

impl SvmModel {
    /// Kernel values against every training row.
    fn kernel_row(&self, x: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| gaussian(sq_dist(r, x), self.width)).collect()
    }

    /// Winning class and the vote count of every class (in `classes` order).
    pub fn votes(&self, x: &[f64]) -> (usize, Vec<usize>) {
        let kr = self.kernel_row(x);
        let mut votes = vec![0usize; self.classes.len()];
        let pos = |c: usize| self.classes.binary_search(&c).expect("class of a machine");
        for m in &self.machines {
            let f: f64 = m.support.iter().zip(&m.coef).map(|(&i, &a)| a * kr[i]).sum::<f64>() + m.bias;
            votes[pos(if f > 0.0 { m.positive } else { m.negative })] += 1;
        }
        let best = (0..votes.len()).fold(0, |b, i| if votes[i] > votes[b] { i } else { b });
        (self.classes[best], votes)
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        self.votes(x).0
    }

    pub fn predict_all(&self, rows: &[Vec<f64>]) -> Vec<usize> {
        rows.par_iter().map(|r| self.predict(r)).collect()
    }
}
