//! Unsupervised wallpaper-group classification.
//!
//! The translation lattice comes from peaks of the image autocorrelation. Each
//! of the twelve candidate symmetries is scored by the best normalized
//! cross-correlation between the image and a transformed copy, searched over
//! rotation centers (or axis offsets) inside one unit cell. A group's margin is
//! its weakest defining score minus its strongest non-defining score.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft;
use crate::group::{
    defining_profile, profile_variants, Symmetry, SymmetryKind, SymmetryProfile, WallpaperGroup,
    NUM_GROUPS, NUM_SYMMETRIES,
};
use crate::image::PatternImage;
use crate::isometry::{
    add, cross, dot, mat_vec, norm, rotation_matrix, scale, sub, transpose, Mat2, Vec2,
};
use crate::lattice::LatticeBasis;

pub const MIN_SIZE: usize = 64;
pub const PEAK_THRESHOLD: f64 = 0.3;
const PEAK_WINDOW: i64 = 2;
const MIN_PEAK_DIST: f64 = 6.0;
/// Candidate basis vectors must reach this fraction of the strongest peak.
const STRONG_PEAK_FRACTION: f64 = 0.5;
const MAX_CANDIDATES: usize = 12;
/// Pairs scoring within this of the best count as ties, broken by smaller area.
const PAIR_SCORE_SLACK: f64 = 0.05;
/// Fraction of the image side, centered, over which correlations are measured.
/// Scale in pixels of the low-frequency content removed before scoring.
pub const BAND_PASS_SIGMA: f64 = 1.5;
pub const REGION_FRACTION: f64 = 0.75;

/// Normalized autocorrelation over lags `[-max_lag, max_lag]²`.
#[derive(Clone, Debug)]
pub struct CorrSurface {
    max_lag: usize,
    values: Vec<f64>,
}

impl CorrSurface {
    pub fn max_lag(&self) -> usize {
        self.max_lag
    }

    fn side(&self) -> usize {
        2 * self.max_lag + 1
    }

    pub fn get(&self, dx: i64, dy: i64) -> f64 {
        let m = self.max_lag as i64;
        if dx.abs() > m || dy.abs() > m {
            return f64::NAN;
        }
        self.values[((dy + m) as usize) * self.side() + (dx + m) as usize]
    }

    fn in_range(&self, dx: i64, dy: i64) -> bool {
        let m = self.max_lag as i64;
        dx.abs() <= m && dy.abs() <= m
    }

    /// Bilinear interpolation; `None` outside the lag range.
    pub fn sample(&self, x: f64, y: f64) -> Option<f64> {
        let m = self.max_lag as f64;
        if x.abs() > m || y.abs() > m {
            return None;
        }
        let (x0, y0) = (x.floor() as i64, y.floor() as i64);
        let (fx, fy) = (x - x0 as f64, y - y0 as f64);
        let g = |dx: i64, dy: i64| {
            if self.in_range(dx, dy) {
                self.get(dx, dy)
            } else {
                self.get(dx.clamp(-(m as i64), m as i64), dy.clamp(-(m as i64), m as i64))
            }
        };
        let top = g(x0, y0) * (1.0 - fx) + g(x0 + 1, y0) * fx;
        let bot = g(x0, y0 + 1) * (1.0 - fx) + g(x0 + 1, y0 + 1) * fx;
        Some(top * (1.0 - fy) + bot * fy)
    }

    /// Peak height near `(x, y)`: the largest grid value within one pixel,
    /// raised by a per-axis parabola through its neighbours. Sharp peaks
    /// that fall between grid points are not penalized.
    fn peak_height(&self, x: f64, y: f64) -> Option<f64> {
        let (x0, y0) = (x.round() as i64, y.round() as i64);
        let mut best: Option<(f64, i64, i64)> = None;
        for ey in -1..=1 {
            for ex in -1..=1 {
                let (gx, gy) = (x0 + ex, y0 + ey);
                if self.in_range(gx, gy) && best.map_or(true, |b| self.get(gx, gy) > b.0) {
                    best = Some((self.get(gx, gy), gx, gy));
                }
            }
        }
        let (c, gx, gy) = best?;
        let lift = |lo: f64, hi: f64| {
            let den = lo - 2.0 * c + hi;
            if den < 0.0 {
                let off = (0.5 * (lo - hi) / den).clamp(-0.5, 0.5);
                -0.25 * (lo - hi) * off
            } else {
                0.0
            }
        };
        let mut v = c;
        if self.in_range(gx - 1, gy) && self.in_range(gx + 1, gy) {
            v += lift(self.get(gx - 1, gy), self.get(gx + 1, gy));
        }
        if self.in_range(gx, gy - 1) && self.in_range(gx, gy + 1) {
            v += lift(self.get(gx, gy - 1), self.get(gx, gy + 1));
        }
        Some(v)
    }

    fn is_local_max(&self, dx: i64, dy: i64) -> bool {
        let v = self.get(dx, dy);
        for ey in -PEAK_WINDOW..=PEAK_WINDOW {
            for ex in -PEAK_WINDOW..=PEAK_WINDOW {
                if (ex, ey) != (0, 0) && self.in_range(dx + ex, dy + ey) && self.get(dx + ex, dy + ey) > v {
                    return false;
                }
            }
        }
        true
    }

    /// Quadratic sub-pixel refinement of an integer peak.
    fn refine_peak(&self, dx: i64, dy: i64) -> Vec2 {
        let axis = |lo: f64, c: f64, hi: f64| {
            let den = lo - 2.0 * c + hi;
            if den < 0.0 {
                (0.5 * (lo - hi) / den).clamp(-0.5, 0.5)
            } else {
                0.0
            }
        };
        let c = self.get(dx, dy);
        let ox = if self.in_range(dx - 1, dy) && self.in_range(dx + 1, dy) {
            axis(self.get(dx - 1, dy), c, self.get(dx + 1, dy))
        } else {
            0.0
        };
        let oy = if self.in_range(dx, dy - 1) && self.in_range(dx, dy + 1) {
            axis(self.get(dx, dy - 1), c, self.get(dx, dy + 1))
        } else {
            0.0
        };
        [dx as f64 + ox, dy as f64 + oy]
    }

    /// Off-DC local maxima at or above `threshold`, as (position, value).
    pub fn peaks(&self, threshold: f64) -> Vec<(Vec2, f64)> {
        let m = self.max_lag as i64;
        let mut out = Vec::new();
        for dy in -m..=m {
            for dx in -m..=m {
                let v = self.get(dx, dy);
                if v < threshold || ((dx * dx + dy * dy) as f64) < MIN_PEAK_DIST * MIN_PEAK_DIST {
                    continue;
                }
                if self.is_local_max(dx, dy) {
                    out.push((self.refine_peak(dx, dy), v));
                }
            }
        }
        out
    }
}

/// Mean-removed autocorrelation normalized by overlap count, scaled so the
/// zero lag equals 1. Masked pixels are ignored.
pub fn autocorrelate(img: &PatternImage) -> Result<CorrSurface> {
    let (w, h) = (img.width(), img.height());
    if w < MIN_SIZE || h < MIN_SIZE {
        return Err(Error::Degenerate(format!(
            "{w}x{h} image is below the {MIN_SIZE}x{MIN_SIZE} minimum"
        )));
    }
    let valid: Vec<f64> = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .map(|(x, y)| if img.is_valid(x, y) { 1.0 } else { 0.0 })
        .collect();
    let count: f64 = valid.iter().sum();
    if count < 2.0 {
        return Err(Error::NoStructure);
    }
    let mean = img.mean();
    let centered: Vec<f64> = img
        .pixels()
        .iter()
        .zip(&valid)
        .map(|(&p, &m)| (p as f64 - mean) * m)
        .collect();
    let energy: f64 = centered.iter().map(|v| v * v).sum();
    if energy <= 1e-12 * count {
        return Err(Error::NoStructure);
    }
    let max_lag = (w.min(h) * 5) / 8;
    let pw = (w + max_lag + 1).next_power_of_two();
    let ph = (h + max_lag + 1).next_power_of_two();
    let corr = |src: &[f64]| {
        let mut buf = vec![Complex64::new(0.0, 0.0); pw * ph];
        for y in 0..h {
            for x in 0..w {
                buf[y * pw + x] = Complex64::new(src[y * w + x], 0.0);
            }
        }
        fft::fft2(&mut buf, pw, ph, false);
        for c in &mut buf {
            *c = Complex64::new(c.norm_sqr(), 0.0);
        }
        fft::inverse_real(buf, pw, ph)
    };
    let r = corr(&centered);
    let overlap = corr(&valid);
    let zero = r[0] / overlap[0];
    let side = 2 * max_lag + 1;
    let mut values = vec![0.0; side * side];
    let m = max_lag as i64;
    for dy in -m..=m {
        for dx in -m..=m {
            let idx = (dy.rem_euclid(ph as i64) as usize) * pw + dx.rem_euclid(pw as i64) as usize;
            let n = overlap[idx];
            let v = if n >= 0.5 { r[idx] / n / zero } else { 0.0 };
            values[((dy + m) as usize) * side + (dx + m) as usize] = v;
        }
    }
    Ok(CorrSurface { max_lag, values })
}

fn lattice_fit_score(s: &CorrSurface, b: &LatticeBasis) -> f64 {
    let lim = s.max_lag() as f64 - 1.0;
    let mut total = 0.0;
    let mut count = 0;
    for n in -3i32..=3 {
        for k in -3i32..=3 {
            if (n, k) == (0, 0) {
                continue;
            }
            let p = b.to_cartesian([n as f64, k as f64]);
            if p[0].abs() <= lim && p[1].abs() <= lim {
                total += s.peak_height(p[0], p[1]).unwrap_or(0.0);
                count += 1;
            }
        }
    }
    if count == 0 {
        0.0
    } else {
        total / count as f64
    }
}

/// Sub-pixel peak nearest to `p` within two pixels, if above threshold.
fn peak_near(s: &CorrSurface, p: Vec2) -> Option<Vec2> {
    let (cx, cy) = (p[0].round() as i64, p[1].round() as i64);
    let mut best: Option<(i64, i64, f64)> = None;
    for dy in -2..=2 {
        for dx in -2..=2 {
            let (x, y) = (cx + dx, cy + dy);
            if !s.in_range(x, y) {
                continue;
            }
            let v = s.get(x, y);
            if best.map_or(true, |b| v > b.2) {
                best = Some((x, y, v));
            }
        }
    }
    let (x, y, v) = best?;
    (v >= PEAK_THRESHOLD && s.is_local_max(x, y)).then(|| s.refine_peak(x, y))
}

/// Least-squares fit of the basis to all lattice peaks it predicts.
fn refine_basis(s: &CorrSurface, b: &LatticeBasis) -> LatticeBasis {
    let lim = s.max_lag() as f64 - 2.0;
    let mut cur = *b;
    for _ in 0..2 {
        // normal equations: B (Σ k kᵀ) = Σ p kᵀ
        let mut kk = [[0.0; 2]; 2];
        let mut pk = [[0.0; 2]; 2];
        let mut used = 0;
        for n in -4i32..=4 {
            for k in -4i32..=4 {
                if (n, k) == (0, 0) {
                    continue;
                }
                let pred = cur.to_cartesian([n as f64, k as f64]);
                if pred[0].abs() > lim || pred[1].abs() > lim {
                    continue;
                }
                if let Some(p) = peak_near(s, pred) {
                    let kv = [n as f64, k as f64];
                    for i in 0..2 {
                        for j in 0..2 {
                            kk[i][j] += kv[i] * kv[j];
                            pk[i][j] += p[i] * kv[j];
                        }
                    }
                    used += 1;
                }
            }
        }
        if used < 3 {
            break;
        }
        let Some(inv) = crate::isometry::inverse(&kk) else { break };
        let m = crate::isometry::mat_mul(&pk, &inv);
        match LatticeBasis::new([m[0][0], m[1][0]], [m[0][1], m[1][1]]) {
            Ok(nb) => cur = nb,
            Err(_) => break,
        }
    }
    cur
}

/// Translation lattice from an autocorrelation surface, reduced and canonicalized.
pub fn find_lattice(s: &CorrSurface) -> Result<LatticeBasis> {
    let mut peaks: Vec<(Vec2, f64)> = s
        .peaks(PEAK_THRESHOLD)
        .into_iter()
        .filter(|(p, _)| p[1] > 0.0 || (p[1] == 0.0 && p[0] > 0.0))
        .collect();
    // Weak secondary peaks are common; keep those comparable to the strongest.
    let top = peaks.iter().map(|p| p.1).fold(0.0, f64::max);
    peaks.retain(|p| p.1 >= STRONG_PEAK_FRACTION * top);
    peaks.sort_by(|a, b| norm(a.0).total_cmp(&norm(b.0)));
    peaks.truncate(MAX_CANDIDATES);
    let mut pairs = Vec::new();
    for i in 0..peaks.len() {
        for j in i + 1..peaks.len() {
            let (a, b) = (peaks[i].0, peaks[j].0);
            if cross(a, b).abs() < 0.2 * norm(a) * norm(b) {
                continue;
            }
            let basis = LatticeBasis::new(a, b)?.reduced();
            pairs.push((lattice_fit_score(s, &basis), basis));
        }
    }
    let best = pairs
        .iter()
        .map(|p| p.0)
        .fold(f64::NEG_INFINITY, f64::max);
    if pairs.is_empty() || best <= 0.0 {
        return Err(Error::LatticeNotFound(format!(
            "{} peaks above {PEAK_THRESHOLD}, no independent pair",
            peaks.len()
        )));
    }
    let chosen = pairs
        .iter()
        .filter(|p| p.0 >= best - PAIR_SCORE_SLACK)
        .min_by(|a, b| {
            a.1.area()
                .total_cmp(&b.1.area())
                .then(b.0.total_cmp(&a.0))
        })
        .expect("best pair qualifies")
        .1;
    Ok(refine_basis(s, &chosen).reduced())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetryScores {
    pub basis: LatticeBasis,
    pub scores: [f64; NUM_SYMMETRIES],
}

impl SymmetryScores {
    pub fn get(&self, s: Symmetry) -> f64 {
        self.scores[s.index()]
    }

    pub fn from_fn(basis: LatticeBasis, f: impl Fn(Symmetry) -> f64) -> Self {
        let mut scores = [0.0; NUM_SYMMETRIES];
        for s in Symmetry::ALL {
            scores[s.index()] = f(s);
        }
        Self { basis, scores }
    }
}

/// Accumulates NCC between a band-passed copy of an image and its
/// transform over the central region.
struct Correlator {
    img: PatternImage,
    lo: [usize; 2],
    hi: [usize; 2],
}

/// Difference-of-Gaussians band-pass. Isotropic filters commute with
/// isometries, so true symmetries survive, while the smooth large-scale
/// modes that are nearly symmetric by accident are suppressed.
pub fn band_pass(img: &PatternImage) -> Result<PatternImage> {
    let wide = img.gaussian_blur(BAND_PASS_SIGMA)?;
    let px = img.pixels().iter().zip(wide.pixels()).map(|(a, b)| a - b).collect();
    let out = PatternImage::from_raw(img.width(), img.height(), px);
    match img.mask() {
        Some(m) => out.with_mask(m.to_vec()),
        None => Ok(out),
    }
}

impl Correlator {
    /// `img` must already be band-passed.
    fn new(img: PatternImage) -> Self {
        let margin = |n: usize| ((n as f64) * (1.0 - REGION_FRACTION) / 2.0).round() as usize;
        let (mx, my) = (margin(img.width()), margin(img.height()));
        let hi = [img.width() - mx, img.height() - my];
        Self { img, lo: [mx, my], hi }
    }

    fn region_size(&self, stride: usize) -> usize {
        ((self.hi[0] - self.lo[0]).div_ceil(stride)) * ((self.hi[1] - self.lo[1]).div_ceil(stride))
    }

    /// NCC of `img(x)` against `img(T⁻¹ x)` for `T(x) = a x + t`, clamped to `[0, 1]`.
    fn ncc(&self, a: &Mat2, t: Vec2, stride: usize) -> f64 {
        let ai = transpose(a);
        let mut acc = Moments::default();
        if self.img.mask().is_none() {
            self.accumulate_dense(&ai, t, stride, &mut acc);
        } else {
            for y in (self.lo[1]..self.hi[1]).step_by(stride) {
                for x in (self.lo[0]..self.hi[0]).step_by(stride) {
                    if !self.img.is_valid(x, y) {
                        continue;
                    }
                    let q = mat_vec(&ai, [x as f64 - t[0], y as f64 - t[1]]);
                    if let Some(b) = self.img.sample_bilinear(q[0], q[1]) {
                        acc.push(self.img.get(x, y) as f64, b as f64);
                    }
                }
            }
        }
        let Moments { n, sa, sb, saa, sbb, sab } = acc;
        if (n as f64) < 0.25 * self.region_size(stride) as f64 {
            return 0.0;
        }
        let nf = n as f64;
        let cov = sab - sa * sb / nf;
        let va = saa - sa * sa / nf;
        let vb = sbb - sb * sb / nf;
        if va <= 1e-12 || vb <= 1e-12 {
            return 0.0;
        }
        (cov / (va * vb).sqrt()).clamp(0.0, 1.0)
    }
}

#[derive(Default)]
struct Moments {
    n: usize,
    sa: f64,
    sb: f64,
    saa: f64,
    sbb: f64,
    sab: f64,
}

impl Moments {
    #[inline]
    fn push(&mut self, a: f64, b: f64) {
        self.n += 1;
        self.sa += a;
        self.sb += b;
        self.saa += a * a;
        self.sbb += b * b;
        self.sab += a * b;
    }
}

impl Correlator {
    /// Unmasked fast path: steps the inverse map along each row and samples
    /// the pixel slice directly.
    fn accumulate_dense(&self, ai: &Mat2, t: Vec2, stride: usize, acc: &mut Moments) {
        let (w, h) = (self.img.width(), self.img.height());
        let px = self.img.pixels();
        let (maxx, maxy) = ((w - 1) as f64, (h - 1) as f64);
        let step = [ai[0][0] * stride as f64, ai[1][0] * stride as f64];
        for y in (self.lo[1]..self.hi[1]).step_by(stride) {
            let mut q = mat_vec(ai, [self.lo[0] as f64 - t[0], y as f64 - t[1]]);
            let row = &px[y * w..(y + 1) * w];
            for x in (self.lo[0]..self.hi[0]).step_by(stride) {
                let (qx, qy) = (q[0], q[1]);
                q[0] += step[0];
                q[1] += step[1];
                if !(qx >= 0.0 && qy >= 0.0 && qx <= maxx && qy <= maxy) {
                    continue;
                }
                let x0 = (qx as usize).min(w - 2);
                let y0 = (qy as usize).min(h - 2);
                let (fx, fy) = (qx - x0 as f64, qy - y0 as f64);
                let i = y0 * w + x0;
                let (p00, p10, p01, p11) = (px[i] as f64, px[i + 1] as f64, px[i + w] as f64, px[i + w + 1] as f64);
                let top = p00 + (p10 - p00) * fx;
                let bot = p01 + (p11 - p01) * fx;
                acc.push(row[x] as f64, top + (bot - top) * fy);
            }
        }
    }
}

/// Best value of `f` near `x0` by compass search, steps halving from `step` down to `min_step`.
fn compass_search(f: impl Fn(Vec2) -> f64, x0: Vec2, step: f64, min_step: f64) -> (Vec2, f64) {
    let mut x = x0;
    let mut best = f(x);
    let mut step = step;
    while step >= min_step {
        let mut moved = false;
        for d in [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]] {
            let cand = add(x, scale(d, step));
            let v = f(cand);
            if v > best {
                best = v;
                x = cand;
                moved = true;
                break;
            }
        }
        if !moved {
            step /= 2.0;
        }
    }
    (x, best)
}

const COARSE_STRIDE: usize = 3;
const REFINE_CANDIDATES: usize = 3;
const GRID_SPACING: f64 = 1.0;

fn top_k(mut cands: Vec<(f64, Vec2)>, k: usize) -> Vec<Vec2> {
    cands.sort_by(|a, b| b.0.total_cmp(&a.0));
    cands.into_iter().take(k).map(|c| c.1).collect()
}

/// Every rotation by `2 pi / order` that maps the lattice to itself is
/// `x -> a x + t` for some `t`, and adding a lattice vector to `t` gives
/// another, so one cell of `t` covers all centers. A grid step in `t` moves
/// every pixel by at most that step, whatever the order.
fn rotation_score(cor: &Correlator, basis: &LatticeBasis, center: Vec2, order: u32) -> f64 {
    let a = rotation_matrix(2.0 * std::f64::consts::PI / order as f64);
    let t0 = sub(center, mat_vec(&a, center));
    let m1 = (norm(basis.t1) / GRID_SPACING).ceil().max(2.0) as usize;
    let m2 = (norm(basis.t2) / GRID_SPACING).ceil().max(2.0) as usize;
    let mut cands = Vec::with_capacity(m1 * m2);
    for i in 0..m1 {
        for j in 0..m2 {
            let u = [i as f64 / m1 as f64 - 0.5, j as f64 / m2 as f64 - 0.5];
            let t = add(t0, basis.to_cartesian(u));
            cands.push((cor.ncc(&a, t, COARSE_STRIDE), t));
        }
    }
    top_k(cands, REFINE_CANDIDATES)
        .into_iter()
        .map(|t| compass_search(|t| cor.ncc(&a, t, 1), t, 0.5, 0.05).1)
        .fold(0.0, f64::max)
}

fn mirror_score(cor: &Correlator, basis: &LatticeBasis, center: Vec2, axis: Vec2, glide: bool) -> f64 {
    let len = norm(axis);
    let v = scale(axis, 1.0 / len);
    let nrm = [-v[1], v[0]];
    let f = [
        [2.0 * v[0] * v[0] - 1.0, 2.0 * v[0] * v[1]],
        [2.0 * v[0] * v[1], 2.0 * v[1] * v[1] - 1.0],
    ];
    let g = if glide { len / 2.0 } else { 0.0 };
    // T(x) = F (x - c) + c + (g + a) v + q n
    let t_for = |q: f64, a: f64| add(sub(center, mat_vec(&f, center)), add(scale(v, g + a), scale(nrm, q)));
    // Axes of one class recur every two lattice rows parallel to the axis.
    let h = basis.area() / len;
    let half = h.ceil() as i64 + 1;
    let mut cands = Vec::new();
    for k in -half..=half {
        let q = k as f64;
        cands.push((cor.ncc(&f, t_for(q, 0.0), COARSE_STRIDE), [q, 0.0]));
    }
    const ALONG_SLACK: f64 = 1.0;
    top_k(cands, REFINE_CANDIDATES)
        .into_iter()
        .map(|p0| {
            compass_search(
                |p| {
                    if p[1].abs() > ALONG_SLACK {
                        0.0
                    } else {
                        cor.ncc(&f, t_for(p[0], p[1]), 1)
                    }
                },
                p0,
                0.5,
                0.05,
            )
            .1
        })
        .fold(0.0, f64::max)
}

/// Scores all twelve symmetries of `img` with respect to `basis`.
pub fn symmetry_scores(img: &PatternImage, basis: &LatticeBasis) -> Result<SymmetryScores> {
    if img.width() < 8 || img.height() < 8 {
        return Err(Error::Degenerate(format!("{}x{} image", img.width(), img.height())));
    }
    scores_of_filtered(band_pass(img)?, basis)
}

fn scores_of_filtered(img: PatternImage, basis: &LatticeBasis) -> Result<SymmetryScores> {
    let basis = LatticeBasis::new(basis.t1, basis.t2)?;
    let c = img.center();
    let cor = Correlator::new(img);
    let mut scores = [0.0; NUM_SYMMETRIES];
    for s in Symmetry::ALL {
        scores[s.index()] = match s.kind() {
            SymmetryKind::Rotation(k) => rotation_score(&cor, &basis, c, k),
            SymmetryKind::Reflection(ax) => mirror_score(&cor, &basis, c, ax.vector(&basis), false),
            SymmetryKind::Glide(ax) => mirror_score(&cor, &basis, c, ax.vector(&basis), true),
        };
    }
    Ok(SymmetryScores { basis, scores })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationResult {
    pub group: WallpaperGroup,
    pub margin: f64,
    pub all_margins: [f64; NUM_GROUPS],
}

fn profile_margin(p: SymmetryProfile, s: &SymmetryScores) -> f64 {
    let weakest = p.iter().map(|x| s.get(x)).fold(1.0, f64::min);
    let excluded = |x: Symmetry| {
        p.contains(x) || x.colinear_reflection().is_some_and(|r| p.contains(r))
    };
    let strongest = Symmetry::ALL
        .into_iter()
        .filter(|x| !excluded(*x))
        .map(|x| s.get(x))
        .fold(0.0, f64::max);
    weakest - strongest
}

/// Margin of `g`: best over its basis-relabeled profiles.
pub fn group_margin(g: WallpaperGroup, s: &SymmetryScores) -> f64 {
    profile_margin(matched_profile(g, s), s)
}

/// The basis relabeling of `g`'s defining profile that fits `s` best.
pub fn matched_profile(g: WallpaperGroup, s: &SymmetryScores) -> SymmetryProfile {
    profile_variants(g)
        .into_iter()
        .map(|p| (profile_margin(p, s), p))
        .fold(None, |best: Option<(f64, SymmetryProfile)>, c| match best {
            Some(b) if b.0 >= c.0 => Some(b),
            _ => Some(c),
        })
        .expect("every group has a profile")
        .1
}

/// Picks the group with the largest margin; ties go to the group with fewer
/// defining symmetries, then the lower index.
pub fn classify_margin(s: &SymmetryScores) -> ClassificationResult {
    let mut all = [0.0; NUM_GROUPS];
    for g in WallpaperGroup::ALL {
        all[g.index()] = group_margin(g, s);
    }
    let mut best = WallpaperGroup::P1;
    for g in WallpaperGroup::ALL {
        let (mg, mb) = (all[g.index()], all[best.index()]);
        let better = mg > mb + 1e-12
            || ((mg - mb).abs() <= 1e-12 && defining_profile(g).len() < defining_profile(best).len());
        if better {
            best = g;
        }
    }
    ClassificationResult {
        group: best,
        margin: all[best.index()],
        all_margins: all,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UMethodResult {
    pub scores: SymmetryScores,
    pub result: ClassificationResult,
}

/// Full pipeline: autocorrelation, lattice, symmetry scores, margin decision.
pub fn analyze(img: &PatternImage) -> Result<UMethodResult> {
    let filtered = band_pass(img)?;
    let basis = find_lattice(&autocorrelate(&filtered)?)?;
    let scores = scores_of_filtered(filtered, &basis)?;
    let result = classify_margin(&scores);
    Ok(UMethodResult { scores, result })
}

/// Angle of `v` relative to `u`, degrees in `(-180, 180]`.
pub fn signed_angle_deg(u: Vec2, v: Vec2) -> f64 {
    cross(u, v).atan2(dot(u, v)).to_degrees()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::WallpaperGroup as G;
    use Symmetry::*;

    fn basis() -> LatticeBasis {
        LatticeBasis::new([32.0, 0.0], [0.0, 32.0]).unwrap()
    }

    #[test]
    fn classify_trivial_cases() {
        let s = SymmetryScores::from_fn(basis(), |x| {
            if defining_profile(G::P4M).contains(x) { 1.0 } else { 0.0 }
        });
        let r = classify_margin(&s);
        assert_eq!(r.group, G::P4M);
        assert!((r.margin - 1.0).abs() < 1e-12);
        let zero = SymmetryScores::from_fn(basis(), |_| 0.0);
        let r = classify_margin(&zero);
        assert_eq!(r.group, G::P1);
        assert_eq!(r.margin, 1.0);
    }

    #[test]
    fn strong_half_turn_selects_p2() {
        let s = SymmetryScores::from_fn(basis(), |x| if x == R2 { 0.9 } else { 0.1 });
        let r = classify_margin(&s);
        // P2: 0.9 - 0.1; P1: 1.0 - 0.9; PMM: 0.1 - 0.1
        assert_eq!(r.group, G::P2);
        assert!((r.all_margins[G::P2.index()] - 0.8).abs() < 1e-12);
        assert!((r.all_margins[G::P1.index()] - 0.1).abs() < 1e-12);
        assert!((r.all_margins[G::PMM.index()] - 0.0).abs() < 1e-12);
    }

    #[test]
    fn colinear_glide_is_masked_for_mirror_groups() {
        let s = SymmetryScores::from_fn(basis(), |x| match x {
            RefT1 | GlideT1 => 0.95,
            _ => 0.05,
        });
        assert_eq!(classify_margin(&s).group, G::PM);
    }

    #[test]
    fn autocorrelation_of_stripes() {
        let img = PatternImage::from_fn(128, 128, |x, _| {
            (0.5 + 0.5 * (2.0 * std::f64::consts::PI * x as f64 / 16.0).cos()) as f32
        })
        .unwrap();
        let s = autocorrelate(&img).unwrap();
        assert!((s.get(0, 0) - 1.0).abs() < 1e-9);
        for k in 1..4 {
            assert!(s.get(16 * k, 0) > 0.99);
            assert!(s.get(-16 * k, 0) > 0.99);
            assert!(s.get(16 * k - 8, 0) < -0.99);
        }
    }

    #[test]
    fn constant_image_has_no_structure() {
        let img = PatternImage::filled(64, 64, 0.4).unwrap();
        assert!(matches!(autocorrelate(&img), Err(Error::NoStructure)));
        let small = PatternImage::filled(32, 32, 0.4).unwrap();
        assert!(autocorrelate(&small).is_err());
    }

    #[test]
    fn exact_half_turn_scores_one() {
        // symmetric about the image center by construction
        let img = PatternImage::from_fn(96, 96, |x, y| {
            let (u, v) = (x as f64 - 47.5, y as f64 - 47.5);
            (0.5 + 0.25 * (0.3 * u).sin() * (0.2 * v).sin() + 0.2 * (0.05 * u * v).cos()) as f32
        })
        .unwrap();
        let s = symmetry_scores(&img, &basis()).unwrap();
        assert!(s.get(R2) > 0.99, "{}", s.get(R2));
    }
}
