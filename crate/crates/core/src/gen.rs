//! Wallpaper pattern synthesis.
//!
//! A seeded noise raster covers one primitive cell in fractional lattice
//! coordinates. Each pixel averages the interpolated noise over the orbit of
//! its position under the group's operations, with the lattice origin at the
//! image center; the result is box-smoothed and rank-equalized.

use std::collections::HashSet;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::augment::AugmentParams;
use crate::error::{Error, Result};
use crate::fft;
use crate::group::{generator_lattice, point_operations, WallpaperGroup};
use crate::image::PatternImage;
use crate::rng::{derive_seed, rng_for};

pub const FEATURE_SCALE: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub image_size: usize,
    /// Side of a square cell with the common primitive-cell area.
    pub lattice_size: usize,
    pub smooth_kernel: usize,
    pub seed: u64,
    pub fourier_norm_batch: usize,
    /// Batch Fourier-amplitude normalization in [`synthesize_batch`] and [`write_dataset`].
    pub fourier_normalize: bool,
    /// Standard deviation (image pixels) of the Gaussian applied to the cell noise.
    pub feature_scale: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            image_size: 256,
            lattice_size: 32,
            smooth_kernel: 3,
            seed: 0,
            fourier_norm_batch: 500,
            fourier_normalize: false,
            feature_scale: FEATURE_SCALE,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.lattice_size < 4 || self.image_size < self.lattice_size {
            return bad(format!(
                "lattice_size {} must be >= 4 and <= image_size {}",
                self.lattice_size, self.image_size
            ));
        }
        if self.image_size % self.lattice_size != 0 {
            return bad(format!(
                "image_size {} not divisible by lattice_size {}",
                self.image_size, self.lattice_size
            ));
        }
        if self.smooth_kernel % 2 == 0 {
            return bad(format!("smooth_kernel {} must be odd", self.smooth_kernel));
        }
        if self.fourier_norm_batch == 0 {
            return bad("fourier_norm_batch must be positive".into());
        }
        if !self.feature_scale.is_finite() || self.feature_scale < 0.0 {
            return bad(format!("feature_scale {} must be >= 0", self.feature_scale));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    /// Side of the cell raster; even so that half-lattice shifts land on grid points.
    pub fn cell_raster(&self) -> usize {
        2 * self.lattice_size
    }
}

/// Periodic square raster over fractional coordinates `[0,1)²` of one cell.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitCell {
    n: usize,
    values: Vec<f64>,
}

impl UnitCell {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if n < 2 || n % 2 != 0 || values.len() != n * n {
            return Err(Error::Shape(format!(
                "cell raster must be even and square, got n={n} with {} values",
                values.len()
            )));
        }
        Ok(Self { n, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at raster index `(i, j)` (wrapped), i along `t1`, j along `t2`.
    pub fn at(&self, i: i64, j: i64) -> f64 {
        let n = self.n as i64;
        self.values[(j.rem_euclid(n) * n + i.rem_euclid(n)) as usize]
    }

    /// Periodic bilinear interpolation at fractional coordinates.
    pub fn sample(&self, u: [f64; 2]) -> f64 {
        let n = self.n as f64;
        let (a, b) = (u[0] * n, u[1] * n);
        let (i0, j0) = (a.floor(), b.floor());
        let (fa, fb) = (a - i0, b - j0);
        let (i, j) = (i0 as i64, j0 as i64);
        let top = self.at(i, j) * (1.0 - fa) + self.at(i + 1, j) * fa;
        let bot = self.at(i, j + 1) * (1.0 - fa) + self.at(i + 1, j + 1) * fa;
        top * (1.0 - fb) + bot * fb
    }
}

/// Uniform noise on the cell raster, optionally Gaussian-smoothed on the torus.
pub fn noise_patch(n: usize, sigma: f64, rng: &mut impl Rng) -> Result<UnitCell> {
    let values: Vec<f64> = (0..n * n).map(|_| rng.gen::<f64>()).collect();
    let cell = UnitCell::new(n, values)?;
    Ok(if sigma > 0.0 { periodic_gaussian(&cell, sigma) } else { cell })
}

fn periodic_gaussian(cell: &UnitCell, sigma: f64) -> UnitCell {
    let n = cell.n as i64;
    let r = ((3.0 * sigma).ceil() as i64).min(n / 2);
    let weights: Vec<f64> = (-r..=r)
        .map(|d| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    let pass = |src: &[f64], along_i: bool| {
        let mut out = vec![0.0; src.len()];
        for j in 0..n {
            for i in 0..n {
                let mut acc = 0.0;
                for (k, w) in weights.iter().enumerate() {
                    let d = k as i64 - r;
                    let (ii, jj) = if along_i {
                        ((i + d).rem_euclid(n), j)
                    } else {
                        (i, (j + d).rem_euclid(n))
                    };
                    acc += w * src[(jj * n + ii) as usize];
                }
                out[(j * n + i) as usize] = acc / total;
            }
        }
        out
    };
    let h = pass(&cell.values, true);
    UnitCell {
        n: cell.n,
        values: pass(&h, false),
    }
}

/// Averages the noise over the orbit of the group's operations. The result is
/// exactly invariant under each operation's raster index map.
pub fn build_unit_cell(group: WallpaperGroup, noise: &UnitCell) -> UnitCell {
    let ops = point_operations(group);
    let n = noise.n as i64;
    let half = n / 2;
    let mut values = vec![0.0; noise.values.len()];
    for j in 0..n {
        for i in 0..n {
            let mut acc = 0.0;
            for op in &ops {
                let ii = op.m[0][0] as i64 * i + op.m[0][1] as i64 * j + half * op.beta_half[0] as i64;
                let jj = op.m[1][0] as i64 * i + op.m[1][1] as i64 * j + half * op.beta_half[1] as i64;
                acc += noise.at(ii, jj);
            }
            values[(j * n + i) as usize] = acc / ops.len() as f64;
        }
    }
    UnitCell { n: noise.n, values }
}

/// Renders the periodic cell into a `size x size` image; the lattice origin
/// sits at the image center.
pub fn render(cell: &UnitCell, group: WallpaperGroup, lattice_size: f64, size: usize) -> PatternImage {
    render_with(group, lattice_size, size, |u| cell.sample(u))
}

/// Renders the orbit average of the interpolated noise: every pixel is the
/// mean of the noise at the images of its fractional position under the
/// group's operations. Unlike interpolating a symmetrized raster, this is
/// exactly invariant at every continuous position.
pub fn render_orbit_average(noise: &UnitCell, group: WallpaperGroup, lattice_size: f64, size: usize) -> PatternImage {
    let ops: Vec<_> = point_operations(group)
        .iter()
        .map(|op| (op.m_f64(), op.beta()))
        .collect();
    render_with(group, lattice_size, size, |u| {
        ops.iter()
            .map(|(m, b)| {
                noise.sample([
                    m[0][0] * u[0] + m[0][1] * u[1] + b[0],
                    m[1][0] * u[0] + m[1][1] * u[1] + b[1],
                ])
            })
            .sum::<f64>()
            / ops.len() as f64
    })
}

fn render_with(group: WallpaperGroup, lattice_size: f64, size: usize, f: impl Fn([f64; 2]) -> f64) -> PatternImage {
    let basis = generator_lattice(group, lattice_size);
    let c = (size as f64 - 1.0) / 2.0;
    let mut pixels = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let u = basis.to_fractional([x as f64 - c, y as f64 - c]);
            pixels.push(f(u).clamp(0.0, 1.0) as f32);
        }
    }
    PatternImage::from_raw(size, size, pixels)
}

/// Rank-based equalization: each pixel becomes `(rank + 0.5) / N` with tied
/// values sharing their mean rank, so the output mean is exactly 0.5. A
/// constant image maps to 0.5 everywhere.
pub fn histogram_equalize(img: &PatternImage) -> PatternImage {
    let px = img.pixels();
    let n = px.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| px[a].total_cmp(&px[b]));
    let mut out = vec![0f32; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && px[order[end]] == px[order[start]] {
            end += 1;
        }
        let rank = (start + end - 1) as f64 / 2.0;
        let v = ((rank + 0.5) / n as f64) as f32;
        for &k in &order[start..end] {
            out[k] = v;
        }
        start = end;
    }
    let mut res = PatternImage::from_raw(img.width(), img.height(), out);
    if let Some(m) = img.mask() {
        res = res.with_mask(m.to_vec()).expect("same size");
    }
    res
}

pub fn synthesize(group: WallpaperGroup, cfg: &GenConfig) -> Result<PatternImage> {
    cfg.validate()?;
    let n = cfg.cell_raster();
    let mut rng = rng_for(cfg.seed, &[group.index() as u64]);
    let sigma = cfg.feature_scale * n as f64 / cfg.lattice_size as f64;
    let noise = noise_patch(n, sigma, &mut rng)?;
    let img = render_orbit_average(&noise, group, cfg.lattice_size as f64, cfg.image_size);
    let img = img.box_blur(cfg.smooth_kernel)?;
    Ok(histogram_equalize(&img))
}

/// Pre-clip result of batch amplitude normalization: every image's spectrum
/// takes the batch-mean amplitude while keeping its own phase.
pub fn fourier_normalized_fields(batch: &[PatternImage]) -> Result<Vec<Vec<f64>>> {
    let first = batch
        .first()
        .ok_or_else(|| Error::Degenerate("empty batch".into()))?;
    let (w, h) = (first.width(), first.height());
    if batch.iter().any(|i| i.width() != w || i.height() != h) {
        return Err(Error::Shape("batch images differ in size".into()));
    }
    let spectra: Vec<Vec<Complex64>> = batch
        .iter()
        .map(|img| {
            let v: Vec<f64> = img.pixels().iter().map(|&p| p as f64).collect();
            fft::forward_real(&v, w, h)
        })
        .collect();
    let mut mean_amp = vec![0.0; w * h];
    for s in &spectra {
        for (m, c) in mean_amp.iter_mut().zip(s) {
            *m += c.norm();
        }
    }
    for m in &mut mean_amp {
        *m /= batch.len() as f64;
    }
    Ok(spectra
        .into_iter()
        .map(|s| {
            let spec = s
                .iter()
                .zip(&mean_amp)
                .map(|(c, &a)| Complex64::from_polar(a, c.arg()))
                .collect();
            fft::inverse_real(spec, w, h)
        })
        .collect())
}

/// Batch amplitude normalization followed by clipping to `[0, 1]`.
pub fn normalize_fourier_batch(batch: &[PatternImage]) -> Result<Vec<PatternImage>> {
    let fields = fourier_normalized_fields(batch)?;
    Ok(fields
        .into_iter()
        .zip(batch)
        .map(|(f, img)| {
            let px = f.into_iter().map(|v| v.clamp(0.0, 1.0) as f32).collect();
            PatternImage::from_raw(img.width(), img.height(), px)
        })
        .collect())
}

/// Synthesizes one image per seed, applying amplitude normalization over
/// consecutive chunks of `fourier_norm_batch` when enabled.
pub fn synthesize_batch(group: WallpaperGroup, seeds: &[u64], cfg: &GenConfig) -> Result<Vec<PatternImage>> {
    let imgs = seeds
        .iter()
        .map(|&s| synthesize(group, &cfg.with_seed(s)))
        .collect::<Result<Vec<_>>>()?;
    if !cfg.fourier_normalize {
        return Ok(imgs);
    }
    let mut out = Vec::with_capacity(imgs.len());
    for chunk in imgs.chunks(cfg.fourier_norm_batch) {
        out.extend(normalize_fourier_batch(chunk)?);
    }
    Ok(out)
}

/// Seed of image `index` of `group` in `split`.
pub fn image_seed(base: u64, split: &str, group: WallpaperGroup, index: usize) -> u64 {
    derive_seed(base, &[split_tag(split), group.index() as u64, index as u64])
}

fn split_tag(split: &str) -> u64 {
    // FNV-1a
    split
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub file: String,
    pub group: WallpaperGroup,
    pub seed: u64,
    pub split: String,
    pub aug: Option<AugmentParams>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DatasetManifest {
    pub records: Vec<DatasetRecord>,
}

pub const MANIFEST_FILE: &str = "manifest.jsonl";

impl DatasetManifest {
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for r in &self.records {
            if !seen.insert(r.file.as_str()) {
                return Err(Error::InvalidConfig(format!("duplicate file {}", r.file)));
            }
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut s = String::new();
        for r in &self.records {
            s.push_str(&serde_json::to_string(r).expect("records serialize"));
            s.push('\n');
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        self.validate()?;
        let mut f = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
        f.write_all(self.to_jsonl().as_bytes())
            .and_then(|_| f.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let f = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
        let mut records = Vec::new();
        for (i, line) in f.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(serde_json::from_str(&line).map_err(|e| Error::Format {
                path: path.to_path_buf(),
                message: format!("line {}: {e}", i + 1),
            })?);
        }
        let m = Self { records };
        m.validate()?;
        Ok(m)
    }
}

/// Writes `per_group` images for each group as PNGs plus `manifest.jsonl`.
pub fn write_dataset(
    groups: &[WallpaperGroup],
    per_group: usize,
    split: &str,
    cfg: &GenConfig,
    out_dir: &Path,
) -> Result<DatasetManifest> {
    cfg.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut manifest = DatasetManifest::default();
    for &g in groups {
        let seeds: Vec<u64> = (0..per_group).map(|i| image_seed(cfg.seed, split, g, i)).collect();
        let imgs = synthesize_batch(g, &seeds, cfg)?;
        for (i, (img, seed)) in imgs.iter().zip(&seeds).enumerate() {
            let file = format!("{split}_{}_{i:05}.png", g.name().to_ascii_lowercase());
            img.write_png(&out_dir.join(&file))?;
            manifest.records.push(DatasetRecord {
                file,
                group: g,
                seed: *seed,
                split: split.to_string(),
                aug: None,
            });
        }
    }
    manifest.write(&out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::WallpaperGroup as G;

    fn small() -> GenConfig {
        GenConfig {
            image_size: 64,
            lattice_size: 16,
            ..GenConfig::default()
        }
    }

    #[test]
    fn config_validation() {
        assert!(GenConfig::default().validate().is_ok());
        let mut c = GenConfig::default();
        c.smooth_kernel = 4;
        assert!(c.validate().is_err());
        c = GenConfig { image_size: 250, ..GenConfig::default() };
        assert!(c.validate().is_err());
        assert!(synthesize(G::P1, &c).is_err());
    }

    #[test]
    fn default_output_shape_and_mean() {
        let img = synthesize(G::P6M, &GenConfig::default()).unwrap();
        assert_eq!((img.width(), img.height()), (256, 256));
        assert!((img.mean() - 0.5).abs() < 1e-6);
    }

    #[test]
    fn deterministic_per_seed() {
        let a = synthesize(G::PGG, &small().with_seed(9)).unwrap();
        let b = synthesize(G::PGG, &small().with_seed(9)).unwrap();
        let c = synthesize(G::PGG, &small().with_seed(10)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn p1_cell_is_the_noise() {
        let mut rng = rng_for(1, &[]);
        let noise = noise_patch(16, 1.0, &mut rng).unwrap();
        assert_eq!(build_unit_cell(G::P1, &noise), noise);
    }

    #[test]
    fn p2_cell_is_half_turn_average() {
        let mut rng = rng_for(2, &[]);
        let noise = noise_patch(16, 0.0, &mut rng).unwrap();
        let cell = build_unit_cell(G::P2, &noise);
        for j in 0..16 {
            for i in 0..16 {
                let expect = (noise.at(i, j) + noise.at(-i, -j)) / 2.0;
                assert!((cell.at(i, j) - expect).abs() < 1e-12);
                assert!((cell.at(i, j) - cell.at(-i, -j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cells_are_invariant_under_their_operations() {
        let mut rng = rng_for(3, &[]);
        let noise = noise_patch(32, 0.0, &mut rng).unwrap();
        for g in G::ALL {
            let cell = build_unit_cell(g, &noise);
            for op in point_operations(g) {
                for j in 0..32i64 {
                    for i in 0..32i64 {
                        let ii = op.m[0][0] as i64 * i + op.m[0][1] as i64 * j + 16 * op.beta_half[0] as i64;
                        let jj = op.m[1][0] as i64 * i + op.m[1][1] as i64 * j + 16 * op.beta_half[1] as i64;
                        assert!((cell.at(i, j) - cell.at(ii, jj)).abs() < 1e-12, "{g}");
                    }
                }
            }
        }
    }

    #[test]
    fn p4_image_is_quarter_turn_invariant() {
        let img = synthesize(G::P4, &GenConfig::default()).unwrap();
        let n = img.width();
        let mut worst = 0f32;
        for y in 1..n - 1 {
            for x in 1..n - 1 {
                // 90° about the center maps (x, y) to (n-1-y, x)
                worst = worst.max((img.get(x, y) - img.get(n - 1 - y, x)).abs());
            }
        }
        assert!(worst < 2.0 / 255.0, "{worst}");
    }

    #[test]
    fn p1_translation_closure() {
        let img = synthesize(G::P1, &GenConfig::default().with_seed(11)).unwrap();
        let n = img.width();
        let mut err = 0.0;
        let mut count = 0;
        for y in 2..n - 2 {
            for x in 2..n - 34 {
                err += (img.get(x, y) - img.get(x + 32, y)).abs() as f64;
                count += 1;
            }
        }
        assert!(err / (count as f64) < 2.0 / 255.0);
    }

    #[test]
    fn equalization_cases() {
        let c = PatternImage::filled(4, 4, 0.3).unwrap();
        assert!(histogram_equalize(&c).pixels().iter().all(|&v| v == 0.5));
        let n = 16;
        let px: Vec<f32> = (0..n).map(|k| ((k * 7) % n) as f32).map(|r| (r + 0.5) / n as f32).collect();
        let img = PatternImage::new(4, 4, px.clone()).unwrap();
        assert_eq!(histogram_equalize(&img).pixels(), &px[..]);
    }

    #[test]
    fn fourier_batch_of_one_or_identical_is_unchanged() {
        let a = synthesize(G::P3, &small().with_seed(1)).unwrap();
        for batch in [vec![a.clone()], vec![a.clone(), a.clone(), a.clone()]] {
            for out in normalize_fourier_batch(&batch).unwrap() {
                let mae: f64 = out
                    .pixels()
                    .iter()
                    .zip(a.pixels())
                    .map(|(x, y)| (x - y).abs() as f64)
                    .sum::<f64>()
                    / a.len() as f64;
                assert!(mae < 1e-4, "{mae}");
            }
        }
    }

    #[test]
    fn fourier_batch_shares_amplitudes() {
        let batch: Vec<_> = (0..4)
            .map(|s| synthesize(G::CMM, &small().with_seed(s)).unwrap())
            .collect();
        let fields = fourier_normalized_fields(&batch).unwrap();
        let amps: Vec<Vec<f64>> = fields
            .iter()
            .map(|f| fft::forward_real(f, 64, 64).iter().map(|c| c.norm()).collect())
            .collect();
        let scale = amps[0].iter().cloned().fold(0.0, f64::max);
        for a in &amps[1..] {
            for (x, y) in a.iter().zip(&amps[0]) {
                assert!((x - y).abs() <= 1e-4 * scale);
            }
        }
    }

    #[test]
    fn dataset_counts_and_determinism() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small();
        let m1 = write_dataset(&G::ALL, 2, "train", &cfg, &dir.path().join("a")).unwrap();
        let m2 = write_dataset(&G::ALL, 2, "train", &cfg, &dir.path().join("b")).unwrap();
        assert_eq!(m1.records.len(), 34);
        assert_eq!(m1, m2);
        for r in &m1.records {
            let a = fs::read(dir.path().join("a").join(&r.file)).unwrap();
            let b = fs::read(dir.path().join("b").join(&r.file)).unwrap();
            assert_eq!(a, b);
            let replay = synthesize(r.group, &cfg.with_seed(r.seed)).unwrap();
            assert_eq!(PatternImage::read_png(&dir.path().join("a").join(&r.file)).unwrap().to_u8(), replay.to_u8());
        }
        let back = DatasetManifest::read(&dir.path().join("a").join(MANIFEST_FILE)).unwrap();
        assert_eq!(back, m1);
        let line = m1.to_jsonl().lines().next().unwrap().to_string();
        let v: serde_json::Value = serde_json::from_str(&line).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["aug", "file", "group", "seed", "split"]);
    }
}
