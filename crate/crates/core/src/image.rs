//! Grayscale raster with an optional validity mask.
//!
//! Pixel `(x, y)` is column `x`, row `y`; its center sits at the continuous
//! coordinate `(x, y)`. Geometric operations in this crate use that
//! convention, so the image center is `((w - 1) / 2, (h - 1) / 2)`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

const EDGE_EPS: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct PatternImage {
    width: usize,
    height: usize,
    pixels: Vec<f32>,
    mask: Option<Vec<bool>>,
}

impl PatternImage {
    /// Builds an image from row-major pixels; every value must be finite and in `[0, 1]`.
    pub fn new(width: usize, height: usize, pixels: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Degenerate(format!("image dims {width}x{height}")));
        }
        if pixels.len() != width * height {
            return Err(Error::Shape(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        if let Some(v) = pixels
            .iter()
            .find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0)
        {
            return Err(Error::InvalidConfig(format!("pixel value {v} outside [0,1]")));
        }
        Ok(Self {
            width,
            height,
            pixels,
            mask: None,
        })
    }

    pub(crate) fn from_raw(width: usize, height: usize, pixels: Vec<f32>) -> Self {
        debug_assert_eq!(pixels.len(), width * height);
        Self {
            width,
            height,
            pixels,
            mask: None,
        }
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f32,
    ) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    /// Linearly maps arbitrary finite values onto `[0, 1]` (constant input maps to 0.5).
    pub fn from_values_rescaled(width: usize, height: usize, values: &[f32]) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::Shape(format!(
                "{} values for a {width}x{height} image",
                values.len()
            )));
        }
        let (lo, hi) = values
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Degenerate("non-finite values".into()));
        }
        let span = hi - lo;
        let pixels = values
            .iter()
            .map(|&v| if span > 0.0 { (v - lo) / span } else { 0.5 })
            .collect();
        Self::new(width, height, pixels)
    }

    pub fn with_mask(mut self, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != self.pixels.len() {
            return Err(Error::Shape(format!(
                "mask of {} entries for {} pixels",
                mask.len(),
                self.pixels.len()
            )));
        }
        self.mask = Some(mask);
        Ok(self)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f32> {
        self.pixels
    }

    pub fn mask(&self) -> Option<&[bool]> {
        self.mask.as_deref()
    }

    pub fn center(&self) -> [f64; 2] {
        [
            (self.width as f64 - 1.0) / 2.0,
            (self.height as f64 - 1.0) / 2.0,
        ]
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.mask
            .as_ref()
            .map_or(true, |m| m[y * self.width + x])
    }

    pub fn valid_count(&self) -> usize {
        self.mask
            .as_ref()
            .map_or(self.pixels.len(), |m| m.iter().filter(|v| **v).count())
    }

    /// Mean over valid pixels.
    pub fn mean(&self) -> f64 {
        let mut sum = 0.0;
        let mut n = 0usize;
        for (i, v) in self.pixels.iter().enumerate() {
            if self.mask.as_ref().map_or(true, |m| m[i]) {
                sum += *v as f64;
                n += 1;
            }
        }
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }

    /// True when every valid pixel has the same value.
    pub fn is_constant(&self) -> bool {
        let mut first = None;
        for (i, v) in self.pixels.iter().enumerate() {
            if self.mask.as_ref().map_or(true, |m| m[i]) {
                match first {
                    None => first = Some(*v),
                    Some(f) if f != *v => return false,
                    _ => {}
                }
            }
        }
        true
    }

    /// Bilinear sample at a continuous position. `None` outside the raster or when
    /// a contributing neighbour is masked out.
    #[inline]
    pub fn sample_bilinear(&self, x: f64, y: f64) -> Option<f32> {
        let maxx = (self.width - 1) as f64;
        let maxy = (self.height - 1) as f64;
        if !(x >= -EDGE_EPS && y >= -EDGE_EPS && x <= maxx + EDGE_EPS && y <= maxy + EDGE_EPS) {
            return None;
        }
        let x = x.clamp(0.0, maxx);
        let y = y.clamp(0.0, maxy);
        let x0 = (x.floor() as usize).min(self.width - 1);
        let y0 = (y.floor() as usize).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let x1 = if fx > 0.0 { x0 + 1 } else { x0 };
        let y1 = if fy > 0.0 { y0 + 1 } else { y0 };
        if let Some(m) = &self.mask {
            let w = self.width;
            if !(m[y0 * w + x0] && m[y0 * w + x1] && m[y1 * w + x0] && m[y1 * w + x1]) {
                return None;
            }
        }
        if fx == 0.0 && fy == 0.0 {
            return Some(self.get(x0, y0));
        }
        let p00 = self.get(x0, y0) as f64;
        let p10 = self.get(x1, y0) as f64;
        let p01 = self.get(x0, y1) as f64;
        let p11 = self.get(x1, y1) as f64;
        let top = p00 + (p10 - p00) * fx;
        let bottom = p01 + (p11 - p01) * fx;
        Some((top + (bottom - top) * fy) as f32)
    }

    #[inline]
    pub fn sample_nearest(&self, x: f64, y: f64) -> Option<f32> {
        let xr = x.round();
        let yr = y.round();
        if xr < 0.0 || yr < 0.0 || xr > (self.width - 1) as f64 || yr > (self.height - 1) as f64 {
            return None;
        }
        let (xi, yi) = (xr as usize, yr as usize);
        if !self.is_valid(xi, yi) {
            return None;
        }
        Some(self.get(xi, yi))
    }

    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 || x0 + width > self.width || y0 + height > self.height {
            return Err(Error::OutOfDomain(format!(
                "crop {width}x{height}+{x0}+{y0} of {}x{}",
                self.width, self.height
            )));
        }
        let mut pixels = Vec::with_capacity(width * height);
        let mut mask = self.mask.as_ref().map(|_| Vec::with_capacity(width * height));
        for y in y0..y0 + height {
            let row = y * self.width;
            pixels.extend_from_slice(&self.pixels[row + x0..row + x0 + width]);
            if let (Some(out), Some(m)) = (mask.as_mut(), self.mask.as_ref()) {
                out.extend_from_slice(&m[row + x0..row + x0 + width]);
            }
        }
        Ok(Self {
            width,
            height,
            pixels,
            mask,
        })
    }

    /// `k x k` box filter with edge clamping; `k` must be odd.
    pub fn box_blur(&self, k: usize) -> Result<Self> {
        if k % 2 == 0 {
            return Err(Error::InvalidConfig(format!("box kernel {k} must be odd")));
        }
        if k == 1 {
            return Ok(self.clone());
        }
        let r = (k / 2) as isize;
        let (w, h) = (self.width as isize, self.height as isize);
        let clamp = |v: isize, hi: isize| v.clamp(0, hi - 1) as usize;
        let mut horiz = vec![0f32; self.pixels.len()];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0f32;
                for dx in -r..=r {
                    acc += self.pixels[y as usize * self.width + clamp(x + dx, w)];
                }
                horiz[y as usize * self.width + x as usize] = acc / k as f32;
            }
        }
        let mut out = vec![0f32; self.pixels.len()];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0f32;
                for dy in -r..=r {
                    acc += horiz[clamp(y + dy, h) * self.width + x as usize];
                }
                out[y as usize * self.width + x as usize] = acc / k as f32;
            }
        }
        Ok(Self {
            width: self.width,
            height: self.height,
            pixels: out,
            mask: self.mask.clone(),
        })
    }

    /// Separable Gaussian filter truncated at `3 sigma`. Weights are
    /// renormalized over in-bounds valid pixels, so borders and masked
    /// regions do not pull values toward zero.
    pub fn gaussian_blur(&self, sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidConfig(format!("gaussian sigma {sigma}")));
        }
        let r = (3.0 * sigma).ceil() as isize;
        let kernel: Vec<f64> = (-r..=r)
            .map(|d| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp())
            .collect();
        let (w, h) = (self.width as isize, self.height as isize);
        let valid = |i: usize| self.mask.as_ref().map_or(true, |m| m[i]);
        // Carry (weighted sum, weight) through both passes.
        let mut horiz = vec![(0f64, 0f64); self.pixels.len()];
        for y in 0..h {
            for x in 0..w {
                let (mut acc, mut wt) = (0.0, 0.0);
                for (k, dx) in (-r..=r).enumerate() {
                    let xx = x + dx;
                    if xx < 0 || xx >= w {
                        continue;
                    }
                    let i = (y * w + xx) as usize;
                    if valid(i) {
                        acc += kernel[k] * self.pixels[i] as f64;
                        wt += kernel[k];
                    }
                }
                horiz[(y * w + x) as usize] = (acc, wt);
            }
        }
        let mut out = vec![0f32; self.pixels.len()];
        for y in 0..h {
            for x in 0..w {
                let (mut acc, mut wt) = (0.0, 0.0);
                for (k, dy) in (-r..=r).enumerate() {
                    let yy = y + dy;
                    if yy < 0 || yy >= h {
                        continue;
                    }
                    let (a, b) = horiz[(yy * w + x) as usize];
                    acc += kernel[k] * a;
                    wt += kernel[k] * b;
                }
                out[(y * w + x) as usize] = if wt > 0.0 { (acc / wt) as f32 } else { 0.0 };
            }
        }
        Ok(Self {
            width: self.width,
            height: self.height,
            pixels: out,
            mask: self.mask.clone(),
        })
    }

    /// 2x2 mean pooling; odd trailing rows/columns are dropped.
    pub fn downsample2(&self) -> Result<Self> {
        let (w, h) = (self.width / 2, self.height / 2);
        if w == 0 || h == 0 {
            return Err(Error::Degenerate("image too small to downsample".into()));
        }
        let mut pixels = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let s = self.get(2 * x, 2 * y)
                    + self.get(2 * x + 1, 2 * y)
                    + self.get(2 * x, 2 * y + 1)
                    + self.get(2 * x + 1, 2 * y + 1);
                pixels.push(s * 0.25);
            }
        }
        Ok(Self::from_raw(w, h, pixels))
    }

    /// 8-bit quantization used by the PNG writer.
    pub fn to_u8(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect()
    }

    pub fn from_u8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        Self::new(
            width,
            height,
            bytes.iter().map(|b| *b as f32 / 255.0).collect(),
        )
    }

    /// Encodes as an 8-bit, single-channel PNG.
    pub fn encode_png(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut buf, self.width as u32, self.height as u32);
            enc.set_color(png::ColorType::Grayscale);
            enc.set_depth(png::BitDepth::Eight);
            let mut writer = enc.write_header().expect("in-memory png header");
            writer
                .write_image_data(&self.to_u8())
                .expect("in-memory png data");
        }
        buf
    }

    pub fn write_png(&self, path: &Path) -> Result<()> {
        let bytes = self.encode_png();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        w.write_all(&bytes).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_png(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let decoder = png::Decoder::new(BufReader::new(file));
        let fmt = |m: String| Error::Format {
            path: path.to_path_buf(),
            message: m,
        };
        let mut reader = decoder.read_info().map_err(|e| fmt(e.to_string()))?;
        let mut buf = vec![0u8; reader.output_buffer_size().unwrap_or(0)];
        let info = reader.next_frame(&mut buf).map_err(|e| fmt(e.to_string()))?;
        if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Eight {
            return Err(fmt(format!(
                "expected 8-bit grayscale, got {:?}/{:?}",
                info.color_type, info.bit_depth
            )));
        }
        Self::from_u8(
            info.width as usize,
            info.height as usize,
            &buf[..info.buffer_size()],
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range_and_bad_dims() {
        assert!(PatternImage::new(0, 3, vec![]).is_err());
        assert!(PatternImage::new(2, 2, vec![0.0; 3]).is_err());
        assert!(PatternImage::new(1, 1, vec![1.5]).is_err());
        assert!(PatternImage::new(1, 1, vec![f32::NAN]).is_err());
    }

    #[test]
    fn bilinear_hits_pixels_exactly_and_interpolates() {
        let img = PatternImage::from_fn(3, 2, |x, y| (x + 3 * y) as f32 / 5.0).unwrap();
        assert_eq!(img.sample_bilinear(2.0, 1.0), Some(1.0));
        let mid = img.sample_bilinear(0.5, 0.5).unwrap();
        assert!((mid - 2.0 / 5.0).abs() < 1e-6);
        assert_eq!(img.sample_bilinear(-0.1, 0.0), None);
        assert_eq!(img.sample_bilinear(2.01, 0.0), None);
    }

    #[test]
    fn masked_neighbour_invalidates_sample() {
        let img = PatternImage::filled(2, 2, 0.5)
            .unwrap()
            .with_mask(vec![true, false, true, true])
            .unwrap();
        assert_eq!(img.sample_bilinear(0.0, 0.0), Some(0.5));
        assert_eq!(img.sample_bilinear(0.5, 0.0), None);
    }

    #[test]
    fn box_blur_keeps_constant() {
        let img = PatternImage::filled(5, 4, 0.25).unwrap();
        let b = img.box_blur(3).unwrap();
        assert!(b.pixels().iter().all(|v| (v - 0.25).abs() < 1e-7));
        assert!(img.box_blur(2).is_err());
    }

    #[test]
    fn png_round_trip_is_quantized_identity() {
        let img = PatternImage::from_fn(7, 5, |x, y| ((x * 31 + y * 17) % 256) as f32 / 255.0)
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.png");
        img.write_png(&path).unwrap();
        let back = PatternImage::read_png(&path).unwrap();
        assert_eq!(back.to_u8(), img.to_u8());
    }
}
