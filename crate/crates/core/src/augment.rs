//! Geometric augmentation: reflect, rotate, scale and translate a source
//! pattern, then crop, all as one composed inverse warp with bilinear sampling.
//!
//! `scale = s` samples a window of `crop * s` source pixels, so a 256 px
//! pattern with 32 px cells shows `4 s` cycles across a 128 px crop.
//! When a lattice basis is supplied, sample points are folded back into the
//! cell around the source center, treating the source as one view of an
//! infinite periodic pattern; without one, every sample must fall inside the
//! source. Shrinking warps are antialiased.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::PatternImage;
use crate::isometry::{add, mat_vec, rotation_matrix, scale, Vec2};
use crate::lattice::LatticeBasis;

pub const DEFAULT_CROP: usize = 128;
pub const MAX_SHIFT: f64 = 64.0;
pub const SCALE_RANGE: (f64, f64) = (1.0, 2.0);
pub const EXPANDED_SCALE_RANGE: (f64, f64) = (0.5, 2.0);
/// Shrinking by `s > 1` first blurs the source with sigma
/// `ANTIALIAS_SIGMA * sqrt(s^2 - 1)`.
pub const ANTIALIAS_SIGMA: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentParams {
    pub tx: f64,
    pub ty: f64,
    /// Degrees; content is rotated by `rotation_matrix(theta)` about the source center.
    pub theta: f64,
    pub scale: f64,
    pub reflect: bool,
    pub crop: usize,
}

impl Default for AugmentParams {
    fn default() -> Self {
        Self::identity()
    }
}

impl AugmentParams {
    pub fn identity() -> Self {
        Self {
            tx: 0.0,
            ty: 0.0,
            theta: 0.0,
            scale: 1.0,
            reflect: false,
            crop: DEFAULT_CROP,
        }
    }

    /// Cycles of a lattice with period `lattice_size` visible across the crop.
    pub fn cycles(&self, lattice_size: f64) -> f64 {
        self.crop as f64 * self.scale / lattice_size
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.tx, self.ty, self.theta, self.scale]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.scale <= 0.0 || self.crop == 0 {
            return Err(Error::InvalidConfig(format!("invalid augmentation {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentPolicy {
    None,
    Translate,
    Rotate,
    Scale,
    All,
    Reflection,
    ExpandedScale,
}

impl AugmentPolicy {
    pub const ALL: [AugmentPolicy; 7] = [
        Self::None,
        Self::Translate,
        Self::Rotate,
        Self::Scale,
        Self::All,
        Self::Reflection,
        Self::ExpandedScale,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Translate => "translate",
            Self::Rotate => "rotate",
            Self::Scale => "scale",
            Self::All => "all",
            Self::Reflection => "reflection",
            Self::ExpandedScale => "expanded_scale",
        }
    }
}

impl fmt::Display for AugmentPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AugmentPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Self::ALL
            .iter()
            .copied()
            .find(|p| p.name() == key)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown augmentation policy {s:?}")))
    }
}

pub fn sample_params(policy: AugmentPolicy, rng: &mut impl Rng) -> AugmentParams {
    use AugmentPolicy as P;
    let mut p = AugmentParams::identity();
    let translate = matches!(policy, P::Translate | P::All | P::Reflection | P::ExpandedScale);
    let rotate = matches!(policy, P::Rotate | P::All | P::Reflection | P::ExpandedScale);
    if translate {
        p.tx = rng.gen_range(-MAX_SHIFT..=MAX_SHIFT);
        p.ty = rng.gen_range(-MAX_SHIFT..=MAX_SHIFT);
    }
    if rotate {
        p.theta = rng.gen_range(0.0..360.0);
    }
    match policy {
        P::Scale | P::All | P::Reflection => p.scale = rng.gen_range(SCALE_RANGE.0..=SCALE_RANGE.1),
        P::ExpandedScale => {
            p.scale = rng.gen_range(EXPANDED_SCALE_RANGE.0..=EXPANDED_SCALE_RANGE.1)
        }
        _ => {}
    }
    if policy == P::Reflection {
        p.reflect = rng.gen_bool(0.5);
    }
    p
}

/// Source coordinate sampled for output pixel `(ox, oy)`.
fn source_point(src_center: Vec2, p: &AugmentParams, ox: usize, oy: usize) -> Vec2 {
    let oc = (p.crop as f64 - 1.0) / 2.0;
    let d = [(ox as f64 - oc) * p.scale, (oy as f64 - oc) * p.scale];
    let mut q = mat_vec(&rotation_matrix(-p.theta.to_radians()), d);
    if p.reflect {
        q[0] = -q[0];
    }
    add(add(src_center, [p.tx, p.ty]), q)
}

/// Applies `p` to `img`; see the module docs for the role of `lattice`.
pub fn augment(img: &PatternImage, p: &AugmentParams, lattice: Option<&LatticeBasis>) -> Result<PatternImage> {
    p.validate()?;
    if img.width() < 2 || img.height() < 2 {
        return Err(Error::Degenerate(format!("{}x{} source", img.width(), img.height())));
    }
    let sigma = ANTIALIAS_SIGMA * (p.scale * p.scale - 1.0).max(0.0).sqrt();
    let smoothed;
    let img = if sigma > 0.05 {
        smoothed = img.gaussian_blur(sigma)?;
        &smoothed
    } else {
        img
    };
    let c = img.center();
    let mut pixels = Vec::with_capacity(p.crop * p.crop);
    for oy in 0..p.crop {
        for ox in 0..p.crop {
            let mut q = source_point(c, p, ox, oy);
            if let Some(b) = lattice {
                let rel = [q[0] - c[0], q[1] - c[1]];
                let u = b.to_fractional(rel);
                let folded = b.to_cartesian([u[0] - u[0].round(), u[1] - u[1].round()]);
                q = add(c, folded);
            }
            let v = img.sample_bilinear(q[0], q[1]).ok_or_else(|| {
                Error::OutOfDomain(format!(
                    "augmentation {p:?} samples ({:.2}, {:.2}) outside the {}x{} source",
                    q[0],
                    q[1],
                    img.width(),
                    img.height()
                ))
            })?;
            pixels.push(v);
        }
    }
    Ok(PatternImage::from_raw(p.crop, p.crop, pixels))
}

/// Mirror image about the vertical axis through the center.
pub fn flip_horizontal(img: &PatternImage) -> PatternImage {
    let (w, h) = (img.width(), img.height());
    let mut px = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            px.push(img.get(w - 1 - x, y));
        }
    }
    PatternImage::from_raw(w, h, px)
}

/// Lattice of a pattern after augmentation, in output pixels.
pub fn transformed_lattice(b: &LatticeBasis, p: &AugmentParams) -> LatticeBasis {
    let map = |v: Vec2| {
        let mut v = v;
        if p.reflect {
            v[0] = -v[0];
        }
        scale(mat_vec(&rotation_matrix(p.theta.to_radians()), v), 1.0 / p.scale)
    };
    LatticeBasis {
        t1: map(b.t1),
        t2: map(b.t2),
    }
}
