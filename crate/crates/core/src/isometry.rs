//! Planar isometries `x -> A x + t` and their action on rasters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::PatternImage;

pub type Vec2 = [f64; 2];
pub type Mat2 = [[f64; 2]; 2];

pub const IDENTITY2: Mat2 = [[1.0, 0.0], [0.0, 1.0]];

#[inline]
pub fn mat_vec(m: &Mat2, v: Vec2) -> Vec2 {
    [
        m[0][0] * v[0] + m[0][1] * v[1],
        m[1][0] * v[0] + m[1][1] * v[1],
    ]
}

#[inline]
pub fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

#[inline]
pub fn transpose(m: &Mat2) -> Mat2 {
    [[m[0][0], m[1][0]], [m[0][1], m[1][1]]]
}

#[inline]
pub fn det(m: &Mat2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

pub fn inverse(m: &Mat2) -> Option<Mat2> {
    let d = det(m);
    if d.abs() < 1e-300 {
        return None;
    }
    Some([[m[1][1] / d, -m[0][1] / d], [-m[1][0] / d, m[0][0] / d]])
}

#[inline]
pub fn add(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] + b[0], a[1] + b[1]]
}

#[inline]
pub fn sub(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn scale(a: Vec2, s: f64) -> Vec2 {
    [a[0] * s, a[1] * s]
}

#[inline]
pub fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn cross(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
pub fn norm(a: Vec2) -> f64 {
    dot(a, a).sqrt()
}

pub fn rotation_matrix(theta: f64) -> Mat2 {
    let (s, c) = theta.sin_cos();
    [[c, -s], [s, c]]
}

/// Reflection across a line through the origin at angle `theta` to the x axis.
pub fn reflection_matrix(theta: f64) -> Mat2 {
    let (s, c) = (2.0 * theta).sin_cos();
    [[c, s], [s, -c]]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum IsometryKind {
    Identity,
    Translation,
    Rotation { theta: f64, center: Vec2 },
    Reflection { axis_angle: f64, point: Vec2 },
    Glide { axis_angle: f64, point: Vec2, shift: f64 },
    /// Result of composition or inversion; the kind is not re-derived.
    General,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Isometry {
    pub linear: Mat2,
    pub translation: Vec2,
    pub kind: IsometryKind,
}

impl Isometry {
    pub fn identity() -> Self {
        Self {
            linear: IDENTITY2,
            translation: [0.0, 0.0],
            kind: IsometryKind::Identity,
        }
    }

    pub fn translation(v: Vec2) -> Self {
        Self {
            linear: IDENTITY2,
            translation: v,
            kind: IsometryKind::Translation,
        }
    }

    /// Counter-clockwise (in x-right/y-down pixel axes: clockwise on screen) rotation about `center`.
    pub fn rotation(theta: f64, center: Vec2) -> Self {
        let r = rotation_matrix(theta);
        let t = sub(center, mat_vec(&r, center));
        Self {
            linear: r,
            translation: t,
            kind: IsometryKind::Rotation { theta, center },
        }
    }

    pub fn reflection(axis_angle: f64, point: Vec2) -> Self {
        let m = reflection_matrix(axis_angle);
        let t = sub(point, mat_vec(&m, point));
        Self {
            linear: m,
            translation: t,
            kind: IsometryKind::Reflection { axis_angle, point },
        }
    }

    /// Reflection across the axis followed by a shift of `shift` along it.
    pub fn glide(axis_angle: f64, point: Vec2, shift: f64) -> Self {
        let m = reflection_matrix(axis_angle);
        let dir = [axis_angle.cos(), axis_angle.sin()];
        let t = add(sub(point, mat_vec(&m, point)), scale(dir, shift));
        Self {
            linear: m,
            translation: t,
            kind: IsometryKind::Glide {
                axis_angle,
                point,
                shift,
            },
        }
    }

    pub fn from_parts(linear: Mat2, translation: Vec2) -> Result<Self> {
        let iso = Self {
            linear,
            translation,
            kind: IsometryKind::General,
        };
        if !iso.is_valid() {
            return Err(Error::InvalidConfig(format!(
                "linear part {linear:?} is not orthogonal"
            )));
        }
        Ok(iso)
    }

    #[inline]
    pub fn apply(&self, p: Vec2) -> Vec2 {
        add(mat_vec(&self.linear, p), self.translation)
    }

    pub fn det(&self) -> f64 {
        det(&self.linear)
    }

    pub fn is_valid(&self) -> bool {
        let p = mat_mul(&self.linear, &transpose(&self.linear));
        let orth = (p[0][0] - 1.0).abs() < 1e-6
            && (p[1][1] - 1.0).abs() < 1e-6
            && p[0][1].abs() < 1e-6
            && p[1][0].abs() < 1e-6;
        orth && (self.det().abs() - 1.0).abs() < 1e-6
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Isometry) -> Isometry {
        Isometry {
            linear: mat_mul(&self.linear, &other.linear),
            translation: add(mat_vec(&self.linear, other.translation), self.translation),
            kind: IsometryKind::General,
        }
    }

    pub fn invert(&self) -> Isometry {
        let lt = transpose(&self.linear);
        let t = mat_vec(&lt, self.translation);
        Isometry {
            linear: lt,
            translation: [-t[0], -t[1]],
            kind: match self.kind {
                IsometryKind::Identity => IsometryKind::Identity,
                _ => IsometryKind::General,
            },
        }
    }

    pub fn approx_eq(&self, other: &Isometry, tol: f64) -> bool {
        (0..2).all(|i| {
            (0..2).all(|j| (self.linear[i][j] - other.linear[i][j]).abs() <= tol)
                && (self.translation[i] - other.translation[i]).abs() <= tol
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Interp {
    Nearest,
    Bilinear,
}

/// Inverse-warps `img` so that `out(p) = img(iso^-1(p))`. Samples falling outside the
/// source (or on masked source pixels) are set to 0 and flagged invalid in the mask.
pub fn apply_isometry(img: &PatternImage, iso: &Isometry, interp: Interp) -> Result<PatternImage> {
    if img.width() < 2 || img.height() < 2 {
        return Err(Error::Degenerate(format!(
            "cannot warp a {}x{} image",
            img.width(),
            img.height()
        )));
    }
    if !iso.is_valid() {
        return Err(Error::InvalidConfig("isometry is not orthogonal".into()));
    }
    if matches!(iso.kind, IsometryKind::Identity) || iso.approx_eq(&Isometry::identity(), 0.0) {
        return Ok(img.clone());
    }
    let inv = iso.invert();
    let (w, h) = (img.width(), img.height());
    let mut pixels = vec![0f32; w * h];
    let mut mask = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            let src = inv.apply([x as f64, y as f64]);
            let v = match interp {
                Interp::Bilinear => img.sample_bilinear(src[0], src[1]),
                Interp::Nearest => img.sample_nearest(src[0], src[1]),
            };
            if let Some(v) = v {
                pixels[y * w + x] = v;
                mask[y * w + x] = true;
            }
        }
    }
    PatternImage::from_raw(w, h, pixels).with_mask(mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn noise_image(n: usize, seed: u64) -> PatternImage {
        // smooth deterministic field so interpolation errors stay small
        let s = seed as f64;
        PatternImage::from_fn(n, n, |x, y| {
            let (x, y) = (x as f64, y as f64);
            let v = 0.5
                + 0.2 * (0.21 * x + 0.13 * y + s).sin()
                + 0.15 * (0.17 * x - 0.29 * y + 2.0 * s).cos()
                + 0.1 * (0.11 * x * 0.7 + 0.23 * y).sin();
            v as f32
        })
        .unwrap()
    }

    #[test]
    fn identity_is_bit_identical() {
        let img = noise_image(16, 1);
        for interp in [Interp::Nearest, Interp::Bilinear] {
            let out = apply_isometry(&img, &Isometry::identity(), interp).unwrap();
            assert_eq!(out.pixels(), img.pixels());
        }
    }

    #[test]
    fn half_turn_twice_restores_interior() {
        let img = noise_image(64, 3);
        let r = Isometry::rotation(PI, img.center());
        let once = apply_isometry(&img, &r, Interp::Bilinear).unwrap();
        let twice = apply_isometry(&once, &r, Interp::Bilinear).unwrap();
        let mut err = 0.0;
        let mut n = 0;
        for y in 8..56 {
            for x in 8..56 {
                assert!(twice.is_valid(x, y));
                err += (twice.get(x, y) - img.get(x, y)).abs() as f64;
                n += 1;
            }
        }
        assert!(err / (n as f64) < 1e-3);
    }

    #[test]
    fn constant_image_stays_constant_on_valid_mask() {
        let img = PatternImage::filled(32, 32, 0.3).unwrap();
        let iso = Isometry::rotation(0.4, [10.0, 20.0]).compose(&Isometry::translation([3.3, -1.2]));
        let out = apply_isometry(&img, &iso, Interp::Bilinear).unwrap();
        let mask = out.mask().unwrap();
        assert!(mask.iter().any(|m| *m) && mask.iter().any(|m| !*m));
        for (v, m) in out.pixels().iter().zip(mask) {
            if *m {
                assert!((v - 0.3).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn degenerate_image_is_rejected() {
        let img = PatternImage::filled(1, 5, 0.1).unwrap();
        assert!(apply_isometry(&img, &Isometry::rotation(1.0, [0.0, 0.0]), Interp::Bilinear).is_err());
    }

    #[test]
    fn group_operations() {
        let id = Isometry::identity();
        assert!(id.invert().approx_eq(&id, 0.0));
        let c = [3.0, -2.0];
        let q = Isometry::rotation(FRAC_PI_2, c);
        assert!(q.compose(&q).approx_eq(&Isometry::rotation(PI, c), 1e-12));
        let m = Isometry::reflection(0.7, [1.0, 2.0]);
        assert!(m.compose(&m).approx_eq(&id, 1e-12));
        let g = Isometry::glide(0.3, [0.0, 1.0], 5.0);
        assert!(g.compose(&g).approx_eq(
            &Isometry::translation([10.0 * 0.3f64.cos(), 10.0 * 0.3f64.sin()]),
            1e-12
        ));
    }

    fn arb_iso() -> impl Strategy<Value = Isometry> {
        (0.0..2.0 * PI, -40.0..40.0f64, -40.0..40.0f64, any::<bool>(), -5.0..5.0f64).prop_map(
            |(a, x, y, refl, s)| {
                if refl {
                    Isometry::glide(a, [x, y], s)
                } else {
                    Isometry::rotation(a, [x, y])
                }
            },
        )
    }

    #[test]
    fn warp_round_trip_on_smooth_image() {
        use rand::{Rng, SeedableRng};
        let img = PatternImage::from_fn(96, 96, |x, y| {
            let (x, y) = (x as f64, y as f64);
            (0.5 + 0.2 * (x / 9.0).sin() * (y / 13.0).cos() + 0.1 * ((x + y) / 17.0).sin()) as f32
        })
        .unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let a = rng.gen_range(0.0..2.0 * PI);
            let c = [rng.gen_range(30.0..66.0), rng.gen_range(30.0..66.0)];
            let iso = if rng.gen_bool(0.5) {
                Isometry::rotation(a, c)
            } else {
                Isometry::glide(a, c, rng.gen_range(-4.0..4.0))
            };
            let there = apply_isometry(&img, &iso, Interp::Bilinear).unwrap();
            let back = apply_isometry(&there, &iso.invert(), Interp::Bilinear).unwrap();
            let mut worst = 0f32;
            for y in 0..96 {
                for x in 0..96 {
                    if back.is_valid(x, y) {
                        worst = worst.max((back.get(x, y) - img.get(x, y)).abs());
                    }
                }
            }
            assert!(back.valid_count() > 0);
            assert!(worst < 2.0 / 255.0, "{iso:?}: {worst}");
        }
    }

    proptest! {
        #[test]
        fn compose_with_inverse_is_identity(a in arb_iso(), b in arb_iso()) {
            prop_assert!(a.is_valid());
            prop_assert!((a.det().abs() - 1.0).abs() < 1e-6);
            prop_assert!(a.compose(&a.invert()).approx_eq(&Isometry::identity(), 1e-9));
            let ab = a.compose(&b);
            prop_assert!(ab.compose(&ab.invert()).approx_eq(&Isometry::identity(), 1e-9));
            let p = [1.5, -2.5];
            let lhs = ab.apply(p);
            let rhs = a.apply(b.apply(p));
            prop_assert!((lhs[0] - rhs[0]).abs() < 1e-9 && (lhs[1] - rhs[1]).abs() < 1e-9);
        }
    }
}
