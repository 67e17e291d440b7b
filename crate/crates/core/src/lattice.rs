use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::isometry::{add, cross, dot, inverse, mat_vec, norm, scale, sub, Mat2, Vec2};

/// Translation lattice basis in pixel units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeBasis {
    pub t1: Vec2,
    pub t2: Vec2,
}

impl LatticeBasis {
    pub fn new(t1: Vec2, t2: Vec2) -> Result<Self> {
        let b = Self { t1, t2 };
        if !(t1.iter().chain(t2.iter()).all(|v| v.is_finite())) {
            return Err(Error::Degenerate("non-finite lattice vector".into()));
        }
        let scale = norm(t1) * norm(t2);
        if scale == 0.0 || cross(t1, t2).abs() < 1e-9 * scale {
            return Err(Error::Degenerate(format!(
                "collinear lattice vectors {t1:?}, {t2:?}"
            )));
        }
        Ok(b)
    }

    pub fn d1(&self) -> Vec2 {
        add(self.t1, self.t2)
    }

    pub fn d2(&self) -> Vec2 {
        sub(self.t1, self.t2)
    }

    pub fn area(&self) -> f64 {
        cross(self.t1, self.t2).abs()
    }

    /// Columns are `t1`, `t2`.
    pub fn matrix(&self) -> Mat2 {
        [[self.t1[0], self.t2[0]], [self.t1[1], self.t2[1]]]
    }

    pub fn to_fractional(&self, p: Vec2) -> Vec2 {
        let inv = inverse(&self.matrix()).expect("validated basis");
        mat_vec(&inv, p)
    }

    pub fn to_cartesian(&self, u: Vec2) -> Vec2 {
        add(scale(self.t1, u[0]), scale(self.t2, u[1]))
    }

    /// Angle between `t1` and `t2` in degrees.
    pub fn angle_deg(&self) -> f64 {
        (dot(self.t1, self.t2) / (norm(self.t1) * norm(self.t2)))
            .clamp(-1.0, 1.0)
            .acos()
            .to_degrees()
    }

    /// Lagrange–Gauss reduction followed by canonical ordering: `|t1| <= |t2|`,
    /// `|t1·t2| <= |t1|²/2`, `t1·t2 >= 0`, and `t1` in the upper half-plane
    /// (`y > 0`, or `y == 0` and `x > 0`).
    pub fn reduced(&self) -> LatticeBasis {
        let mut a = self.t1;
        let mut b = self.t2;
        if dot(a, a) > dot(b, b) {
            std::mem::swap(&mut a, &mut b);
        }
        for _ in 0..64 {
            let mu = (dot(a, b) / dot(a, a)).round();
            b = sub(b, scale(a, mu));
            if dot(b, b) < dot(a, a) {
                std::mem::swap(&mut a, &mut b);
            } else {
                break;
            }
        }
        let upper = |v: Vec2| v[1] > 0.0 || (v[1] == 0.0 && v[0] > 0.0);
        if !upper(a) {
            a = scale(a, -1.0);
        }
        if dot(a, b) < 0.0 {
            b = scale(b, -1.0);
        }
        LatticeBasis { t1: a, t2: b }
    }

    pub fn is_reduced(&self, tol: f64) -> bool {
        let (a, b) = (self.t1, self.t2);
        norm(a) <= norm(b) + tol && dot(a, b).abs() <= 0.5 * dot(a, a) + tol
    }

    /// Nearest lattice vector to `p`, found by rounding fractional coordinates
    /// and checking the neighbouring cells.
    pub fn nearest_lattice_point(&self, p: Vec2) -> Vec2 {
        let u = self.to_fractional(p);
        let (i0, j0) = (u[0].round(), u[1].round());
        let mut best = self.to_cartesian([i0, j0]);
        let mut best_d = norm(sub(p, best));
        for di in -1..=1 {
            for dj in -1..=1 {
                let q = self.to_cartesian([i0 + di as f64, j0 + dj as f64]);
                let d = norm(sub(p, q));
                if d < best_d {
                    best_d = d;
                    best = q;
                }
            }
        }
        best
    }

    /// Applies a similarity `x -> s R(theta) x` to both vectors.
    pub fn transformed(&self, linear: &Mat2) -> LatticeBasis {
        LatticeBasis {
            t1: mat_vec(linear, self.t1),
            t2: mat_vec(linear, self.t2),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn degenerate_basis_rejected() {
        assert!(LatticeBasis::new([1.0, 0.0], [2.0, 0.0]).is_err());
        assert!(LatticeBasis::new([0.0, 0.0], [2.0, 1.0]).is_err());
    }

    #[test]
    fn reduction_of_skewed_square_basis() {
        let b = LatticeBasis::new([32.0, 0.0], [96.0, 32.0]).unwrap().reduced();
        assert!((norm(b.t1) - 32.0).abs() < 1e-9);
        assert!((norm(b.t2) - 32.0).abs() < 1e-9);
        assert!(dot(b.t1, b.t2).abs() < 1e-9);
    }

    #[test]
    fn hexagonal_basis_canonicalizes_to_sixty_degrees() {
        let a = 34.0;
        let t2 = [-a / 2.0, a * 3f64.sqrt() / 2.0];
        let b = LatticeBasis::new([a, 0.0], t2).unwrap().reduced();
        assert!((b.angle_deg() - 60.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn reduction_preserves_area_and_is_reduced(
            x1 in -50.0..50.0f64, y1 in -50.0..50.0f64,
            x2 in -50.0..50.0f64, y2 in -50.0..50.0f64,
            k in -4i32..4,
        ) {
            prop_assume!(cross([x1, y1], [x2, y2]).abs() > 10.0);
            let b = LatticeBasis::new([x1, y1], [x2 + k as f64 * x1, y2 + k as f64 * y1]).unwrap();
            let r = b.reduced();
            prop_assert!((r.area() - b.area()).abs() < 1e-6 * b.area());
            prop_assert!(r.is_reduced(1e-9));
            prop_assert!(dot(r.t1, r.t2) >= 0.0);
            // every reduced vector is a lattice vector of the original basis
            for v in [r.t1, r.t2] {
                let u = b.to_fractional(v);
                prop_assert!((u[0] - u[0].round()).abs() < 1e-6);
                prop_assert!((u[1] - u[1].round()).abs() < 1e-6);
            }
        }
    }
}
