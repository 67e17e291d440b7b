//! Symmetry-breaking patches for two-fold patterns.
//!
//! A square of constant value is painted at the same offset inside every
//! unit cell. Placed away from the half-turn centres it keeps every
//! translation but removes the half-turn, so the pattern drifts towards P1.

use escher_core::augment::{AugmentParams, DEFAULT_CROP};
use escher_core::image::PatternImage;
use escher_core::isometry::{norm, Vec2};
use escher_core::lattice::LatticeBasis;

use crate::error::{HarnessError, Result};

/// Minimum distance from a patch centre to every half-turn centre, pixels.
pub const MIN_CLEARANCE: f64 = 10.0;
/// Visible cycles after rescaling a patched pattern.
pub const PATCH_CYCLES: f64 = 5.66;
const SEARCH_STEPS: usize = 64;

/// Half-turn centres of a two-fold lattice pattern sit on the half-lattice points.
fn clearance(basis: &LatticeBasis, p: Vec2) -> f64 {
    let mut best = f64::INFINITY;
    for i in -2..=3 {
        for j in -2..=3 {
            let c = basis.to_cartesian([i as f64 / 2.0, j as f64 / 2.0]);
            best = best.min(norm([p[0] - c[0], p[1] - c[1]]));
        }
    }
    best
}

/// Offset inside the cell farthest from every half-turn centre, with its clearance.
pub fn patch_site(basis: &LatticeBasis) -> (Vec2, f64) {
    let mut best = ([0.0, 0.0], f64::NEG_INFINITY);
    for i in 0..SEARCH_STEPS {
        for j in 0..SEARCH_STEPS {
            let p = basis.to_cartesian([i as f64 / SEARCH_STEPS as f64, j as f64 / SEARCH_STEPS as f64]);
            let c = clearance(basis, p);
            if c > best.1 + 1e-12 {
                best = (p, c);
            }
        }
    }
    best
}

/// Paints an axis-aligned square of side `side` and value `fill` centred at
/// `offset` (relative to the image centre) in every lattice cell.
pub fn apply_patch(img: &PatternImage, basis: &LatticeBasis, offset: Vec2, side: usize, fill: f32) -> Result<PatternImage> {
    let shortest = norm(basis.t1).min(norm(basis.t2));
    if side as f64 >= shortest {
        return Err(HarnessError::Usage(format!("patch side {side} is not smaller than the lattice ({shortest:.1} px)")));
    }
    if side == 0 {
        return Ok(img.clone());
    }
    let half = side as f64 / 2.0;
    let c = img.center();
    let inside = |x: usize, y: usize| {
        let q = [x as f64 - c[0] - offset[0], y as f64 - c[1] - offset[1]];
        let u = basis.to_fractional(q);
        let (a, b) = (u[0].round(), u[1].round());
        (-1..=1).any(|di| {
            (-1..=1).any(|dj| {
                let l = basis.to_cartesian([a + di as f64, b + dj as f64]);
                (q[0] - l[0]).abs() < half && (q[1] - l[1]).abs() < half
            })
        })
    };
    Ok(PatternImage::from_fn(img.width(), img.height(), |x, y| if inside(x, y) { fill } else { img.get(x, y) })?)
}

/// Unrotated, centred rescale showing `PATCH_CYCLES` cells across the crop.
pub fn rescale_params(lattice_size: f64) -> AugmentParams {
    AugmentParams { scale: PATCH_CYCLES * lattice_size / DEFAULT_CROP as f64, ..AugmentParams::identity() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use escher_core::group::{generator_lattice, WallpaperGroup};

    #[test]
    fn site_is_clear_of_half_turn_centres() {
        let b = generator_lattice(WallpaperGroup::P2, 32.0);
        let (p, c) = patch_site(&b);
        assert!(c >= MIN_CLEARANCE, "clearance {c}");
        assert!((clearance(&b, p) - c).abs() < 1e-12);
    }

    #[test]
    fn patch_repeats_with_the_lattice() {
        let b = LatticeBasis::new([16.0, 0.0], [0.0, 16.0]).unwrap();
        let img = PatternImage::filled(64, 64, 0.0).unwrap();
        let out = apply_patch(&img, &b, [4.0, 4.0], 4, 1.0).unwrap();
        let painted = out.pixels().iter().filter(|&&v| v == 1.0).count();
        // 16 cells, each with a 4x4 square on the half-integer pixel grid
        assert_eq!(painted, 16 * 16);
        for y in 0..48 {
            for x in 0..48 {
                assert_eq!(out.get(x, y), out.get(x + 16, y + 16));
            }
        }
    }

    #[test]
    fn oversized_patch_is_rejected() {
        let b = LatticeBasis::new([16.0, 0.0], [0.0, 16.0]).unwrap();
        let img = PatternImage::filled(32, 32, 0.5).unwrap();
        assert!(apply_patch(&img, &b, [0.0, 0.0], 16, 0.0).is_err());
        assert_eq!(apply_patch(&img, &b, [0.0, 0.0], 0, 0.0).unwrap(), img);
    }
}
