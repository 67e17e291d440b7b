use escher_core::augment::{augment, transformed_lattice, AugmentParams};
use escher_core::gen::{synthesize, GenConfig};
use escher_core::group::{defining_profile, generator_lattice, Symmetry, WallpaperGroup as G};
use escher_core::image::PatternImage;
use escher_core::isometry::{norm, sub};
use escher_core::lattice::LatticeBasis;
use escher_core::umethod::*;
use escher_core::Error;
use proptest::prelude::*;

fn crop(g: G, seed: u64) -> PatternImage {
    let src = synthesize(g, &GenConfig::default().with_seed(seed)).unwrap();
    augment(&src, &AugmentParams::identity(), None).unwrap()
}

fn rotated(g: G, seed: u64, theta: f64) -> (PatternImage, LatticeBasis) {
    let src = synthesize(g, &GenConfig::default().with_seed(seed)).unwrap();
    let b = generator_lattice(g, 32.0);
    let p = AugmentParams { theta, ..AugmentParams::identity() };
    (augment(&src, &p, Some(&b)).unwrap(), transformed_lattice(&b, &p))
}

#[test]
fn zero_lag_is_one_and_constant_has_no_structure() {
    let s = autocorrelate(&crop(G::PGG, 2)).unwrap();
    assert!((s.get(0, 0) - 1.0).abs() < 1e-9);
    let flat = PatternImage::filled(128, 128, 0.3).unwrap();
    assert!(matches!(autocorrelate(&flat), Err(Error::NoStructure)));
    let small = PatternImage::filled(32, 32, 0.3).unwrap();
    assert!(autocorrelate(&small).is_err());
}

#[test]
fn sinusoid_peaks_at_multiples_of_its_period() {
    let img = PatternImage::from_fn(128, 128, |x, _| {
        (0.5 + 0.4 * (2.0 * std::f64::consts::PI * x as f64 / 16.0).cos()) as f32
    })
    .unwrap();
    let s = autocorrelate(&img).unwrap();
    for k in 1..=4i64 {
        assert!((s.get(16 * k, 0) - 1.0).abs() < 1e-6, "lag {}", 16 * k);
        assert!(s.get(16 * k - 8, 0) < -0.9);
    }
}

#[test]
fn nearest_peaks_sit_on_lattice_vectors() {
    for g in [G::P1, G::PMM, G::P4, G::P6] {
        let b = generator_lattice(g, 32.0);
        let s = autocorrelate(&band_pass(&crop(g, 1)).unwrap()).unwrap();
        let mut peaks = s.peaks(PEAK_THRESHOLD);
        peaks.sort_by(|a, b| b.1.total_cmp(&a.1));
        // the strongest non-DC peaks are lattice vectors
        for (p, _) in peaks.iter().take(4) {
            let near = b.nearest_lattice_point(*p);
            assert!(norm(sub(*p, near)) <= 1.0, "{g}: {p:?}");
        }
    }
}

#[test]
fn square_lattice_has_side_thirty_two() {
    for g in [G::P4, G::P4M, G::P4G] {
        let b = find_lattice(&autocorrelate(&crop(g, 3)).unwrap()).unwrap();
        assert!((norm(b.t1) - 32.0).abs() <= 1.0 && (norm(b.t2) - 32.0).abs() <= 1.0, "{g}: {b:?}");
    }
}

#[test]
fn hexagonal_lattice_has_sixty_degree_basis() {
    for g in [G::P3, G::P3M1, G::P31M, G::P6, G::P6M] {
        let r = analyze(&crop(g, 4)).unwrap();
        let a = r.scores.basis.angle_deg();
        assert!((a - 60.0).abs() <= 3.0, "{g}: {a}");
    }
}

#[test]
fn lattice_rotates_with_the_pattern() {
    for (i, theta) in [17.0, 63.0, 141.0, 250.0].into_iter().enumerate() {
        let (img, expected) = rotated(G::P1, i as u64, theta);
        let found = analyze(&img).unwrap().scores.basis;
        let expected = expected.reduced();
        // reduced bases are unique up to sign for an oblique lattice
        let d = signed_angle_deg(expected.t1, found.t1);
        let off = (d.abs() % 180.0).min(180.0 - d.abs() % 180.0);
        assert!(off <= 2.0, "theta {theta}: {expected:?} vs {found:?}");
        assert!((found.area() - expected.area()).abs() < 0.05 * expected.area());
    }
}

#[test]
fn exact_half_turn_scores_one() {
    let base = crop(G::P1, 9);
    let (w, h) = (base.width(), base.height());
    let sym = PatternImage::from_fn(w, h, |x, y| 0.5 * (base.get(x, y) + base.get(w - 1 - x, h - 1 - y))).unwrap();
    let b = generator_lattice(G::P1, 32.0);
    let s = symmetry_scores(&sym, &b).unwrap();
    assert!(s.get(Symmetry::R2) > 0.99, "{}", s.get(Symmetry::R2));
}

#[test]
fn p1_scores_low_everywhere() {
    for seed in 0..3 {
        let s = symmetry_scores(&crop(G::P1, seed), &generator_lattice(G::P1, 32.0)).unwrap();
        for x in Symmetry::ALL {
            assert!(s.get(x) < 0.6, "seed {seed}: {x} = {}", s.get(x));
        }
    }
}

#[test]
fn p4m_has_quarter_turn_and_diagonal_mirror() {
    let s = symmetry_scores(&crop(G::P4M, 0), &generator_lattice(G::P4M, 32.0)).unwrap();
    assert!(s.get(Symmetry::R4) >= 0.85);
    assert!(s.get(Symmetry::RefD1) >= 0.85);
}

#[test]
fn p2_scores_high_only_on_half_turn() {
    let s = symmetry_scores(&crop(G::P2, 2), &generator_lattice(G::P2, 32.0)).unwrap();
    for x in Symmetry::ALL {
        if defining_profile(G::P2).contains(x) {
            assert!(s.get(x) >= 0.85);
        } else {
            assert!(s.get(x) < 0.6, "{x}");
        }
    }
}

#[test]
fn scores_ignore_affine_intensity_changes() {
    let img = crop(G::PMG, 5);
    let b = generator_lattice(G::PMG, 32.0);
    let dim = PatternImage::new(
        img.width(),
        img.height(),
        img.pixels().iter().map(|v| 0.5 * v + 0.25).collect(),
    )
    .unwrap();
    let (a, c) = (symmetry_scores(&img, &b).unwrap(), symmetry_scores(&dim, &b).unwrap());
    for x in Symmetry::ALL {
        assert!((a.get(x) - c.get(x)).abs() < 1e-6, "{x}: {} vs {}", a.get(x), c.get(x));
    }
}

#[test]
fn degenerate_basis_is_rejected() {
    let b = LatticeBasis { t1: [32.0, 0.0], t2: [64.0, 0.0] };
    assert!(symmetry_scores(&crop(G::P1, 0), &b).is_err());
}

fn arb_scores() -> impl Strategy<Value = [f64; 12]> {
    prop::array::uniform12(0.0..=1.0f64)
}

proptest! {
    #[test]
    fn classification_is_the_best_margin(v in arb_scores()) {
        let b = LatticeBasis::new([32.0, 0.0], [0.0, 32.0]).unwrap();
        let s = SymmetryScores::from_fn(b, |x| v[x.index()]);
        let r = classify_margin(&s);
        let best = r.all_margins.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!((r.margin - best).abs() < 1e-12);
        prop_assert!((r.all_margins[r.group.index()] - best).abs() < 1e-12);
    }

    // Raising a score the chosen group relies on keeps its own margin and never
    // helps a group that lacks that symmetry.
    #[test]
    fn raising_a_defining_score_is_never_penalized(v in arb_scores(), pick in 0usize..12, bump in 0.0..=1.0f64) {
        let b = LatticeBasis::new([32.0, 0.0], [0.0, 32.0]).unwrap();
        let s = SymmetryScores::from_fn(b, |x| v[x.index()]);
        let r = classify_margin(&s);
        let prof = matched_profile(r.group, &s);
        let syms: Vec<Symmetry> = prof.iter().collect();
        prop_assume!(!syms.is_empty());
        let d = syms[pick % syms.len()];
        let nv = v[d.index()] + bump * (1.0 - v[d.index()]);
        let s2 = SymmetryScores::from_fn(b, |x| if x == d { nv } else { v[x.index()] });
        let r2 = classify_margin(&s2);
        prop_assert!(r2.all_margins[r.group.index()] >= r.margin - 1e-12);
        for g in G::ALL {
            let lacks = profile_variants_lack(g, d);
            if lacks {
                prop_assert!(r2.all_margins[g.index()] <= r.all_margins[g.index()] + 1e-12);
            }
        }
        // the only groups that can overtake are those that also use `d`
        if r2.group != r.group {
            prop_assert!(!profile_variants_lack(r2.group, d));
        }
    }
}

fn profile_variants_lack(g: G, d: Symmetry) -> bool {
    escher_core::group::profile_variants(g).iter().all(|p| !p.contains(d))
}
