use escher_baselines::avr::{avr_rank, avr_score, select_top};
use escher_baselines::cache::{read_features, write_features, CacheMeta};
use escher_baselines::fourier::{fourier_features, FOURIER_LEN};
use escher_baselines::normalize::MinMax;
use escher_baselines::svm::{svm_train, SvmConfig};
use escher_baselines::{BaselineError, Provenance};
use escher_core::image::PatternImage;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Gaussian-ish blobs around `centers`, `per` samples each.
fn blobs(centers: &[[f64; 2]], spread: f64, per: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut r = rng(seed);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..per {
            let dx: f64 = (0..4).map(|_| r.gen_range(-1.0..1.0)).sum::<f64>() * 0.5;
            let dy: f64 = (0..4).map(|_| r.gen_range(-1.0..1.0)).sum::<f64>() * 0.5;
            rows.push(vec![center[0] + spread * dx, center[1] + spread * dy]);
            labels.push(c);
        }
    }
    (rows, labels)
}

fn accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    pred.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64
}

#[test]
fn parseval_holds() {
    let mut r = rng(1);
    let img = PatternImage::from_fn(128, 128, |_, _| r.gen::<f32>()).unwrap();
    let f = fourier_features(&img).unwrap();
    assert_eq!(f.len(), FOURIER_LEN);
    let half = FOURIER_LEN / 2;
    let spectral: f64 = (0..half).map(|i| f[i] * f[i] + f[half + i] * f[half + i]).sum::<f64>() / (128.0 * 128.0);
    let spatial: f64 = img.pixels().iter().map(|&v| (v as f64).powi(2)).sum();
    assert!((spectral - spatial).abs() <= 1e-4 * spatial);
}

#[test]
fn avr_prefers_separating_features() {
    let mut r = rng(2);
    let labels: Vec<usize> = (0..60).map(|i| i % 3).collect();
    // feature 0: constant, 1: noise, 2: disjoint class ranges
    let rows: Vec<Vec<f64>> = labels
        .iter()
        .map(|&l| vec![4.0, r.gen_range(0.0..1.0), l as f64 * 10.0 + r.gen_range(0.0..1.0)])
        .collect();
    let ranked = avr_rank(&rows, &labels).unwrap();
    assert_eq!(ranked, vec![2, 1, 0]);
    assert_eq!(select_top(&ranked, 2), vec![2, 1]);
    let classes: Vec<Vec<usize>> = (0..3).map(|c| (0..60).filter(|i| i % 3 == c).collect()).collect();
    assert_eq!(avr_score(&rows, &classes, 0), 0.0);
    // adding a constant changes nothing
    let shifted: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| v + 123.0).collect()).collect();
    for j in 0..3 {
        let (a, b) = (avr_score(&rows, &classes, j), avr_score(&shifted, &classes, j));
        assert!((a - b).abs() <= 1e-6 * a.abs().max(1.0), "{a} vs {b}");
    }
}

#[test]
fn avr_needs_two_classes() {
    let rows = vec![vec![1.0], vec![2.0], vec![3.0]];
    assert!(matches!(avr_rank(&rows, &[0, 0, 0]), Err(BaselineError::TooFewClasses(_))));
    assert!(matches!(avr_rank(&rows, &[0, 0, 1]), Err(BaselineError::TooFewClasses(_))));
}

proptest! {
    #[test]
    fn avr_rank_is_a_permutation(seed in 0u64..1000, dim in 1usize..20) {
        let mut r = rng(seed);
        let labels: Vec<usize> = (0..12).map(|i| i % 3).collect();
        let rows: Vec<Vec<f64>> = labels.iter().map(|_| (0..dim).map(|_| r.gen_range(-1.0..1.0)).collect()).collect();
        let mut ranked = avr_rank(&rows, &labels).unwrap();
        ranked.sort_unstable();
        prop_assert_eq!(ranked, (0..dim).collect::<Vec<_>>());
    }
}

#[test]
fn minmax_uses_training_range() {
    let train = vec![vec![0.0, 5.0], vec![2.0, 5.0]];
    let n = MinMax::fit(&train).unwrap();
    assert_eq!(n.apply(&[1.0, 5.0]), vec![0.5, 0.0]);
    assert_eq!(n.apply(&[4.0, 7.0]), vec![2.0, 0.0]);
}

#[test]
fn two_point_machine_matches_closed_form() {
    // symmetric pair: bias 0, alpha = 1 / (1 - K12), decision values +-1
    let rows = vec![vec![-1.0, 0.0], vec![1.0, 0.0]];
    let cfg = SvmConfig { c: 10.0, width: Some(1.0), tolerance: 1e-9, ..SvmConfig::default() };
    let m = svm_train(&rows, &[0, 1], &cfg).unwrap();
    let k12 = (-2.0f64).exp();
    let machine = &m.machines[0];
    assert!(machine.bias.abs() < 1e-9);
    for (&coef, sign) in machine.coef.iter().zip([1.0, -1.0]) {
        assert!((coef - sign / (1.0 - k12)).abs() < 1e-6, "{coef}");
    }
    assert_eq!(m.predict(&[-0.9, 0.3]), 0);
    assert_eq!(m.predict(&[0.8, -0.2]), 1);
}

#[test]
fn separable_clusters_are_learned() {
    let centers = [[0.0, 0.0], [5.0, 0.0], [0.0, 5.0], [5.0, 5.0]];
    let (rows, labels) = blobs(&centers, 0.5, 25, 3);
    let m = svm_train(&rows, &labels, &SvmConfig::default()).unwrap();
    assert_eq!(m.machines.len(), 6);
    assert_eq!(accuracy(&m.predict_all(&rows), &labels), 1.0);
    assert!(m.width > 0.0);
}

#[test]
fn training_order_barely_matters() {
    let centers = [[0.0, 0.0], [1.5, 0.0]];
    let (rows, labels) = blobs(&centers, 1.0, 100, 4);
    let (test, truth) = blobs(&centers, 1.0, 200, 5);
    let base = accuracy(&svm_train(&rows, &labels, &SvmConfig::default()).unwrap().predict_all(&test), &truth);
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.shuffle(&mut rng(6));
    let rows2: Vec<Vec<f64>> = order.iter().map(|&i| rows[i].clone()).collect();
    let labels2: Vec<usize> = order.iter().map(|&i| labels[i]).collect();
    let m2 = svm_train(&rows2, &labels2, &SvmConfig::default()).unwrap();
    let permuted = accuracy(&m2.predict_all(&test), &truth);
    assert!((base - permuted).abs() < 0.01, "{base} vs {permuted}");
    assert_eq!(m2.predict_all(&test), m2.predict_all(&test));
}

#[test]
fn single_class_is_degenerate() {
    let rows = vec![vec![0.0], vec![1.0]];
    assert!(matches!(svm_train(&rows, &[3, 3], &SvmConfig::default()), Err(BaselineError::Degenerate(_))));
}

#[test]
fn feature_cache_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let stem = dir.path().join("train");
    let rows = vec![vec![0.25, 1.5, -2.0], vec![3.0, 0.0, 1e-3]];
    let meta = CacheMeta {
        provenance: Provenance::Fourier,
        rows: 2,
        cols: 3,
        labels: vec![4, 9],
        selected: Some(vec![7, 1, 3]),
        normalization: Some(MinMax::fit(&rows).unwrap()),
    };
    write_features(&stem, &meta, &rows).unwrap();
    let (back_meta, back) = read_features(&stem).unwrap();
    assert_eq!(back_meta, meta);
    for (a, b) in rows.iter().flatten().zip(back.iter().flatten()) {
        assert_eq!(*a as f32, *b as f32);
    }
    std::fs::write(stem.with_extension("f32"), [0u8; 5]).unwrap();
    assert!(read_features(&stem).is_err());
}
