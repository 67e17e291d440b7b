use std::f64::consts::PI;

use escher_core::image::PatternImage;
use escher_core::isometry::{apply_isometry, Interp, Isometry};
use escher_core::rng::rng_for;
use escher_net::interpret::*;
use escher_net::model::{EscherNet, ModelConfig, Stage};
use escher_net::train::image_input;
use escher_net::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small() -> ModelConfig {
    ModelConfig { input: 32, channels: [4, 8], kernels: [5, 3], hidden: 16, classes: 17 }
}

fn net(cfg: ModelConfig, seed: u64) -> EscherNet<f64> {
    EscherNet::init(cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn noise(side: usize, seed: u64) -> PatternImage {
    let mut rng = rng_for(seed, &[]);
    PatternImage::from_fn(side, side, |_, _| rng.gen::<f32>()).unwrap()
}

/// `0.5 + 0.5 cos(2 pi (x cos a + y sin a) / period)`.
fn stripes(side: usize, period: f64, angle_deg: f64) -> PatternImage {
    let (s, c) = angle_deg.to_radians().sin_cos();
    PatternImage::from_fn(side, side, |x, y| {
        (0.5 + 0.5 * (2.0 * PI * (x as f64 * c + y as f64 * s) / period).cos()) as f32
    })
    .unwrap()
}

fn circular_distance(a: usize, b: usize, n: usize) -> usize {
    let d = a.abs_diff(b) % n;
    d.min(n - d)
}

#[test]
fn zero_final_layer_gives_empty_heatmap() {
    let mut m = net(small(), 1);
    m.fc2.weight.fill(0.0);
    let h = grad_cam(&m, &noise(32, 1), 4).unwrap();
    assert!(h.values.iter().all(|&v| v == 0.0));
    assert!(grad_cam(&m, &noise(32, 1), 17).is_err());
}

#[test]
fn heatmap_matches_last_pooled_grid() {
    let m: EscherNet<f32> = net(ModelConfig::paper_exact(), 2).cast();
    let h = grad_cam(&m, &noise(128, 2), 0).unwrap();
    assert_eq!((h.width, h.height), (32, 32));
    assert!(h.values.iter().all(|&v| v >= 0.0));
    let up = h.upsample(128, 128);
    assert_eq!(up.values.len(), 128 * 128);
    if h.max() > 0.0 {
        assert!((h.normalized().max() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn heatmap_equals_hand_computed_weights() {
    let cfg = ModelConfig { input: 8, channels: [1, 2], kernels: [1, 1], hidden: 3, classes: 2 };
    let m = net(cfg, 3);
    let img = noise(8, 3);
    let fwd = m.forward(&image_input::<f64>(&img), 1).unwrap();
    let a = fwd.stage(Stage::Pool2);
    let h = fwd.stage(Stage::Fc1);
    let (hw, din) = (4, 8);
    for class in 0..2 {
        // d logit / d a = sum_j W2[c, j] [h_j > 0] W1[j, :]
        let mut grad = vec![0.0; din];
        for j in 0..3 {
            if h[j] > 0.0 {
                let w2 = m.fc2.weight.data()[class * 3 + j];
                for (i, g) in grad.iter_mut().enumerate() {
                    *g += w2 * m.fc1.weight.data()[j * din + i];
                }
            }
        }
        let alpha: Vec<f64> = (0..2).map(|k| grad[k * hw..(k + 1) * hw].iter().sum::<f64>() / hw as f64).collect();
        let expected: Vec<f64> = (0..hw).map(|p| (alpha[0] * a[p] + alpha[1] * a[hw + p]).max(0.0)).collect();
        let got = grad_cam(&m, &img, class).unwrap();
        for (g, e) in got.values.iter().zip(&expected) {
            assert!((g - e).abs() < 1e-12, "{g} vs {e}");
        }
    }
}

#[test]
fn ascent_runs_fixed_iterations_and_climbs() {
    let m: EscherNet<f32> = net(small(), 4).cast();
    for (stage, unit) in [(Stage::Conv3, 1), (Stage::Pool2, 2), (Stage::Fc2, 5)] {
        let r = maximize_activation(&m, stage, unit, 7).unwrap();
        assert!(!r.dead);
        assert_eq!(r.iterations, 500);
        assert_eq!(r.trace.len(), 500);
        assert!(r.ascent_fraction() >= 0.9, "{stage:?}: {}", r.ascent_fraction());
        assert!(r.trace[499] > r.initial);
        let again = maximize_activation(&m, stage, unit, 7).unwrap();
        assert_eq!(r, again);
        let img = r.image().unwrap();
        assert_eq!((img.width(), img.height()), (32, 32));
    }
}

#[test]
fn dead_unit_is_reported() {
    let mut m = net(small(), 5);
    m.conv1.weight.fill(0.0);
    m.conv1.bias = Tensor::from_vec(&[4], vec![-1.0; 4]).unwrap();
    let r = maximize_activation(&m, Stage::Conv3, 0, 1).unwrap();
    assert!(r.dead);
    assert_eq!(r.iterations, 0);
    let report = FilterReport::from_maximized(&r).unwrap();
    assert!(report.dead && report.period.is_none());
}

#[test]
fn vertical_stripes_fall_in_first_bin() {
    let h = orientation_histogram(&stripes(128, 16.0, 0.0)).unwrap();
    assert!((h.weights.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    assert!(circular_distance(h.argmax(), 0, ORIENTATION_BINS) <= 1);
    assert!(h.dominant_angles()[0] < 5.0 || h.dominant_angles()[0] > 175.0);
    let horizontal = orientation_histogram(&stripes(128, 16.0, 90.0)).unwrap();
    assert!(circular_distance(horizontal.argmax(), 18, ORIENTATION_BINS) <= 1);
}

#[test]
fn rotation_shifts_histogram() {
    // two stripe families of unequal strength give an asymmetric profile
    let a = stripes(160, 12.0, 20.0);
    let b = stripes(160, 9.0, 100.0);
    let mixed: Vec<f32> = a.pixels().iter().zip(b.pixels()).map(|(u, v)| 0.7 * u + 0.3 * v).collect();
    let img = PatternImage::new(160, 160, mixed).unwrap();
    let rotated = apply_isometry(&img, &Isometry::rotation(PI / 4.0, img.center()), Interp::Bilinear).unwrap();
    let before = orientation_votes(&img).unwrap();
    let after = orientation_votes(&rotated).unwrap();
    let n = ORIENTATION_BINS;
    let corr = |s: usize| (0..n).map(|i| before[i] * after[(i + s) % n]).sum::<f64>();
    let best = (0..n).max_by(|&x, &y| corr(x).total_cmp(&corr(y))).unwrap();
    assert!(circular_distance(best, 9, n) <= 1, "shift {best}");
}

#[test]
fn white_noise_is_isotropic() {
    let mut mean = vec![0.0; ORIENTATION_BINS];
    for seed in 0..10 {
        let h = orientation_histogram(&noise(128, seed)).unwrap();
        for (m, w) in mean.iter_mut().zip(&h.weights) {
            *m += w / 10.0;
        }
    }
    let max = mean.iter().copied().fold(0.0, f64::max);
    let min = mean.iter().copied().fold(1.0, f64::min);
    assert!(max < 2.0 * min, "max {max} min {min}");
}

#[test]
fn softmax_ignores_constant_offsets() {
    let votes: Vec<f64> = (0..ORIENTATION_BINS).map(|i| (i as f64 * 0.37).sin()).collect();
    let shifted: Vec<f64> = votes.iter().map(|v| v + 5.0).collect();
    for (a, b) in softmax_votes(&votes).iter().zip(softmax_votes(&shifted)) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!(orientation_histogram(&PatternImage::filled(16, 16, 0.2).unwrap()).is_err());
}

#[test]
fn scale_of_sinusoid() {
    let p = estimate_scale(&stripes(128, 16.0, 0.0)).unwrap().unwrap();
    assert!((p - 16.0).abs() <= 1.0, "{p}");
    let doubled = estimate_scale(&stripes(128, 32.0, 0.0)).unwrap().unwrap();
    assert!((doubled - 2.0 * p).abs() <= 1.0, "{doubled}");
    assert_eq!(estimate_scale(&noise(128, 3)).unwrap(), None);
}

#[test]
fn sorting_puts_aperiodic_last() {
    let order = sort_filters_by_scale(&[Some(12.0), None, Some(4.0), Some(12.0), None, Some(8.0)]);
    assert_eq!(order, vec![2, 5, 0, 3, 1, 4]);
}
