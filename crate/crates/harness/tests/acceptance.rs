//! Acceptance suite. Each test prints one `[PASS]`/`[FAIL]` line and then
//! asserts it. Tests hold a global lock so wall-clock budgets are measured
//! without interference from each other.

use std::io::Write;
use std::process::Command;
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::Instant;

use escher_core::augment::{augment, AugmentParams, AugmentPolicy};
use escher_core::gen::{image_seed, synthesize, GenConfig};
use escher_core::group::{defining_profile, full_symmetry_set, generator_lattice, Symmetry, WallpaperGroup as G};
use escher_core::umethod::symmetry_scores;
use escher_harness::data::sources;
use escher_harness::experiments::{embedding_baseline, fourier_baseline, patch_p2_curve, scale_sweep_reports, umethod_confusion};
use escher_harness::manifest::RunManifest;
use escher_harness::models::{confusion, train_classifier, train_on, TestSet, Trained};
use escher_harness::{Report, RunConfig};
use escher_net::gradcheck::{check_layers, check_network};
use escher_net::ModelConfig;

const SEED: u64 = 7;

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|p| p.into_inner())
}

/// Written straight to stderr so the line shows even when libtest captures output.
fn verdict(id: &str, title: &str, pass: bool, detail: String) -> bool {
    let line = format!("[{}] {id} {title}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    pass
}

fn minutes(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() / 60.0
}

// ---------------------------------------------------------------- shared CI network

const CI_GROUPS: [G; 5] = [G::P1, G::P2, G::P4, G::P3, G::P6];
const CI_PER_GROUP: usize = 50;
const CI_TEST_PER_GROUP: usize = 100;
/// Epoch cap that keeps training inside the CI budget on one core.
const CI_EPOCHS: usize = 55;

fn ci_config() -> RunConfig {
    let mut cfg = RunConfig::desk();
    cfg.groups = CI_GROUPS.to_vec();
    cfg.train_per_group = CI_PER_GROUP;
    cfg.test_per_group = CI_TEST_PER_GROUP;
    cfg.policy = AugmentPolicy::All;
    cfg.train.epochs = CI_EPOCHS;
    cfg
}

struct CiRun {
    trained: Trained,
    train_minutes: f64,
    test: TestSet,
}

fn ci_run() -> &'static CiRun {
    static RUN: OnceLock<CiRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let cfg = ci_config();
        let t = Instant::now();
        let trained = train_classifier(&cfg, SEED, CI_PER_GROUP).expect("CI training");
        let train_minutes = minutes(t);
        let test = TestSet::draw(&cfg, SEED, AugmentPolicy::All).expect("CI test set");
        CiRun { trained, train_minutes, test }
    })
}

// ---------------------------------------------------------------- criteria

#[test]
fn c01_generator_self_consistency() {
    let _g = serial();
    let t = Instant::now();
    let (mut worst_defining, mut worst_absent) = (f64::INFINITY, 0.0f64);
    let mut failures = Vec::new();
    for g in G::ALL {
        let basis = generator_lattice(g, 32.0);
        let (defining, present) = (defining_profile(g), full_symmetry_set(g));
        for i in 0..5 {
            let cfg = GenConfig::default().with_seed(image_seed(SEED, "self_consistency", g, i));
            let img = augment(&synthesize(g, &cfg).unwrap(), &AugmentParams::identity(), None).unwrap();
            let s = symmetry_scores(&img, &basis).unwrap();
            let d = defining.iter().map(|x| s.get(x)).fold(1.0, f64::min);
            let a = Symmetry::ALL.iter().filter(|x| !present.contains(**x)).map(|x| s.get(*x)).fold(0.0, f64::max);
            if d < 0.85 || a >= 0.6 {
                failures.push(format!("{g} #{i}: defining {d:.3}, absent {a:.3}"));
            }
            worst_defining = worst_defining.min(d);
            worst_absent = worst_absent.max(a);
        }
    }
    let m = minutes(t);
    let pass = verdict(
        "C1",
        "generator self-consistency (17 groups x 5 seeds)",
        failures.is_empty() && m < 5.0,
        format!("min defining {worst_defining:.3} (>= 0.85), max absent {worst_absent:.3} (< 0.60), {m:.1} min (< 5) {failures:?}"),
    );
    assert!(pass);
}

#[test]
fn c02_umethod_accuracy() {
    let _g = serial();
    let t = Instant::now();
    let cfg = RunConfig::desk();
    let (plain, _) = umethod_confusion(&cfg, SEED, 20, AugmentPolicy::None).unwrap();
    let (augmented, _) = umethod_confusion(&cfg, SEED, 20, AugmentPolicy::All).unwrap();
    let m = minutes(t);
    let (a, b) = (plain.accuracy(), augmented.accuracy());
    let pass = verdict(
        "C2",
        "U-Method accuracy (20 per group)",
        a >= 0.95 && b >= 0.85 && m < 15.0,
        format!("un-augmented {a:.3} (>= 0.95), augmented {b:.3} (>= 0.85), {m:.1} min (< 15)"),
    );
    assert!(pass);
}

#[test]
fn c03_cnn_ci_variant() {
    let _g = serial();
    let run = ci_run();
    let t = Instant::now();
    let m = confusion(&run.trained.model, &run.test, 50).unwrap();
    let total = run.train_minutes + minutes(t);
    let r = Report::new("ci", "cnn", m);
    let last = run.trained.history.epochs.last().unwrap();
    let pass = verdict(
        "C3",
        "CNN desk training, CI variant (64 px, 5 groups, 50 per group)",
        r.accuracy >= 0.80 && total <= 20.0,
        format!(
            "test accuracy {:.3} +/- {:.3} (>= 0.80), {total:.1} min (<= 20), {} epochs, final loss {:.3}, train accuracy {:.3}",
            r.accuracy,
            r.group_std,
            run.trained.history.epochs.len(),
            last.loss,
            last.train_acc
        ),
    );
    assert!(pass);
}

#[test]
#[ignore = "paper-exact network on 17 groups; budget is four hours"]
fn c03_cnn_paper_exact() {
    let _g = serial();
    let t = Instant::now();
    let mut cfg = RunConfig::paper_exact();
    assert_eq!(cfg.model, ModelConfig::paper_exact());
    cfg.train.epochs = 18;
    let trained = train_classifier(&cfg, SEED, 75).unwrap();
    let test = TestSet::draw(&cfg, SEED, AugmentPolicy::All).unwrap();
    let r = Report::new("paper_exact", "cnn", confusion(&trained.model, &test, 25).unwrap());
    let m = minutes(t);
    let pass = verdict(
        "C3",
        "CNN desk training, paper-exact (128 px, 75 per group)",
        r.accuracy >= 0.75 && m <= 240.0,
        format!("test accuracy {:.3} +/- {:.3} (>= 0.75), {m:.1} min (<= 240)", r.accuracy, r.group_std),
    );
    assert!(pass);
}

#[test]
fn c04_gradient_correctness() {
    let _g = serial();
    let (n32, n64) = (check_network::<f32>(100, SEED).unwrap(), check_network::<f64>(100, SEED).unwrap());
    let (l32, l64) = (check_layers::<f32>(100, SEED).unwrap(), check_layers::<f64>(100, SEED).unwrap());
    let worst32 = n32.worst().max(l32.worst());
    let worst64 = n64.worst().max(l64.worst());
    let pass = verdict(
        "C4",
        "gradient correctness (100 random shapes per check)",
        worst32 < 1e-3 && worst64 < 1e-6,
        format!(
            "32-bit max rel err {worst32:.2e} (< 1e-3), 64-bit {worst64:.2e} (< 1e-6), skipped at kinks {:.3}",
            n32.skipped_fraction().max(n64.skipped_fraction())
        ),
    );
    assert!(pass);
}

#[test]
fn c05_fourier_baseline_near_chance() {
    let _g = serial();
    let t = Instant::now();
    let mut cfg = RunConfig::desk();
    cfg.train_per_group = 100;
    cfg.test_per_group = 30;
    cfg.policy = AugmentPolicy::All;
    let acc = fourier_baseline(&cfg, SEED).unwrap().accuracy();
    let m = minutes(t);
    let pass = verdict(
        "C5",
        "Fourier + AVR + SVM on augmented data (100 per group)",
        (0.04..=0.15).contains(&acc) && m < 30.0,
        format!("accuracy {acc:.3} (in [0.04, 0.15]), {m:.1} min (< 30)"),
    );
    assert!(pass);
}

#[test]
fn c06_embedding_svm_tracks_network() {
    let _g = serial();
    let run = ci_run();
    let (cnn, svm) = embedding_baseline(&ci_config(), SEED, &run.trained.model).unwrap();
    let gap = (cnn.accuracy - svm.accuracy).abs();
    let pass = verdict(
        "C6",
        "SVM on network logits vs network softmax",
        gap <= 0.05,
        format!("network {:.3}, logit SVM {:.3}, gap {gap:.3} (<= 0.05)", cnn.accuracy, svm.accuracy),
    );
    assert!(pass);
}

#[test]
fn c07_patch_breaks_half_turn() {
    let _g = serial();
    let cfg = RunConfig::desk();
    let points = patch_p2_curve(&cfg, SEED, None).unwrap();
    let r2: Vec<f64> = points.iter().map(|p| p.mean_r2).collect();
    let monotone = r2.windows(2).all(|w| w[1] <= w[0] + 0.02);
    let crossing = points.iter().find(|p| p.umethod_p1 > p.umethod_p2).map(|p| p.side);
    let curve: Vec<String> = points
        .iter()
        .map(|p| format!("{}:{:.2}/{:.2}/{:.2}", p.side, p.mean_r2, p.umethod_p2, p.umethod_p1))
        .collect();
    let pass = verdict(
        "C7",
        "patched P2 (side: mean R2 / P2 / P1)",
        monotone && crossing.is_some() && points[0].n > 0,
        format!("R2 non-increasing within 0.02: {monotone}; P1 overtakes P2 at side {crossing:?}; n {}; {}", points[0].n, curve.join(" ")),
    );
    assert!(pass);
}

#[test]
fn c08_scale_sweep_and_reflection() {
    let _g = serial();
    let run = ci_run();
    let cfg = ci_config();
    let sweep = scale_sweep_reports(&cfg, SEED, &run.trained.model).unwrap();
    let at = |c: f64| sweep.iter().find(|(x, _)| *x == c).map(|(_, r)| r.accuracy).unwrap();
    let in_range: Vec<f64> = sweep.iter().filter(|(c, _)| (4.0..=8.0).contains(c)).map(|(_, r)| r.accuracy).collect();
    let mean = in_range.iter().sum::<f64>() / in_range.len() as f64;
    let drop = mean - at(2.0);

    // same seeds, so translations, rotations and scales match the `all` run draw for draw
    let src = sources(&cfg.groups, CI_PER_GROUP, "train", SEED, &cfg.gen).unwrap();
    let reflected = train_on(&cfg, SEED, &src, AugmentPolicy::Reflection).unwrap();
    let base = confusion(&run.trained.model, &run.test, 50).unwrap().accuracy();
    let refl = confusion(&reflected.model, &run.test, 50).unwrap().accuracy();
    let change = (refl - base).abs();

    let curve: Vec<String> = sweep.iter().map(|(c, r)| format!("{c}:{:.3}", r.accuracy)).collect();
    let pass = verdict(
        "C8",
        "scale sweep and reflection",
        drop >= 0.20 && change <= 0.02,
        format!(
            "2-cycle drop {drop:.3} vs in-range mean {mean:.3} (>= 0.20) [{}]; reflection-trained {refl:.3} vs {base:.3}, change {change:.3} (<= 0.02)",
            curve.join(" ")
        ),
    );
    assert!(pass);
}

#[test]
fn c09_largest_confusion_is_hierarchy_related() {
    let _g = serial();
    let mut cfg = RunConfig::desk();
    cfg.train.epochs = 30;
    assert!(cfg.train_per_group <= 25);
    let trained = train_classifier(&cfg, SEED, cfg.train_per_group).unwrap();
    let test = TestSet::draw(&cfg, SEED, cfg.policy).unwrap();
    let r = Report::new("small", "cnn", confusion(&trained.model, &test, 50).unwrap());
    let (up, down) = r.confusion.hierarchy_error_mass();
    let worst = r.largest_confusion();
    let pass = verdict(
        "C9",
        "largest confusion at 25 per group",
        worst.is_some_and(|w| w.3),
        format!(
            "accuracy {:.3}; largest {:?}; error mass towards supergroups {up}, towards subgroups {down}",
            r.accuracy,
            worst.map(|(t, p, c, rel)| format!("{t}->{p} x{c} related={rel}"))
        ),
    );
    assert!(pass);
}

fn escher(args: &[&str]) {
    let o = Command::new(env!("CARGO_BIN_EXE_escher")).args(args).output().unwrap();
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
}

fn pipeline(dir: &std::path::Path) -> RunManifest {
    let cfg = {
        let mut c = RunConfig::desk();
        c.gen.image_size = 128;
        c.groups = vec![G::P1, G::P4];
        c.sweep_counts = vec![3];
        c.test_per_group = 3;
        c.train.epochs = 2;
        c.train.batch_size = 3;
        c
    };
    let cfg_path = dir.join("config.json");
    std::fs::write(&cfg_path, serde_json::to_vec(&cfg).unwrap()).unwrap();
    let c = cfg_path.to_str().unwrap();
    let data = dir.join("data");
    let run = dir.join("run");
    escher(&["--config", c, "--seed", "5", "--out", data.to_str().unwrap(), "--policy", "all", "gen", "--per-group", "2"]);
    escher(&["--config", c, "--seed", "5", "--out", run.to_str().unwrap(), "experiment", "data_sweep"]);
    let mut all = Vec::new();
    for sub in [&data, &run] {
        let m: RunManifest = serde_json::from_slice(&std::fs::read(sub.join("manifest.json")).unwrap()).unwrap();
        all.extend(m.artifacts.into_iter().map(|mut a| {
            a.path = format!("{}/{}", sub.file_name().unwrap().to_string_lossy(), a.path);
            a
        }));
    }
    RunManifest { command: "pipeline".into(), seed: 5, config: serde_json::Value::Null, artifacts: all }
}

#[test]
fn c10_rerun_is_byte_identical() {
    let _g = serial();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (ma, mb) = (pipeline(a.path()), pipeline(b.path()));
    let has = |suffix: &str| ma.artifacts.iter().any(|x| x.path.ends_with(suffix));
    let kinds = has("manifest.jsonl") && has(".ckpt") && has("_confusion.csv") && has("data_sweep.csv");
    let pass = verdict(
        "C10",
        "determinism",
        ma == mb && kinds,
        format!("{} artifacts compared by SHA-256, identical: {}", ma.artifacts.len(), ma == mb),
    );
    assert!(pass);
}
