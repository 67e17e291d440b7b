//! The experiments, each fully described by a serializable [`ExperimentSpec`].

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use escher_baselines::avr::{avr_rank, project, select_top};
use escher_baselines::fourier::fourier_batch;
use escher_baselines::normalize::MinMax;
use escher_baselines::svm::svm_train;
use escher_core::augment::{AugmentPolicy, DEFAULT_CROP};
use escher_core::group::{generator_lattice, Symmetry, WallpaperGroup};
use escher_core::metrics::ConfusionMatrix;
use escher_core::umethod::{analyze, UMethodResult};
use escher_core::Error as CoreError;
use escher_net::checkpoint;
use escher_net::train::{embeddings, predict_labels, History};
use escher_net::EscherNet;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::data::{draw_params, sources, view, views, Source};
use crate::error::{HarnessError, Result};
use crate::models::{confusion, train_classifier, train_on, TestSet};
use crate::patch::{apply_patch, patch_site, rescale_params, MIN_CLEARANCE};
use crate::report::{write_file, write_report, Report, Table};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    DataSweep,
    PatchP2,
    ScaleSweep,
    ExpandedTransforms,
    UmethodEval,
    BaselineEval,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        Self::DataSweep,
        Self::PatchP2,
        Self::ScaleSweep,
        Self::ExpandedTransforms,
        Self::UmethodEval,
        Self::BaselineEval,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::DataSweep => "data_sweep",
            Self::PatchP2 => "patch_p2",
            Self::ScaleSweep => "scale_sweep",
            Self::ExpandedTransforms => "expanded_transforms",
            Self::UmethodEval => "umethod_eval",
            Self::BaselineEval => "baseline_eval",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|k| k.name() == key)
            .ok_or_else(|| HarnessError::Usage(format!("unknown experiment {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub config: RunConfig,
    /// Checkpoint to evaluate instead of training one, where the experiment uses a network.
    #[serde(default)]
    pub model: Option<PathBuf>,
}

/// Everything an experiment produces, before it is written out.
#[derive(Default)]
pub struct ExperimentOutput {
    pub reports: Vec<Report>,
    pub tables: Vec<Table>,
    pub models: Vec<(String, EscherNet<f32>)>,
    pub histories: Vec<(String, History)>,
    /// Extra files: relative path and contents.
    pub files: Vec<(String, Vec<u8>)>,
}

impl ExperimentOutput {
    pub fn report(&self, name: &str) -> Option<&Report> {
        self.reports.iter().find(|r| r.name == name)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// Writes reports under `reports/`, tables as `<name>.csv`, checkpoints
    /// under `models/` and histories as `models/<name>_history.csv`.
    pub fn write(&self, out: &Path) -> Result<()> {
        for r in &self.reports {
            write_report(r, &out.join("reports"))?;
        }
        for t in &self.tables {
            write_file(&out.join(format!("{}.csv", t.name)), &t.to_csv()?)?;
        }
        for (name, m) in &self.models {
            write_file(&out.join("models").join(format!("{name}.ckpt")), &checkpoint::encode(m))?;
        }
        for (name, h) in &self.histories {
            let p = out.join("models").join(format!("{name}_history.csv"));
            if let Some(dir) = p.parent() {
                std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
            }
            h.write_csv(&p)?;
        }
        for (rel, bytes) in &self.files {
            write_file(&out.join(rel), bytes)?;
        }
        Ok(())
    }
}

pub fn run(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    spec.config.validate()?;
    match spec.kind {
        ExperimentKind::DataSweep => data_sweep(&spec.config, spec.seed),
        ExperimentKind::PatchP2 => patch_p2(&spec.config, spec.seed, load_model(spec)?.as_ref()),
        ExperimentKind::ScaleSweep => scale_sweep(&spec.config, spec.seed, load_model(spec)?),
        ExperimentKind::ExpandedTransforms => expanded_transforms(&spec.config, spec.seed),
        ExperimentKind::UmethodEval => umethod_eval(&spec.config, spec.seed),
        ExperimentKind::BaselineEval => baseline_eval(&spec.config, spec.seed, load_model(spec)?),
    }
}

fn load_model(spec: &ExperimentSpec) -> Result<Option<EscherNet<f32>>> {
    match &spec.model {
        None => Ok(None),
        Some(p) => {
            let m: EscherNet<f32> = checkpoint::load(p)?;
            if m.cfg != spec.config.model {
                return Err(HarnessError::Usage(format!(
                    "checkpoint architecture {:?} differs from the configured {:?}",
                    m.cfg, spec.config.model
                )));
            }
            Ok(Some(m))
        }
    }
}

fn fmt_f(v: f64) -> String {
    format!("{v:.6}")
}

fn cnn_report(name: &str, model: &EscherNet<f32>, test: &TestSet, cfg: &RunConfig) -> Result<Report> {
    Ok(Report::new(name, "cnn", confusion(model, test, cfg.eval_batch)?))
}

/// One network per training-set size, all tested on the same views.
pub fn data_sweep(cfg: &RunConfig, seed: u64) -> Result<ExperimentOutput> {
    let test = TestSet::draw(cfg, seed, cfg.policy)?;
    let mut out = ExperimentOutput::default();
    let mut table = Table::new(
        "data_sweep",
        &["per_group", "accuracy", "group_mean", "group_std", "final_loss", "epochs", "worst_truth", "worst_predicted", "worst_related"],
    );
    for &n in &cfg.sweep_counts {
        let t = train_classifier(cfg, seed, n)?;
        let name = format!("sweep_{n}");
        let r = cnn_report(&name, &t.model, &test, cfg)?.with_meta("per_group", n);
        let worst = r.largest_confusion();
        table.push(vec![
            n.to_string(),
            fmt_f(r.accuracy),
            fmt_f(r.group_mean),
            fmt_f(r.group_std),
            t.history.final_loss().map(fmt_f).unwrap_or_default(),
            t.history.epochs.len().to_string(),
            worst.map(|w| w.0.name().to_string()).unwrap_or_default(),
            worst.map(|w| w.1.name().to_string()).unwrap_or_default(),
            worst.map(|w| w.3.to_string()).unwrap_or_default(),
        ]);
        out.reports.push(r);
        out.histories.push((name.clone(), t.history));
        out.models.push((name, t.model));
    }
    out.tables.push(table);
    Ok(out)
}

/// Per-size outcome of the patch experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchPoint {
    pub side: usize,
    pub n: usize,
    pub umethod_p2: f64,
    pub umethod_p1: f64,
    pub mean_r2: f64,
    pub cnn_p2: Option<f64>,
    pub cnn_p1: Option<f64>,
}

fn analyze_or_p1(img: &escher_core::image::PatternImage) -> Result<(WallpaperGroup, Option<UMethodResult>)> {
    match analyze(img) {
        Ok(r) => Ok((r.result.group, Some(r))),
        // a pattern without a detectable lattice shows no symmetry beyond translation
        Err(CoreError::LatticeNotFound(_)) => Ok((WallpaperGroup::P1, None)),
        Err(e) => Err(e.into()),
    }
}

/// Patched P2 curves. Images misclassified without a patch are dropped
/// per classifier before the curves are computed.
pub fn patch_p2_curve(cfg: &RunConfig, seed: u64, model: Option<&EscherNet<f32>>) -> Result<Vec<PatchPoint>> {
    let g = WallpaperGroup::P2;
    let basis = generator_lattice(g, cfg.gen.lattice_size as f64);
    let (offset, clear) = patch_site(&basis);
    if clear < MIN_CLEARANCE {
        return Err(HarnessError::Data(format!("no patch site {MIN_CLEARANCE} px from the half-turn centres")));
    }
    let src = sources(&[g], cfg.patch_images, "patch", seed, &cfg.gen)?;
    let rescale = rescale_params(cfg.gen.lattice_size as f64);
    let mut points = Vec::new();
    let (mut keep_u, mut keep_c): (Vec<bool>, Vec<bool>) = (Vec::new(), Vec::new());
    for &side in &cfg.patch_sizes {
        let patched: Vec<Source> = src
            .iter()
            .map(|s| {
                let fill = s.image.mean() as f32;
                Ok(Source { image: apply_patch(&s.image, &basis, offset, side, fill)?, ..s.clone() })
            })
            .collect::<Result<_>>()?;
        let crops = patched
            .par_iter()
            .map(|s| view(s, &rescale, &cfg.gen, DEFAULT_CROP))
            .collect::<Result<Vec<_>>>()?;
        let um = crops.par_iter().map(analyze_or_p1).collect::<Result<Vec<_>>>()?;
        if keep_u.is_empty() {
            keep_u = um.iter().map(|(p, _)| *p == g).collect();
        }
        let cnn = match model {
            Some(m) => {
                let imgs = patched
                    .par_iter()
                    .map(|s| view(s, &rescale, &cfg.gen, m.cfg.input))
                    .collect::<Result<Vec<_>>>()?;
                let data = crate::data::dataset(&patched, &imgs, m.cfg.input)?;
                let pred = predict_labels(m, &data, cfg.eval_batch)?;
                if keep_c.is_empty() {
                    keep_c = pred.iter().map(|&p| p == g.index()).collect();
                }
                Some(pred)
            }
            None => None,
        };
        let kept_u: Vec<&(WallpaperGroup, Option<UMethodResult>)> =
            um.iter().zip(&keep_u).filter(|(_, &k)| k).map(|(r, _)| r).collect();
        let frac = |want: WallpaperGroup| kept_u.iter().filter(|(p, _)| *p == want).count() as f64 / kept_u.len().max(1) as f64;
        let r2: Vec<f64> = kept_u.iter().filter_map(|(_, r)| r.as_ref().map(|r| r.scores.get(Symmetry::R2))).collect();
        let (cnn_p2, cnn_p1) = match &cnn {
            Some(pred) => {
                let kept: Vec<usize> = pred.iter().zip(&keep_c).filter(|(_, &k)| k).map(|(p, _)| *p).collect();
                let f = |want: WallpaperGroup| kept.iter().filter(|&&p| p == want.index()).count() as f64 / kept.len().max(1) as f64;
                (Some(f(WallpaperGroup::P2)), Some(f(WallpaperGroup::P1)))
            }
            None => (None, None),
        };
        points.push(PatchPoint {
            side,
            n: kept_u.len(),
            umethod_p2: frac(WallpaperGroup::P2),
            umethod_p1: frac(WallpaperGroup::P1),
            mean_r2: r2.iter().sum::<f64>() / r2.len().max(1) as f64,
            cnn_p2,
            cnn_p1,
        });
    }
    Ok(points)
}

pub fn patch_p2(cfg: &RunConfig, seed: u64, model: Option<&EscherNet<f32>>) -> Result<ExperimentOutput> {
    let points = patch_p2_curve(cfg, seed, model)?;
    let mut table = Table::new("patch_p2", &["side", "n", "umethod_p2", "umethod_p1", "mean_r2", "cnn_p2", "cnn_p1"]);
    for p in &points {
        table.push(vec![
            p.side.to_string(),
            p.n.to_string(),
            fmt_f(p.umethod_p2),
            fmt_f(p.umethod_p1),
            fmt_f(p.mean_r2),
            p.cnn_p2.map(fmt_f).unwrap_or_default(),
            p.cnn_p1.map(fmt_f).unwrap_or_default(),
        ]);
    }
    Ok(ExperimentOutput { tables: vec![table], ..Default::default() })
}

/// Test views showing exactly `cycles` cells across the crop, otherwise
/// augmented as under the `all` policy.
pub fn cycles_test_set(cfg: &RunConfig, seed: u64, src: Vec<Source>, cycles: f64) -> Result<TestSet> {
    let scale = cycles * cfg.gen.lattice_size as f64 / DEFAULT_CROP as f64;
    TestSet::with_params(cfg, src, cfg.model.input, |s| {
        let mut p = draw_params(AugmentPolicy::All, seed, s, 0);
        p.scale = scale;
        p
    })
}

/// Accuracy per visible cycle count for one network.
pub fn scale_sweep_reports(cfg: &RunConfig, seed: u64, model: &EscherNet<f32>) -> Result<Vec<(f64, Report)>> {
    let src = sources(&cfg.groups, cfg.test_per_group, "test", seed, &cfg.gen)?;
    cfg.scale_cycles
        .iter()
        .map(|&c| {
            let test = cycles_test_set(cfg, seed, src.clone(), c)?;
            Ok((c, cnn_report(&format!("cycles_{c}"), model, &test, cfg)?.with_meta("cycles", c)))
        })
        .collect()
}

pub fn scale_sweep(cfg: &RunConfig, seed: u64, model: Option<EscherNet<f32>>) -> Result<ExperimentOutput> {
    let mut out = ExperimentOutput::default();
    let model = match model {
        Some(m) => m,
        None => {
            let t = train_classifier(cfg, seed, cfg.train_per_group)?;
            out.histories.push(("scale_sweep".into(), t.history));
            out.models.push(("scale_sweep".into(), t.model.clone()));
            t.model
        }
    };
    let mut table = Table::new("scale_sweep", &["cycles", "accuracy", "group_mean", "group_std"]);
    for (c, r) in scale_sweep_reports(cfg, seed, &model)? {
        table.push(vec![c.to_string(), fmt_f(r.accuracy), fmt_f(r.group_mean), fmt_f(r.group_std)]);
        out.reports.push(r);
    }
    out.tables.push(table);
    Ok(out)
}

pub const TRANSFORM_POLICIES: [AugmentPolicy; 3] = [AugmentPolicy::All, AugmentPolicy::Reflection, AugmentPolicy::ExpandedScale];

/// One network per augmentation policy, each tested under every policy.
/// Training uses the same seed throughout, so policies sharing a sampling
/// prefix see identical translations, rotations and scales.
pub fn expanded_transforms(cfg: &RunConfig, seed: u64) -> Result<ExperimentOutput> {
    let src = sources(&cfg.groups, cfg.train_per_group, "train", seed, &cfg.gen)?;
    let test_src = sources(&cfg.groups, cfg.test_per_group, "test", seed, &cfg.gen)?;
    let tests = TRANSFORM_POLICIES
        .iter()
        .map(|&p| TestSet::with_params(cfg, test_src.clone(), cfg.model.input, |s| draw_params(p, seed, s, 0)))
        .collect::<Result<Vec<_>>>()?;
    let mut out = ExperimentOutput::default();
    let mut table = Table::new("expanded_transforms", &["train_policy", "test_policy", "accuracy", "group_mean", "group_std"]);
    for &train_policy in &TRANSFORM_POLICIES {
        let t = train_on(cfg, seed, &src, train_policy)?;
        for (&test_policy, test) in TRANSFORM_POLICIES.iter().zip(&tests) {
            let name = format!("train_{train_policy}_test_{test_policy}");
            let r = cnn_report(&name, &t.model, test, cfg)?;
            table.push(vec![
                train_policy.to_string(),
                test_policy.to_string(),
                fmt_f(r.accuracy),
                fmt_f(r.group_mean),
                fmt_f(r.group_std),
            ]);
            out.reports.push(r);
        }
        out.histories.push((format!("train_{train_policy}"), t.history));
        out.models.push((format!("train_{train_policy}"), t.model));
    }
    out.tables.push(table);
    Ok(out)
}

/// One line of the per-image U-Method output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UMethodLine {
    pub file: String,
    pub true_group: WallpaperGroup,
    pub predicted: WallpaperGroup,
    pub margin: Option<f64>,
    pub scores: Option<[f64; 12]>,
    pub t1: Option<[f64; 2]>,
    pub t2: Option<[f64; 2]>,
}

impl UMethodLine {
    pub fn new(file: String, truth: WallpaperGroup, predicted: WallpaperGroup, r: Option<&UMethodResult>) -> Self {
        Self {
            file,
            true_group: truth,
            predicted,
            margin: r.map(|r| r.result.margin),
            scores: r.map(|r| std::array::from_fn(|i| r.scores.get(Symmetry::ALL[i]))),
            t1: r.map(|r| r.scores.basis.t1),
            t2: r.map(|r| r.scores.basis.t2),
        }
    }
}

/// U-Method on 128 px views of `per_group` sources of every group.
pub fn umethod_confusion(cfg: &RunConfig, seed: u64, per_group: usize, policy: AugmentPolicy) -> Result<(ConfusionMatrix, Vec<UMethodLine>)> {
    let src = sources(&cfg.groups, per_group, "umethod", seed, &cfg.gen)?;
    let crops = views(&src, policy, seed, 0, &cfg.gen, DEFAULT_CROP)?;
    let results = crops.par_iter().map(analyze_or_p1).collect::<Result<Vec<_>>>()?;
    let mut m = ConfusionMatrix::new();
    let mut lines = Vec::new();
    for (s, (pred, r)) in src.iter().zip(&results) {
        match r {
            Some(r) => m.add_with_margin(s.group, *pred, r.result.margin),
            None => m.add(s.group, *pred),
        }
        let file = format!("umethod_{}_{:05}.png", s.group.name().to_ascii_lowercase(), s.index);
        lines.push(UMethodLine::new(file, s.group, *pred, r.as_ref()));
    }
    Ok((m, lines))
}

pub fn jsonl<T: Serialize>(items: &[T]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for it in items {
        serde_json::to_writer(&mut out, it)?;
        out.push(b'\n');
    }
    Ok(out)
}

pub fn umethod_eval(cfg: &RunConfig, seed: u64) -> Result<ExperimentOutput> {
    let (m, lines) = umethod_confusion(cfg, seed, cfg.test_per_group, cfg.policy)?;
    let r = Report::new(format!("umethod_{}", cfg.policy), "umethod", m).with_meta("policy", cfg.policy);
    Ok(ExperimentOutput { reports: vec![r], files: vec![("umethod.jsonl".into(), jsonl(&lines)?)], ..Default::default() })
}

/// Fourier features of training views ranked by AVR, top columns scaled to
/// `[0, 1]`, then the one-vs-one SVM; returns the test confusion matrix.
pub fn fourier_baseline(cfg: &RunConfig, seed: u64) -> Result<ConfusionMatrix> {
    let train_src = sources(&cfg.groups, cfg.train_per_group, "train", seed, &cfg.gen)?;
    let test_src = sources(&cfg.groups, cfg.test_per_group, "test", seed, &cfg.gen)?;
    let train_x = fourier_batch(&views(&train_src, cfg.policy, seed, 0, &cfg.gen, DEFAULT_CROP)?)?;
    let test_x = fourier_batch(&views(&test_src, cfg.policy, seed, 0, &cfg.gen, DEFAULT_CROP)?)?;
    let labels: Vec<usize> = train_src.iter().map(|s| s.group.index()).collect();
    let cols = select_top(&avr_rank(&train_x, &labels)?, cfg.avr_select);
    let (train_x, test_x) = (project(&train_x, &cols), project(&test_x, &cols));
    let scaler = MinMax::fit(&train_x)?;
    let svm = svm_train(&scaler.apply_all(&train_x), &labels, &cfg.svm)?;
    let pred = svm.predict_all(&scaler.apply_all(&test_x));
    Ok(confusion_of(&test_src, &pred))
}

fn confusion_of(src: &[Source], pred: &[usize]) -> ConfusionMatrix {
    let mut m = ConfusionMatrix::new();
    for (s, &p) in src.iter().zip(pred) {
        m.add(s.group, WallpaperGroup::ALL[p]);
    }
    m
}

/// Network accuracy next to an SVM trained on its logits, both on the same test views.
pub fn embedding_baseline(cfg: &RunConfig, seed: u64, model: &EscherNet<f32>) -> Result<(Report, Report)> {
    let train_src = sources(&cfg.groups, cfg.train_per_group, "train", seed, &cfg.gen)?;
    let train_imgs = views(&train_src, cfg.policy, seed, 0, &cfg.gen, model.cfg.input)?;
    let train_data = crate::data::dataset(&train_src, &train_imgs, model.cfg.input)?;
    let test = TestSet::draw(cfg, seed, cfg.policy)?;
    let labels: Vec<usize> = train_src.iter().map(|s| s.group.index()).collect();
    let svm = svm_train(&embeddings(model, &train_data, cfg.eval_batch)?, &labels, &cfg.svm)?;
    let pred = svm.predict_all(&embeddings(model, &test.data, cfg.eval_batch)?);
    let cnn = cnn_report("cnn", model, &test, cfg)?;
    Ok((cnn, Report::new("embedding_svm", "embedding_svm", confusion_of(&test.sources, &pred))))
}

pub fn baseline_eval(cfg: &RunConfig, seed: u64, model: Option<EscherNet<f32>>) -> Result<ExperimentOutput> {
    let mut out = ExperimentOutput::default();
    out.reports.push(Report::new("fourier_svm", "fourier_svm", fourier_baseline(cfg, seed)?).with_meta("policy", cfg.policy));
    let model = match model {
        Some(m) => m,
        None => {
            let t = train_classifier(cfg, seed, cfg.train_per_group)?;
            out.histories.push(("baseline".into(), t.history));
            out.models.push(("baseline".into(), t.model.clone()));
            t.model
        }
    };
    let (cnn, svm) = embedding_baseline(cfg, seed, &model)?;
    out.reports.push(cnn);
    out.reports.push(svm);
    Ok(out)
}
