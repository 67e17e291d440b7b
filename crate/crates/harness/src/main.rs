use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use escher_core::augment::AugmentPolicy;
use escher_core::gen::{DatasetManifest, DatasetRecord, MANIFEST_FILE};
use escher_core::group::WallpaperGroup;
use escher_harness::data::{draw_params, sources, view};
use escher_harness::error::exit;
use escher_harness::experiments::{self, ExperimentOutput};
use escher_harness::manifest::write_manifest;
use escher_harness::models::{confusion, train_classifier, TestSet};
use escher_harness::report::{read_report, write_report};
use escher_harness::{ExperimentKind, ExperimentSpec, HarnessError, Preset, Report, Result, RunConfig};
use escher_net::checkpoint;

#[derive(Parser, Debug)]
#[command(name = "escher", about = "Wallpaper-group synthesis, classification and experiments")]
struct Cli {
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory; a manifest.json indexes everything written there.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// JSON run configuration; overrides the preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "desk")]
    preset: String,
    /// Comma-separated group names, e.g. P1,P2,P4.
    #[arg(long, global = true)]
    groups: Option<String>,
    #[arg(long, global = true)]
    policy: Option<String>,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Write generator images (augmented when --policy is given) and manifest.jsonl.
    Gen {
        #[arg(long, default_value = "train")]
        split: String,
        #[arg(long)]
        per_group: Option<usize>,
    },
    /// Train a network; writes model.ckpt and history.csv.
    Train {
        #[arg(long)]
        per_group: Option<usize>,
    },
    /// Evaluate a checkpoint on the test split.
    Eval {
        #[arg(long)]
        model: PathBuf,
    },
    /// Run the U-Method on generated views; writes umethod.jsonl.
    Umethod {
        #[arg(long)]
        per_group: Option<usize>,
    },
    /// Fourier and embedding SVM baselines.
    Baseline {
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Run one experiment, or replay a saved spec.json.
    Experiment {
        kind: Option<String>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        spec: Option<PathBuf>,
    },
    /// Re-emit CSV and heatmap files from a saved report JSON.
    Report {
        #[arg(long)]
        input: PathBuf,
    },
}

fn run_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::preset(cli.preset.parse::<Preset>()?),
    };
    if let Some(list) = &cli.groups {
        cfg.groups = list
            .split(',')
            .map(|s| s.trim().to_ascii_uppercase().parse::<WallpaperGroup>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| HarnessError::Usage(format!("groups: {e}")))?;
    }
    if let Some(p) = &cli.policy {
        cfg.policy = p.parse::<AugmentPolicy>()?;
    }
    if let Some(e) = cli.epochs {
        cfg.train.epochs = e;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn gen(cli: &Cli, cfg: &RunConfig, split: &str, per_group: usize) -> Result<()> {
    let src = sources(&cfg.groups, per_group, split, cli.seed, &cfg.gen)?;
    let augmented = cli.policy.is_some();
    let mut manifest = DatasetManifest::default();
    for s in &src {
        let file = format!("{split}_{}_{:05}.png", s.group.name().to_ascii_lowercase(), s.index);
        let (img, aug) = if augmented {
            let p = draw_params(cfg.policy, cli.seed, s, 0);
            (view(s, &p, &cfg.gen, p.crop)?, Some(p))
        } else {
            (s.image.clone(), None)
        };
        img.write_png(&cli.out.join(&file))?;
        manifest.records.push(DatasetRecord { file, group: s.group, seed: s.seed, split: split.into(), aug });
    }
    manifest.write(&cli.out.join(MANIFEST_FILE))?;
    Ok(())
}

fn save_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    std::fs::write(path, serde_json::to_vec_pretty(value)?).map_err(|e| HarnessError::io(path, e))
}

fn execute(cli: &Cli) -> Result<&'static str> {
    std::fs::create_dir_all(&cli.out).map_err(|e| HarnessError::io(&cli.out, e))?;
    let cfg = run_config(cli)?;
    let out = &cli.out;
    let name = match &cli.cmd {
        Cmd::Gen { split, per_group } => {
            gen(cli, &cfg, split, per_group.unwrap_or(cfg.train_per_group))?;
            "gen"
        }
        Cmd::Train { per_group } => {
            let t = train_classifier(&cfg, cli.seed, per_group.unwrap_or(cfg.train_per_group))?;
            checkpoint::save(&t.model, &out.join("model.ckpt"))?;
            t.history.write_csv(&out.join("history.csv"))?;
            if let Some(r) = t.history.epochs.last() {
                eprintln!("epoch {}: loss {:.4}, train accuracy {:.3}", r.epoch, r.loss, r.train_acc);
            }
            "train"
        }
        Cmd::Eval { model } => {
            let m = checkpoint::load(model)?;
            let test = TestSet::draw(&RunConfig { model: m.cfg, ..cfg.clone() }, cli.seed, cfg.policy)?;
            let r = Report::new("eval", "cnn", confusion(&m, &test, cfg.eval_batch)?);
            eprintln!("accuracy {:.4} (group mean {:.4} +/- {:.4})", r.accuracy, r.group_mean, r.group_std);
            write_report(&r, out)?;
            "eval"
        }
        Cmd::Umethod { per_group } => {
            let cfg = RunConfig { test_per_group: per_group.unwrap_or(cfg.test_per_group), ..cfg.clone() };
            let o = experiments::umethod_eval(&cfg, cli.seed)?;
            summarize(&o);
            o.write(out)?;
            "umethod"
        }
        Cmd::Baseline { model } => {
            let m = model.as_deref().map(checkpoint::load).transpose()?;
            let o = experiments::baseline_eval(&cfg, cli.seed, m)?;
            summarize(&o);
            o.write(out)?;
            "baseline"
        }
        Cmd::Experiment { kind, model, spec } => {
            let spec = match spec {
                Some(p) => {
                    let text = std::fs::read_to_string(p).map_err(|e| HarnessError::io(p, e))?;
                    serde_json::from_str::<ExperimentSpec>(&text)?
                }
                None => {
                    let kind = kind.as_deref().ok_or_else(|| HarnessError::Usage("experiment kind or --spec required".into()))?;
                    ExperimentSpec { kind: kind.parse::<ExperimentKind>()?, seed: cli.seed, config: cfg.clone(), model: model.clone() }
                }
            };
            save_json(&out.join("spec.json"), &spec)?;
            let o = experiments::run(&spec)?;
            summarize(&o);
            o.write(out)?;
            "experiment"
        }
        Cmd::Report { input } => {
            write_report(&read_report(input)?, out)?;
            "report"
        }
    };
    Ok(name)
}

fn summarize(o: &ExperimentOutput) {
    for r in &o.reports {
        eprintln!("{}: accuracy {:.4} (group mean {:.4} +/- {:.4})", r.name, r.accuracy, r.group_mean, r.group_std);
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let result = execute(&cli).and_then(|cmd| {
        let cfg = run_config(&cli)?;
        write_manifest(&cli.out, cmd, cli.seed, &cfg)
    });
    match result {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
