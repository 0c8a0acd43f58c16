//! `mfgcn` command-line driver. Every command prints one JSON object on
//! stdout when it succeeds; failures print a JSON error object on stderr
//! and exit nonzero.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use mfgcn::io::{
    analyze_spectrum, emit_report, evaluate_checkpoint, make_cohort, run_ablation, run_experiment, run_extraction,
    spectrum_csv, CohortKind, ExperimentConfig, GraphFamily, SpectrumKernel, SyntheticSpec,
};
use mfgcn::model::ModalitySubset;
use mfgcn::Error;

#[derive(Parser)]
#[command(name = "mfgcn", version, about = "Multimodal graph convolution experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Experiment config (JSON); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; each run gets a fresh subdirectory.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    /// Overrides both the training and the initialisation seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = ["ensemble", "audio", "video", "gaze"])]
    modality: Option<String>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    parallel_folds: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Turn raw modality sources into per-subject feature CSVs.
    ExtractFeatures {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Cross-validate, fit a final model and write the report.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Score a saved model on a manifest.
    Evaluate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run the cross-modality ablation on shared folds.
    Ablate {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Tabulate numeric against analytic frequency responses.
    AnalyzeSpectrum {
        #[arg(long, default_value = "cycle")]
        family: String,
        #[arg(long, default_value_t = 8)]
        n: usize,
        /// Edge probability for `erdos_renyi`.
        #[arg(long)]
        p: Option<f64>,
        #[arg(long, default_value_t = 0)]
        graph_seed: u64,
        #[arg(long, default_value_t = 0.5)]
        phi: f64,
        #[arg(long, default_value_t = 0.5)]
        a: f64,
        /// Comma-separated kernel names; all kernels when omitted.
        #[arg(long, value_delimiter = ',')]
        kernels: Vec<String>,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
    /// Write a seeded synthetic cohort and its manifest.
    MakeSynthetic {
        #[arg(long, default_value = "separable")]
        kind: String,
        #[arg(long)]
        subjects: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Regenerate tables and figures for an existing run directory.
    Report { run_dir: PathBuf },
}

struct Failure {
    kind: &'static str,
    stage: &'static str,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let (stage, inner) = match &e {
            Error::Stage { stage, source } => (*stage, source.as_ref()),
            other => ("setup", other),
        };
        Failure {
            kind: inner.kind(),
            stage,
            message: inner.to_string(),
        }
    }
}

fn experiment_config(c: &Common) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p).map_err(|e| Failure::from(e.at_stage("config")))?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = c.seed {
        cfg.train.seed = seed;
        cfg.model.seed = seed;
    }
    if let Some(m) = &c.modality {
        cfg.modality = m.parse::<ModalitySubset>().map_err(|e| Failure::from(e.at_stage("config")))?;
    }
    if let Some(k) = c.folds {
        cfg.train.k_folds = k;
    }
    cfg.parallel_folds |= c.parallel_folds;
    Ok(cfg)
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn run(cmd: Command) -> Result<Value, Failure> {
    Ok(match cmd {
        Command::ExtractFeatures { manifest, common } => {
            let cfg = experiment_config(&common)?;
            let (dir, features) = run_extraction(&manifest, &cfg, &common.out)?;
            json!({"command": "extract-features", "run_dir": path_str(&dir), "manifest": path_str(&features)})
        }
        Command::Train { manifest, common } => {
            let cfg = experiment_config(&common)?;
            let r = run_experiment(&manifest, &cfg, &common.out)?;
            json!({
                "command": "train",
                "run_dir": path_str(&r.dir),
                "folds": r.cv.folds.len(),
                "mean": r.cv.mean,
            })
        }
        Command::Evaluate { manifest, checkpoint, common } => {
            let cfg = experiment_config(&common)?;
            let (dir, report) = evaluate_checkpoint(&checkpoint, &manifest, &cfg, &common.out)?;
            json!({
                "command": "evaluate",
                "run_dir": path_str(&dir),
                "accuracy": report.accuracy,
                "weighted": report.weighted,
            })
        }
        Command::Ablate { manifest, common } => {
            let cfg = experiment_config(&common)?;
            let (dir, report) = run_ablation(&manifest, &cfg, &common.out)?;
            let arms: Vec<Value> = report
                .arms
                .iter()
                .map(|a| json!({"name": a.name, "n_layers": a.n_layers, "mean": a.result.mean}))
                .collect();
            json!({"command": "ablate", "run_dir": path_str(&dir), "arms": arms})
        }
        Command::AnalyzeSpectrum { family, n, p, graph_seed, phi, a, kernels, out } => {
            let fam = GraphFamily::parse(&family, p, graph_seed).map_err(|e| Failure::from(e.at_stage("config")))?;
            let kernels = if kernels.is_empty() {
                SpectrumKernel::ALL.to_vec()
            } else {
                kernels
                    .iter()
                    .map(|k| SpectrumKernel::parse(k))
                    .collect::<mfgcn::Result<_>>()
                    .map_err(|e| Failure::from(e.at_stage("config")))?
            };
            let rows = analyze_spectrum(fam, n, &kernels, phi, a).map_err(|e| Failure::from(e.at_stage("spectrum")))?;
            let csv = spectrum_csv(&rows)?;
            std::fs::create_dir_all(&out).map_err(|e| Failure::from(Error::from(e).at_stage("write")))?;
            let path = out.join(format!("spectrum-{}-{n}.csv", fam.name()));
            std::fs::write(&path, csv).map_err(|e| Failure::from(Error::from(e).at_stage("write")))?;
            let mut max_error = serde_json::Map::new();
            for r in &rows {
                let e = max_error.entry(r.kernel.clone()).or_insert(json!(0.0));
                *e = json!(e.as_f64().unwrap_or(0.0).max(r.abs_error));
            }
            json!({"command": "analyze-spectrum", "table": path_str(&path), "rows": rows.len(), "max_abs_error": max_error})
        }
        Command::MakeSynthetic { kind, subjects, seed, out } => {
            let kind: CohortKind = kind.parse().map_err(|e: Error| Failure::from(e.at_stage("config")))?;
            let mut spec = SyntheticSpec::new(kind, seed);
            if let Some(n) = subjects {
                spec.n_subjects = n;
            }
            let cohort = make_cohort(&spec).map_err(|e| Failure::from(e.at_stage("config")))?;
            let manifest = cohort.write(&out).map_err(|e| Failure::from(e.at_stage("write")))?;
            json!({
                "command": "make-synthetic",
                "manifest": path_str(&manifest),
                "subjects": spec.n_subjects,
                "task": spec.task(),
            })
        }
        Command::Report { run_dir } => {
            let outcome = emit_report(&run_dir).map_err(|e| Failure::from(e.at_stage("report")))?;
            json!({"command": "report", "run_dir": path_str(&run_dir), "written": outcome.written, "missing": outcome.missing})
        }
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.to_string();
            eprintln!(
                "{}",
                json!({"status": "error", "kind": "usage", "stage": "arguments", "message": message.trim_end()})
            );
            return ExitCode::from(2);
        }
    };
    match run(cli.command) {
        Ok(mut v) => {
            v["status"] = json!("ok");
            println!("{v}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!(
                "{}",
                json!({"status": "error", "kind": f.kind, "stage": f.stage, "message": f.message})
            );
            ExitCode::FAILURE
        }
    }
}
