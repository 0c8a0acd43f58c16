//! Experiment orchestration: run directories, cross-validated training,
//! the ablation, checkpoint evaluation and feature export.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::extract::{extract_dataset, write_features, Dataset, FeatureConfig};
use crate::io::manifest::{load_manifest, DatasetManifest};
use crate::io::report::{emit_report, roc_csv, roc_svg, ABLATION_FILE, RESULTS_FILE, ROC_FILE, ROC_SVG};
use crate::model::checkpoint::{load_checkpoint, save_checkpoint};
use crate::model::{InputSpec, MffbmConfig, ModalitySubset};
use crate::train::{
    ablate_cross_modality, argmax_rows, cross_validate, evaluate, fit_model, grid_search, kfold_split,
    AblationReport, CvResult, GridPoint, GridSpec, MetricsReport, TrainConfig,
};

pub const CONFIG_FILE: &str = "config.json";
pub const SPLITS_FILE: &str = "splits.json";
pub const GRID_FILE: &str = "grid.json";
pub const MODEL_FILE: &str = "model.json";
pub const HISTORY_FILE: &str = "history.json";
pub const EVALUATION_FILE: &str = "evaluation.json";
pub const FAILED_MARKER: &str = "FAILED";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// `inputs` and `n_classes` are filled in from the data and task.
    pub model: MffbmConfig,
    pub train: TrainConfig,
    pub features: FeatureConfig,
    pub modality: ModalitySubset,
    /// Padded sequence length; defaults to the longest sequence per modality.
    pub max_len: Option<usize>,
    pub parallel_folds: bool,
    /// Optional sweep; the best point by mean F2 is used for the final run.
    pub grid: Option<GridSpec>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Model config with inputs sized from `data`.
    pub fn resolve_model(&self, data: &Dataset) -> Result<MffbmConfig> {
        let mut m = self.model.clone();
        m.n_classes = self.train.task.n_classes();
        m.inputs = self
            .modality
            .modalities()
            .into_iter()
            .map(|mo| {
                let width = data
                    .width(mo)
                    .ok_or_else(|| Error::Config(format!("no {mo} features extracted")))?;
                let max_len = self.max_len.unwrap_or(data.max_rows(mo)).max(m.encoder.min_len());
                Ok(InputSpec { modality: mo, width, max_len })
            })
            .collect::<Result<_>>()?;
        m.validate()?;
        Ok(m)
    }
}

/// Creates a fresh `run-<unix seconds>[-k]` directory under `out`.
pub fn create_run_dir(out: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(out)?;
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    for k in 0..10_000 {
        let name = if k == 0 { format!("run-{secs}") } else { format!("run-{secs}-{k}") };
        let dir = out.join(name);
        match std::fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e.into()),
        }
    }
    Err(Error::invalid(format!("could not allocate a run directory under {}", out.display())))
}

#[derive(Serialize)]
struct FailedMarker<'a> {
    stage: &'a str,
    kind: &'a str,
    error: String,
}

/// Runs `body`; on failure writes the `FAILED` marker into `dir` and tags
/// the error with the stage reported by the body.
fn guarded<T>(dir: &Path, body: impl FnOnce(&mut &'static str) -> Result<T>) -> Result<T> {
    let mut stage = "setup";
    body(&mut stage).map_err(|e| {
        let e = e.at_stage(stage);
        let (stage, source) = match &e {
            Error::Stage { stage, source } => (*stage, source.as_ref()),
            other => (stage, other),
        };
        let marker = FailedMarker {
            stage,
            kind: source.kind(),
            error: source.to_string(),
        };
        let _ = std::fs::write(
            dir.join(FAILED_MARKER),
            serde_json::to_string_pretty(&marker).unwrap_or_default(),
        );
        e
    })
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    std::fs::write(dir.join(name), serde_json::to_string_pretty(value)?)?;
    Ok(())
}

#[derive(Serialize)]
struct ResolvedConfig<'a> {
    manifest: &'a Path,
    experiment: &'a ExperimentConfig,
    resolved_model: &'a MffbmConfig,
}

fn prepare(manifest: &Path, cfg: &ExperimentConfig, stage: &mut &'static str) -> Result<(DatasetManifest, Dataset, MffbmConfig)> {
    *stage = "config";
    cfg.train.validate()?;
    *stage = "manifest";
    let m = load_manifest(manifest)?;
    m.require(&cfg.modality.modalities())?;
    *stage = "extract";
    let data = extract_dataset(&m, &cfg.modality.modalities(), &cfg.features, cfg.train.task)?;
    *stage = "config";
    let model = cfg.resolve_model(&data)?;
    Ok((m, data, model))
}

#[derive(Clone, Debug)]
pub struct TrainRun {
    pub dir: PathBuf,
    pub cv: CvResult,
    pub grid: Option<Vec<GridPoint>>,
}

/// Cross-validates, fits a final model on every subject, saves it and emits
/// the report, all under a fresh run directory.
pub fn run_experiment(manifest: &Path, cfg: &ExperimentConfig, out: &Path) -> Result<TrainRun> {
    let dir = create_run_dir(out)?;
    let (cv, grid) = guarded(&dir, |stage| {
        let (_, data, mut model_cfg) = prepare(manifest, cfg, stage)?;
        write_json(&dir, CONFIG_FILE, &ResolvedConfig {
            manifest,
            experiment: cfg,
            resolved_model: &model_cfg,
        })?;
        *stage = "split";
        let splits = kfold_split(&data.ids(), &data.labels(), cfg.train.k_folds, cfg.train.seed)?;
        write_json(&dir, SPLITS_FILE, &splits)?;
        let mut grid_points = None;
        if let Some(g) = &cfg.grid {
            *stage = "grid";
            let points = grid_search(&data.samples, &splits, &model_cfg, g, &cfg.train, cfg.parallel_folds)?;
            let best = points
                .iter()
                .fold(None::<&GridPoint>, |b, p| match b {
                    Some(b) if b.mean.f2 >= p.mean.f2 => Some(b),
                    _ => Some(p),
                })
                .expect("nonempty grid");
            model_cfg.phi = best.phi;
            model_cfg.a = best.a;
            model_cfg.phi_i = MffbmConfig::uniform_filters(best.k);
            model_cfg.n_layers = best.n_layers;
            write_json(&dir, GRID_FILE, &points)?;
            write_json(&dir, CONFIG_FILE, &ResolvedConfig {
                manifest,
                experiment: cfg,
                resolved_model: &model_cfg,
            })?;
            grid_points = Some(points);
        }
        *stage = "train";
        let cv = cross_validate(&data.samples, &splits, &model_cfg, &cfg.train, cfg.parallel_folds)?;
        write_json(&dir, RESULTS_FILE, &cv)?;
        let all: Vec<_> = data.samples.iter().collect();
        let fitted = fit_model(&all, 0, &model_cfg, &cfg.train, &HashSet::new())?;
        save_checkpoint(&fitted.model, &dir.join(MODEL_FILE))?;
        write_json(&dir, HISTORY_FILE, &fitted.history)?;
        *stage = "report";
        emit_report(&dir)?;
        Ok((cv, grid_points))
    })?;
    Ok(TrainRun { dir, cv, grid })
}

/// Both ablation arms on shared splits, under a fresh run directory.
pub fn run_ablation(manifest: &Path, cfg: &ExperimentConfig, out: &Path) -> Result<(PathBuf, AblationReport)> {
    let dir = create_run_dir(out)?;
    let report = guarded(&dir, |stage| {
        let (_, data, model_cfg) = prepare(manifest, cfg, stage)?;
        write_json(&dir, CONFIG_FILE, &ResolvedConfig {
            manifest,
            experiment: cfg,
            resolved_model: &model_cfg,
        })?;
        *stage = "split";
        let splits = kfold_split(&data.ids(), &data.labels(), cfg.train.k_folds, cfg.train.seed)?;
        write_json(&dir, SPLITS_FILE, &splits)?;
        *stage = "ablate";
        let report = ablate_cross_modality(&data.samples, &splits, &model_cfg, &cfg.train, cfg.parallel_folds)?;
        write_json(&dir, ABLATION_FILE, &report)?;
        *stage = "report";
        emit_report(&dir)?;
        Ok(report)
    })?;
    Ok((dir, report))
}

/// Scores a saved model on every subject of a manifest. The modalities and
/// sequence geometry come from the checkpoint.
pub fn evaluate_checkpoint(
    checkpoint: &Path,
    manifest: &Path,
    cfg: &ExperimentConfig,
    out: &Path,
) -> Result<(PathBuf, MetricsReport)> {
    let dir = create_run_dir(out)?;
    let report = guarded(&dir, |stage| {
        *stage = "checkpoint";
        let model = load_checkpoint(checkpoint)?;
        *stage = "manifest";
        let m = load_manifest(manifest)?;
        let modalities = model.config().modalities();
        m.require(&modalities)?;
        *stage = "extract";
        let data = extract_dataset(&m, &modalities, &cfg.features, cfg.train.task)?;
        for spec in &model.config().inputs {
            if data.width(spec.modality) != Some(spec.width) {
                return Err(Error::Config(format!(
                    "{} features have width {:?}, model expects {}",
                    spec.modality,
                    data.width(spec.modality),
                    spec.width
                )));
            }
        }
        if model.config().n_classes != cfg.train.task.n_classes() {
            return Err(Error::Config("checkpoint class count does not match the task".into()));
        }
        *stage = "evaluate";
        let refs: Vec<_> = data.samples.iter().collect();
        let probs = model.predict_samples(&refs)?;
        let y_pred = argmax_rows(&probs);
        let report = evaluate(&data.labels(), &y_pred, Some(&probs), model.config().n_classes)?;
        write_json(&dir, EVALUATION_FILE, &report)?;
        std::fs::write(dir.join(ROC_FILE), roc_csv(&report.roc)?)?;
        std::fs::write(dir.join(ROC_SVG), roc_svg(&report.roc, "One-vs-rest ROC"))?;
        Ok(report)
    })?;
    Ok((dir, report))
}

/// Extracts features for the selected modalities into a run directory's
/// `features/` folder, with a manifest pointing at the CSVs.
pub fn run_extraction(manifest: &Path, cfg: &ExperimentConfig, out: &Path) -> Result<(PathBuf, PathBuf)> {
    let dir = create_run_dir(out)?;
    let path = guarded(&dir, |stage| {
        *stage = "manifest";
        let m = load_manifest(manifest)?;
        *stage = "extract";
        let data = extract_dataset(&m, &cfg.modality.modalities(), &cfg.features, cfg.train.task)?;
        let fdir = dir.join("features");
        write_features(&fdir, &m, &data)?;
        write_json(&dir, CONFIG_FILE, cfg)?;
        Ok(fdir.join("manifest.json"))
    })?;
    Ok((dir, path))
}
