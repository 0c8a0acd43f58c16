//! Optimisation, cross-validation, metrics, ROC analysis and the
//! cross-modality ablation.

pub mod cv;
pub mod metrics;
pub mod optim;
pub mod protocol;
pub mod roc;
pub mod trainer;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cv::{
    ablate_cross_modality, cross_validate, fit_model, grid_search, run_fold, Fitted, AblationArm, AblationReport, CvResult, FoldOutcome,
    GridPoint, GridSpec, MeanMetrics, WITHOUT_CROSS_MODALITY, WITH_CROSS_MODALITY,
};
pub use metrics::{argmax_rows, evaluate, f2_score, phq9_to_class, Averages, ClassMetrics, MetricsReport};
pub use optim::{adam_step, cross_entropy_loss, AdamConfig, AdamState};
pub use protocol::{
    augment_sample, augment_shuffle_responses, augmented_id, kfold_split, source_subject, validation_split, Augmented,
    FoldSplit,
};
pub use roc::{binary_roc, roc_auc_ovr, BinaryRoc, ClassRoc, RocPoint};
pub use trainer::{train, EpochRecord, History};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Binary,
    #[default]
    ThreeClass,
}

impl Task {
    pub fn n_classes(self) -> usize {
        match self {
            Task::Binary => 2,
            Task::ThreeClass => 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub k_folds: usize,
    pub task: Task,
    /// Share of each training fold held out for early stopping.
    pub validation_fraction: f64,
    /// Shuffled copies added per training subject; zero disables.
    pub augment_times: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            max_epochs: 500,
            patience: 50,
            batch_size: 16,
            seed: 0,
            k_folds: 10,
            task: Task::ThreeClass,
            validation_fraction: 0.1,
            augment_times: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if self.max_epochs == 0 || self.batch_size == 0 || self.k_folds == 0 {
            return Err(Error::Config("max_epochs, batch_size and k_folds must be positive".into()));
        }
        if self.patience > self.max_epochs {
            return Err(Error::Config(format!(
                "patience {} exceeds max_epochs {}",
                self.patience, self.max_epochs
            )));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::Config("validation_fraction must lie in [0, 1)".into()));
        }
        Ok(())
    }
}
