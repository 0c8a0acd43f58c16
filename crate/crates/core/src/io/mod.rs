//! Files in and out: CSV matrices, dataset manifests, feature extraction
//! from manifests, synthetic cohorts, spectrum tables, run directories and
//! reports.

pub mod csv_matrix;
pub mod experiment;
pub mod extract;
pub mod manifest;
pub mod report;
pub mod spectrum;
pub mod synthetic;

pub use csv_matrix::{matrix_csv_string, parse_matrix_csv, read_matrix_csv, write_matrix_csv, CsvMatrix};
pub use experiment::{
    create_run_dir, evaluate_checkpoint, run_ablation, run_experiment, run_extraction, ExperimentConfig, TrainRun,
    FAILED_MARKER,
};
pub use extract::{extract_dataset, extract_source, extract_subject, write_features, Dataset, FeatureConfig};
pub use manifest::{load_manifest, DatasetManifest, MapPair, ModalitySource, SubjectRecord};
pub use report::{emit_report, ReportOutcome};
pub use spectrum::{analyze_spectrum, spectrum_csv, GraphFamily, SpectrumKernel, SpectrumRow};
pub use synthetic::{make_cohort, CohortKind, SyntheticCohort, SyntheticSpec};
