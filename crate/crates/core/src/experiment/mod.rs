//! Experiment protocol: NMSE, cross-validated hyperparameter selection,
//! Monte Carlo sweeps over corrupted training sets, and report files.
//!
//! A run is a pure function of its [`ExperimentConfig`]. Randomness comes
//! from numbered streams of the master seed (see [`CV_STREAM`] and
//! [`trial_stream`]), and parallel results are reduced in trial order.

pub mod config;
pub mod cv;
pub mod metrics;
pub mod monte_carlo;
pub mod report;

pub use config::{ExperimentConfig, KernelFamily};
pub use cv::{cross_validate, fold_ranges, hyper_grid, CvOutcome, GridPoint};
pub use metrics::{aggregate_nmse_db, nmse_db, NmseParts};
pub use monte_carlo::{
    load_experiment_data, monte_carlo_experiment, run_trial, select_hyperparams, trial_stream,
    ExperimentData, ExperimentResult, NmseRow, Selection, SizeSummary, TrialOutcome, CV_STREAM,
};
pub use report::{write_outputs, METADATA_FILE, NMSE_FILE, PLOT_FILE};
