//! Kernel regression over graphs robust to sparse noise.
//!
//! Targets are graph signals: vectors indexed by the nodes of a known graph
//! and expected to vary smoothly across its edges. Training targets may be
//! corrupted at an unknown subset of nodes (missing samples or large
//! perturbations). The model is fitted by minimizing an ℓ1 data term plus a
//! Frobenius penalty and a graph-Laplacian smoothness penalty; the ℓ1 term is
//! handled by iteratively reweighted least squares, each step of which has a
//! closed form that admits the kernel trick.
//!
//! The crate is organized bottom-up:
//!
//! - [`linalg`]: Kronecker products, column-major `vec`/`mat`, PSD solves.
//! - [`graph`]: Laplacians, smoothness, geodesic adjacency construction.
//! - [`kernels`]: Gram matrices and kernel vectors.
//! - [`regression`]: the IRLS dual solver, the ℓ2 baseline, the primal
//!   closed form, costs and gradients.
//! - [`noise`]: sparse corruption models and SNR accounting.
//! - [`data`]: CSV ingestion, next-day pairs, splitting, synthetic signals.
//! - [`experiment`]: NMSE, cross-validation, Monte Carlo sweeps, reports.

pub mod data;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod kernels;
pub mod linalg;
pub mod noise;
pub mod regression;
pub mod rng;

pub use error::{Error, Result};
pub use graph::Graph;
pub use kernels::KernelSpec;
pub use linalg::{Matrix, Vector};
pub use regression::{fit_krg, fit_krgs, Hyperparams, KrgsModel, TrainingSet};
