use std::cmp::Ordering;
use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::kernels::{median_pairwise_distance, KernelSpec};
use crate::linalg::Matrix;
use crate::regression::{fit_krgs, Hyperparams, TrainingSet};

use super::config::{ExperimentConfig, KernelFamily};
use super::metrics::nmse_db;

/// One hyperparameter combination. `sigma` is `None` for the linear kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub alpha: f64,
    pub beta: f64,
    pub sigma: Option<f64>,
}

impl GridPoint {
    pub fn kernel(&self) -> Result<KernelSpec> {
        match self.sigma {
            Some(s) => KernelSpec::gaussian(s),
            None => Ok(KernelSpec::Linear),
        }
    }

    /// Lexicographic order on `(α, β, σ)`.
    pub fn lex_cmp(&self, other: &Self) -> Ordering {
        self.alpha
            .total_cmp(&other.alpha)
            .then(self.beta.total_cmp(&other.beta))
            .then(match (self.sigma, other.sigma) {
                (Some(a), Some(b)) => a.total_cmp(&b),
                (a, b) => a.is_some().cmp(&b.is_some()),
            })
    }
}

/// The grid described by `config`, with Gaussian bandwidths scaled by the
/// median pairwise distance of `inputs`, sorted lexicographically.
pub fn hyper_grid(config: &ExperimentConfig, inputs: &[Vec<f64>]) -> Vec<GridPoint> {
    let alphas = config.alpha.map_or_else(|| config.alpha_grid.clone(), |a| vec![a]);
    let betas = config.beta.map_or_else(|| config.beta_grid.clone(), |b| vec![b]);
    let sigmas: Vec<Option<f64>> = match (config.kernel, config.sigma) {
        (KernelFamily::Linear, _) => vec![None],
        (KernelFamily::Gaussian, Some(s)) => vec![Some(s)],
        (KernelFamily::Gaussian, None) => {
            let unit = median_pairwise_distance(inputs);
            config.sigma_scales.iter().map(|s| Some(s * unit)).collect()
        }
    };
    let mut grid = Vec::with_capacity(alphas.len() * betas.len() * sigmas.len());
    for &alpha in &alphas {
        for &beta in &betas {
            for &sigma in &sigmas {
                grid.push(GridPoint { alpha, beta, sigma });
            }
        }
    }
    grid.sort_by(GridPoint::lex_cmp);
    grid.dedup_by(|a, b| a.lex_cmp(b) == Ordering::Equal);
    grid
}

/// Splits `0..n` into `folds` contiguous ranges whose sizes differ by at
/// most one, larger ones first.
pub fn fold_ranges(n: usize, folds: usize) -> Result<Vec<Range<usize>>> {
    if folds < 2 || n < folds {
        return Err(Error::invalid(format!(
            "cannot split {n} points into {folds} non-empty folds"
        )));
    }
    let (base, extra) = (n / folds, n % folds);
    let mut start = 0;
    Ok((0..folds)
        .map(|f| {
            let len = base + usize::from(f < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvOutcome {
    pub best: GridPoint,
    /// Mean validation NMSE (dB) of `best`.
    pub best_score: f64,
    /// Every grid point with its mean validation NMSE, in grid order.
    /// Points whose fit failed numerically score `+∞`.
    pub scores: Vec<(GridPoint, f64)>,
}

fn rows(m: &Matrix, idx: &[usize]) -> Matrix {
    m.select_rows(idx)
}

/// Mean validation NMSE of one grid point over the folds.
pub fn score_grid_point(
    inputs: &[Vec<f64>],
    targets: &Matrix,
    graph: &Graph,
    folds: &[Range<usize>],
    point: &GridPoint,
    base: &Hyperparams,
) -> Result<f64> {
    let kernel = point.kernel()?;
    let hyper = Hyperparams {
        alpha: point.alpha,
        beta: point.beta,
        ..*base
    };
    let n = inputs.len();
    let mut total = 0.0;
    for fold in folds {
        let train_idx: Vec<usize> = (0..n).filter(|i| !fold.contains(i)).collect();
        let valid_idx: Vec<usize> = fold.clone().collect();
        let train = TrainingSet::new(
            train_idx.iter().map(|&i| inputs[i].clone()).collect(),
            rows(targets, &train_idx),
            graph.clone(),
        )?;
        let model = match fit_krgs(&train, &kernel, &hyper) {
            Ok(m) => m,
            Err(e) if e.is_solver_failure() => return Ok(f64::INFINITY),
            Err(e) => return Err(e),
        };
        let valid_inputs: Vec<Vec<f64>> = valid_idx.iter().map(|&i| inputs[i].clone()).collect();
        let predictions = model.predict_batch(&valid_inputs)?;
        total += nmse_db(&predictions, &rows(targets, &valid_idx))?;
    }
    Ok(total / folds.len() as f64)
}

/// Grid search with contiguous chronological folds. Each grid point is fit
/// with KRGS on all folds but one and scored by NMSE against the held-out
/// fold's targets; the lowest mean score wins, ties going to the smallest
/// `(α, β, σ)`.
pub fn cross_validate(
    inputs: &[Vec<f64>],
    targets: &Matrix,
    graph: &Graph,
    grid: &[GridPoint],
    folds: usize,
    base: &Hyperparams,
) -> Result<CvOutcome> {
    if grid.is_empty() {
        return Err(Error::invalid("hyperparameter grid is empty"));
    }
    if targets.nrows() != inputs.len() {
        return Err(Error::dim("inputs and targets differ in length"));
    }
    let ranges = fold_ranges(inputs.len(), folds)?;
    let mut ordered = grid.to_vec();
    ordered.sort_by(GridPoint::lex_cmp);

    let scores: Vec<(GridPoint, f64)> = ordered
        .par_iter()
        .map(|p| {
            let s = score_grid_point(inputs, targets, graph, &ranges, p, base)?;
            Ok((*p, if s.is_nan() { f64::INFINITY } else { s }))
        })
        .collect::<Result<_>>()?;

    let (best, best_score) = scores
        .iter()
        .copied()
        .reduce(|acc, cur| if cur.1 < acc.1 { cur } else { acc })
        .expect("grid is non-empty");
    Ok(CvOutcome {
        best,
        best_score,
        scores,
    })
}
