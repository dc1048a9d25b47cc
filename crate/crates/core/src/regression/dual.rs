use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{kernel_matrix, kernel_vector, KernelSpec};
use crate::linalg::{ensure_finite, mat, solve_psd, vec, Matrix, Vector};

use super::irls::{irls_update_weights, weighted_targets, IrlsState, IrlsWeights};
use super::system::{assemble_system_matrix, eval_cost_l1, node_block};
use super::{Hyperparams, TrainingSet};

/// Outcome of one weighted dual solve.
#[derive(Debug, Clone)]
pub struct WeightedSolve {
    pub psi: Matrix,
    /// Diagonal jitter applied to the system, if it was (near) singular.
    pub jitter: Option<f64>,
}

/// Solves the weighted dual system for `Ψ` given the Gram matrix `k`, the
/// Laplacian `l`, raw targets and the current IRLS weights.
pub fn solve_weighted(
    k: &Matrix,
    l: &Matrix,
    targets: &Matrix,
    weights: &IrlsWeights,
    alpha: f64,
    beta: f64,
) -> Result<WeightedSolve> {
    let (n, m) = targets.shape();
    let t_d = weighted_targets(targets, weights)?;
    let weights_sq = weights.squared();
    if beta == 0.0 {
        return solve_decoupled(k, l, &t_d, &weights_sq, alpha);
    }
    let system = assemble_system_matrix(k, l, &weights_sq, alpha, beta)?;
    // (I ⊗ K) vec(T_D) = vec(K T_D)
    let rhs = vec(&(k * &t_d));
    let sol = solve_psd(&system, &rhs)?;
    let psi = mat(sol.x.as_slice(), n, m)?;
    Ok(WeightedSolve {
        psi,
        jitter: sol.jitter,
    })
}

/// Without the Laplacian term the system is block diagonal, so each node's
/// column of `Ψ` solves its own N×N system. Jitter, if any block needs it,
/// is reported as the largest shift applied.
fn solve_decoupled(k: &Matrix, l: &Matrix, t_d: &Matrix, weights_sq: &Matrix, alpha: f64) -> Result<WeightedSolve> {
    let (n, m) = t_d.shape();
    if k.shape() != (n, n) || l.shape() != (m, m) {
        return Err(Error::dim(format!(
            "kernel {:?} and laplacian {:?} do not match targets {n}x{m}",
            k.shape(),
            l.shape()
        )));
    }
    let rhs = k * t_d;
    let mut psi = Matrix::zeros(n, m);
    let mut jitter: Option<f64> = None;
    for i in 0..m {
        let block = node_block(k, weights_sq.column(i).as_slice(), alpha);
        let sol = solve_psd(&block, &rhs.column(i).into_owned())?;
        psi.set_column(i, &sol.x);
        if let Some(j) = sol.jitter {
            jitter = Some(jitter.map_or(j, |prev: f64| prev.max(j)));
        }
    }
    Ok(WeightedSolve { psi, jitter })
}

/// One IRLS iteration as recorded by [`fit_krgs`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based.
    pub iteration: usize,
    pub psi: Matrix,
    /// Weights used for this iteration's solve.
    pub weights: IrlsWeights,
    /// ℓ1 objective of this iterate on the training data.
    pub cost_l1: f64,
    pub jitter: Option<f64>,
    /// Relative Frobenius change of `Ψ` from the previous iteration.
    pub psi_change: Option<f64>,
}

/// A fitted dual model. Predictions are `Ψᵀ k(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KrgsModel {
    psi: Matrix,
    kernel: KernelSpec,
    train_inputs: Vec<Vec<f64>>,
    hyper: Hyperparams,
    state: IrlsState,
    history: Vec<IterationRecord>,
}

impl KrgsModel {
    pub fn psi(&self) -> &Matrix {
        &self.psi
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn train_inputs(&self) -> &[Vec<f64>] {
        &self.train_inputs
    }

    pub fn hyper(&self) -> &Hyperparams {
        &self.hyper
    }

    pub fn state(&self) -> &IrlsState {
        &self.state
    }

    pub fn history(&self) -> &[IterationRecord] {
        &self.history
    }

    pub fn iterations(&self) -> usize {
        self.history.len()
    }

    pub fn node_count(&self) -> usize {
        self.psi.ncols()
    }

    /// Number of iterations whose solve needed diagonal jitter.
    pub fn jitter_events(&self) -> usize {
        self.history.iter().filter(|r| r.jitter.is_some()).count()
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vector> {
        let k = kernel_vector(&self.kernel, &self.train_inputs, x)?;
        Ok(self.psi.tr_mul(&k))
    }

    /// Kernel rows `k(x)ᵀ` for a batch of inputs, one row per input.
    pub fn cross_kernel(&self, inputs: &[Vec<f64>]) -> Result<Matrix> {
        let n = self.train_inputs.len();
        let mut out = Matrix::zeros(inputs.len(), n);
        for (r, x) in inputs.iter().enumerate() {
            let k = kernel_vector(&self.kernel, &self.train_inputs, x)?;
            out.row_mut(r).tr_copy_from(&k);
        }
        Ok(out)
    }

    /// Predictions for a batch of inputs (one row each) using the final `Ψ`.
    pub fn predict_batch(&self, inputs: &[Vec<f64>]) -> Result<Matrix> {
        Ok(self.cross_kernel(inputs)? * &self.psi)
    }
}

/// Free-function form of [`KrgsModel::predict`].
pub fn predict(model: &KrgsModel, x: &[f64]) -> Result<Vector> {
    model.predict(x)
}

struct Prepared<'a> {
    k: Matrix,
    train: &'a TrainingSet,
}

fn prepare<'a>(train: &'a TrainingSet, kernel: &KernelSpec, hyper: &Hyperparams) -> Result<Prepared<'a>> {
    hyper.validate()?;
    kernel.validate()?;
    let k = kernel_matrix(kernel, train.inputs())?;
    Ok(Prepared { k, train })
}

impl Prepared<'_> {
    fn solve(&self, weights: &IrlsWeights, hyper: &Hyperparams) -> Result<WeightedSolve> {
        let step = solve_weighted(
            &self.k,
            self.train.graph().laplacian(),
            self.train.targets(),
            weights,
            hyper.alpha,
            hyper.beta,
        )?;
        ensure_finite(&step.psi, "dual coefficients")?;
        Ok(step)
    }

    /// Training outputs `KΨ` and the ℓ1 objective.
    fn evaluate(&self, psi: &Matrix, hyper: &Hyperparams) -> Result<(Matrix, f64)> {
        let fitted = &self.k * psi;
        ensure_finite(&fitted, "fitted outputs")?;
        let model_norm = psi.dot(&fitted);
        let cost = eval_cost_l1(
            self.train.targets(),
            &fitted,
            self.train.graph().laplacian(),
            model_norm,
            hyper.alpha,
            hyper.beta,
        )?;
        Ok((fitted, cost))
    }
}

fn relative_change(new: &Matrix, old: &Matrix) -> f64 {
    let diff = (new - old).norm();
    let base = old.norm();
    if base > 0.0 {
        diff / base
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Kernel regression over graphs for sparse noise.
///
/// Starts from identity weights and alternates: solve the weighted dual
/// system for `Ψ`, evaluate the training outputs `KΨ`, and recompute the
/// weights from the residuals. Runs `hyper.max_iter` iterations or until the
/// relative change of `Ψ` falls below `hyper.tol`.
pub fn fit_krgs(train: &TrainingSet, kernel: &KernelSpec, hyper: &Hyperparams) -> Result<KrgsModel> {
    let prep = prepare(train, kernel, hyper)?;
    let (n, m) = (train.len(), train.node_count());

    let mut weights = IrlsWeights::identity(n, m);
    let mut history: Vec<IterationRecord> = Vec::with_capacity(hyper.max_iter);
    for iteration in 1..=hyper.max_iter {
        let step = prep.solve(&weights, hyper)?;
        let (fitted, cost_l1) = prep.evaluate(&step.psi, hyper)?;
        let psi_change = history.last().map(|prev| relative_change(&step.psi, &prev.psi));
        let next = irls_update_weights(train.targets(), &fitted, hyper.delta, hyper.weight_rule)?;
        history.push(IterationRecord {
            iteration,
            psi: step.psi,
            weights: std::mem::replace(&mut weights, next),
            cost_l1,
            jitter: step.jitter,
            psi_change,
        });
        if psi_change.is_some_and(|c| c < hyper.tol) {
            break;
        }
    }
    Ok(finish(kernel, train, *hyper, weights, history))
}

/// Kernel regression over graphs: the ℓ2 baseline, a single solve with
/// identity weights. Identical to the first iteration of [`fit_krgs`].
pub fn fit_krg(train: &TrainingSet, kernel: &KernelSpec, alpha: f64, beta: f64) -> Result<KrgsModel> {
    let hyper = Hyperparams::new(alpha, beta).with_max_iter(1);
    let prep = prepare(train, kernel, &hyper)?;
    let (n, m) = (train.len(), train.node_count());

    let identity = IrlsWeights::identity(n, m);
    let step = prep.solve(&identity, &hyper)?;
    let (fitted, cost_l1) = prep.evaluate(&step.psi, &hyper)?;
    let next = irls_update_weights(train.targets(), &fitted, hyper.delta, hyper.weight_rule)?;
    let history = vec![IterationRecord {
        iteration: 1,
        psi: step.psi,
        weights: identity,
        cost_l1,
        jitter: step.jitter,
        psi_change: None,
    }];
    Ok(finish(kernel, train, hyper, next, history))
}

fn finish(
    kernel: &KernelSpec,
    train: &TrainingSet,
    hyper: Hyperparams,
    weights: IrlsWeights,
    history: Vec<IterationRecord>,
) -> KrgsModel {
    let psi = history
        .last()
        .map(|r| r.psi.clone())
        .unwrap_or_else(|| Matrix::zeros(train.len(), train.node_count()));
    KrgsModel {
        psi,
        kernel: kernel.clone(),
        train_inputs: train.inputs().to_vec(),
        hyper,
        state: IrlsState {
            weights,
            iteration: history.len(),
            cost_history: history.iter().map(|r| r.cost_l1).collect(),
        },
        history,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;
    use approx::assert_relative_eq;

    fn scalar_set(t: f64) -> TrainingSet {
        let g = build_graph(Matrix::zeros(1, 1)).unwrap();
        TrainingSet::new(vec![vec![0.0]], Matrix::from_element(1, 1, t), g).unwrap()
    }

    fn unit_kernel() -> KernelSpec {
        KernelSpec::precomputed(Matrix::from_element(1, 1, 1.0)).unwrap()
    }

    #[test]
    fn scalar_recursion() {
        let train = scalar_set(2.0);
        let hyper = Hyperparams::new(1.0, 0.0).with_delta(0.1).with_max_iter(2).with_tol(0.0);
        let model = fit_krgs(&train, &unit_kernel(), &hyper).unwrap();
        let h = model.history();
        assert_eq!(h.len(), 2);
        assert_relative_eq!(h[0].psi[(0, 0)], 1.0, max_relative = 1e-14);
        assert_relative_eq!(h[1].weights.squared()[(0, 0)], 1.0 / 1.1, max_relative = 1e-14);
        assert_relative_eq!(h[1].psi[(0, 0)], 0.952_380_952_380_952_3, max_relative = 1e-13);
        // ℓ1 cost after iteration 1: |2 - 1| + 1·1 = 2
        assert_relative_eq!(h[0].cost_l1, 2.0, max_relative = 1e-14);
    }

    #[test]
    fn scalar_prediction_after_first_iteration() {
        let model = fit_krg(&scalar_set(2.0), &unit_kernel(), 1.0, 0.0).unwrap();
        assert_relative_eq!(model.predict(&[0.0]).unwrap()[0], 1.0, max_relative = 1e-14);
    }

    #[test]
    fn single_iteration_equals_krg() {
        let train = scalar_set(3.0);
        let a = fit_krgs(&train, &unit_kernel(), &Hyperparams::new(0.5, 0.0).with_max_iter(1)).unwrap();
        let b = fit_krg(&train, &unit_kernel(), 0.5, 0.0).unwrap();
        assert_eq!(a.psi(), b.psi());
    }

    #[test]
    fn zero_psi_predicts_zero() {
        let mut model = fit_krg(&scalar_set(2.0), &unit_kernel(), 1.0, 0.0).unwrap();
        model.psi = Matrix::zeros(1, 1);
        assert_eq!(model.predict(&[0.0]).unwrap()[0], 0.0);
    }

    #[test]
    fn rejects_nonpositive_alpha() {
        let train = scalar_set(1.0);
        assert!(fit_krg(&train, &unit_kernel(), 0.0, 0.0).is_err());
        assert!(fit_krgs(&train, &unit_kernel(), &Hyperparams::new(-1.0, 0.0)).is_err());
    }

    #[test]
    fn early_stop_on_tolerance() {
        // Zero targets: Ψ = 0 at every iteration, so the change is 0 at iteration 2.
        let train = TrainingSet::new(
            vec![vec![0.0], vec![1.0]],
            Matrix::zeros(2, 2),
            build_graph(Matrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])).unwrap(),
        )
        .unwrap();
        let hyper = Hyperparams::new(1.0, 0.5).with_max_iter(10).with_tol(1e-8);
        let model = fit_krgs(&train, &KernelSpec::gaussian(1.0).unwrap(), &hyper).unwrap();
        assert_eq!(model.iterations(), 2);
        assert_eq!(model.state().iteration, 2);
    }

    #[test]
    fn predict_dimension_mismatch() {
        let train = TrainingSet::new(
            vec![vec![0.0, 1.0]],
            Matrix::from_element(1, 1, 1.0),
            build_graph(Matrix::zeros(1, 1)).unwrap(),
        )
        .unwrap();
        let model = fit_krg(&train, &KernelSpec::Linear, 1.0, 0.0).unwrap();
        assert!(matches!(model.predict(&[1.0]), Err(Error::Dimension(_))));
    }
}
