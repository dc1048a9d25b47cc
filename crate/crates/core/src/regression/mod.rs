//! The regression core.
//!
//! With a feature map `φ`, predictions are `y = Wᵀ φ(x)` and `W` minimizes
//!
//! ```text
//! C₁(W) = Σₙ |tₙ - yₙ|₁ + α tr(WᵀW) + β Σₙ yₙᵀ L yₙ
//! ```
//!
//! IRLS replaces the ℓ1 term by `Σₙ |Dₙ (tₙ - yₙ)|²` with diagonal weights
//! from the previous residuals. Each weighted problem has a closed form, and
//! substituting `W = Φᵀ Ψ` turns it into a linear system in the dual
//! coefficients `Ψ` (N×M) that only involves the Gram matrix `K`:
//!
//! ```text
//! [Σₙ Dₙ² ⊗ kₙkₙᵀ + α (I ⊗ K) + β (L ⊗ K²)] vec(Ψ) = (I ⊗ K) vec(T_D)
//! ```
//!
//! where `T_D` has rows `Dₙ² tₙ`. Predictions are `y = Ψᵀ k(x)`.

mod dual;
mod irls;
mod primal;
mod system;

pub use dual::{
    fit_krg, fit_krgs, predict, solve_weighted, IterationRecord, KrgsModel, WeightedSolve,
};
pub use irls::{irls_update_weights, weighted_targets, IrlsState, IrlsWeights, WeightRule};
pub use primal::{fit_lrgs_primal, primal_predict, FeatureMap};
pub use system::{
    assemble_dual_system, dual_cost, dual_gradient, eval_cost_l1, DualSystem,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Frobenius (ridge) penalty; must be strictly positive to fit.
    pub alpha: f64,
    /// Graph smoothness penalty.
    pub beta: f64,
    /// IRLS damping added to residual magnitudes.
    pub delta: f64,
    /// Maximum number of IRLS iterations (the first one is the ℓ2 fit).
    pub max_iter: usize,
    /// Stop early once the relative Frobenius change of `Ψ` drops below this.
    pub tol: f64,
    #[serde(default)]
    pub weight_rule: WeightRule,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.0,
            delta: 0.1,
            max_iter: 10,
            tol: 1e-8,
            weight_rule: WeightRule::Damped,
        }
    }
}

impl Hyperparams {
    pub fn new(alpha: f64, beta: f64) -> Self {
        Self {
            alpha,
            beta,
            ..Self::default()
        }
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::invalid(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::invalid(format!("beta must be >= 0, got {}", self.beta)));
        }
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(Error::invalid(format!("delta must be > 0, got {}", self.delta)));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be at least 1"));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::invalid(format!("tol must be >= 0, got {}", self.tol)));
        }
        Ok(())
    }
}

/// Training inputs, (possibly corrupted) targets and the output graph.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    inputs: Vec<Vec<f64>>,
    targets: Matrix,
    graph: Graph,
    clean_targets: Option<Matrix>,
}

impl TrainingSet {
    /// `targets` has one row per input and one column per graph node.
    pub fn new(inputs: Vec<Vec<f64>>, targets: Matrix, graph: Graph) -> Result<Self> {
        let n = inputs.len();
        if n == 0 {
            return Err(Error::dim("training set is empty"));
        }
        if targets.nrows() != n {
            return Err(Error::dim(format!(
                "{n} inputs but {} target rows",
                targets.nrows()
            )));
        }
        if targets.ncols() != graph.node_count() {
            return Err(Error::dim(format!(
                "targets have {} columns, graph has {} nodes",
                targets.ncols(),
                graph.node_count()
            )));
        }
        let dim = inputs[0].len();
        if inputs.iter().any(|x| x.len() != dim) {
            return Err(Error::dim("training inputs have inconsistent dimensions"));
        }
        if !inputs.iter().flatten().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("training inputs"));
        }
        crate::linalg::ensure_finite(&targets, "training targets")?;
        Ok(Self {
            inputs,
            targets,
            graph,
            clean_targets: None,
        })
    }

    pub fn with_clean_targets(mut self, clean: Matrix) -> Result<Self> {
        if clean.shape() != self.targets.shape() {
            return Err(Error::dim("clean targets must match the target shape"));
        }
        crate::linalg::ensure_finite(&clean, "clean targets")?;
        self.clean_targets = Some(clean);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.targets.ncols()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn targets(&self) -> &Matrix {
        &self.targets
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn clean_targets(&self) -> Option<&Matrix> {
        self.clean_targets.as_ref()
    }
}
