use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{ensure_finite, kronecker, mat, solve_psd, vec, Matrix, Vector};

use super::irls::{weighted_targets, IrlsWeights};
use super::{Hyperparams, TrainingSet};

type MapFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// An explicit feature map `φ: ℝ^d → ℝ^K`.
#[derive(Clone)]
pub struct FeatureMap {
    dim: usize,
    map: Arc<MapFn>,
}

impl fmt::Debug for FeatureMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FeatureMap").field("dim", &self.dim).finish_non_exhaustive()
    }
}

impl FeatureMap {
    pub fn new(dim: usize, map: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        Self {
            dim,
            map: Arc::new(map),
        }
    }

    /// `φ(x) = x`; paired with the linear kernel it reproduces the dual.
    pub fn identity(dim: usize) -> Self {
        Self::new(dim, |x| x.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vector> {
        let phi = (self.map)(x);
        if phi.len() != self.dim {
            return Err(Error::dim(format!(
                "feature map produced {} values, declared dimension is {}",
                phi.len(),
                self.dim
            )));
        }
        if !phi.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("feature vector"));
        }
        Ok(Vector::from_vec(phi))
    }

    /// `Φ`: row `n` is `φ(xₙ)ᵀ`.
    pub fn design_matrix(&self, inputs: &[Vec<f64>]) -> Result<Matrix> {
        let mut phi = Matrix::zeros(inputs.len(), self.dim);
        for (r, x) in inputs.iter().enumerate() {
            phi.row_mut(r).tr_copy_from(&self.apply(x)?);
        }
        Ok(phi)
    }
}

/// Closed-form minimizer of the weighted primal cost for fixed IRLS weights:
///
/// ```text
/// vec(W) = [α I + Σₙ Dₙ² ⊗ φₙφₙᵀ + β L ⊗ ΦᵀΦ]⁻¹ vec(Φᵀ T_D)
/// ```
///
/// The system is built literally from Kronecker products, so this is meant
/// for small feature dimensions.
pub fn fit_lrgs_primal(
    features: &FeatureMap,
    train: &TrainingSet,
    hyper: &Hyperparams,
    weights: &IrlsWeights,
) -> Result<Matrix> {
    hyper.validate()?;
    let phi = features.design_matrix(train.inputs())?;
    let (n, m, p) = (train.len(), train.node_count(), features.dim());
    if weights.shape() != (n, m) {
        return Err(Error::dim(format!(
            "weights are {:?}, expected {n}x{m}",
            weights.shape()
        )));
    }
    let t_d = weighted_targets(train.targets(), weights)?;
    let w2 = weights.squared();

    let mut system = Matrix::identity(m * p, m * p) * hyper.alpha;
    for row in 0..n {
        let phi_n = phi.row(row).transpose();
        let outer = &phi_n * phi_n.transpose();
        let d2 = Matrix::from_diagonal(&w2.row(row).transpose());
        system += kronecker(&d2, &outer)?;
    }
    if hyper.beta != 0.0 {
        system += kronecker(train.graph().laplacian(), &phi.tr_mul(&phi))? * hyper.beta;
    }
    let rhs = vec(&phi.tr_mul(&t_d));
    let sol = solve_psd(&system, &rhs)?;
    let w = mat(sol.x.as_slice(), p, m)?;
    ensure_finite(&w, "primal coefficients")?;
    Ok(w)
}

/// `y = Wᵀ φ(x)`.
pub fn primal_predict(w: &Matrix, features: &FeatureMap, x: &[f64]) -> Result<Vector> {
    let phi = features.apply(x)?;
    if w.nrows() != phi.len() {
        return Err(Error::dim("coefficient rows do not match the feature dimension"));
    }
    Ok(w.tr_mul(&phi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_set(rng: &mut ChaCha8Rng, n: usize, m: usize, p: usize, zero: bool) -> TrainingSet {
        let inputs: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let targets = if zero {
            Matrix::zeros(n, m)
        } else {
            Matrix::from_fn(n, m, |_, _| rng.random_range(-2.0..2.0))
        };
        let mut a = Matrix::zeros(m, m);
        for i in 0..m {
            for j in (i + 1)..m {
                let w = rng.random_range(0.0..1.0);
                a[(i, j)] = w;
                a[(j, i)] = w;
            }
        }
        TrainingSet::new(inputs, targets, build_graph(a).unwrap()).unwrap()
    }

    #[test]
    fn zero_targets_zero_coefficients() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let train = random_set(&mut rng, 5, 3, 2, true);
        let w = fit_lrgs_primal(
            &FeatureMap::identity(2),
            &train,
            &Hyperparams::new(0.5, 0.5),
            &IrlsWeights::identity(5, 3),
        )
        .unwrap();
        assert_eq!(w, Matrix::zeros(2, 3));
    }

    #[test]
    fn reduces_to_ridge_regression() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let (n, m, p, alpha) = (6, 3, 4, 0.8);
        let train = random_set(&mut rng, n, m, p, false);
        let features = FeatureMap::identity(p);
        let w = fit_lrgs_primal(&features, &train, &Hyperparams::new(alpha, 0.0), &IrlsWeights::identity(n, m))
            .unwrap();

        let phi = features.design_matrix(train.inputs()).unwrap();
        let gram = phi.tr_mul(&phi) + Matrix::identity(p, p) * alpha;
        let ridge = gram.lu().solve(&phi.tr_mul(train.targets())).unwrap();
        assert_relative_eq!(w, ridge, max_relative = 1e-10, epsilon = 1e-12);
    }

    #[test]
    fn feature_dimension_is_checked() {
        let bad = FeatureMap::new(3, |x| x.to_vec());
        assert!(matches!(bad.apply(&[1.0, 2.0]), Err(Error::Dimension(_))));
    }

    #[test]
    fn nonlinear_features() {
        let features = FeatureMap::new(2, |x| vec![1.0, x[0] * x[0]]);
        let w = Matrix::from_row_slice(2, 1, &[1.0, 2.0]);
        let y = primal_predict(&w, &features, &[3.0]).unwrap();
        assert_eq!(y[0], 19.0);
    }
}
