use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// How residuals are turned into IRLS weights.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightRule {
    /// `d = (|r| + δ)^(-1/2)`; bounded above by `δ^(-1/2)`.
    #[default]
    Damped,
    /// `d = |r + δ|^(-1/2)`; unbounded near `r = -δ`. Kept for comparison.
    Literal,
}

/// Diagonals of the IRLS weighting matrices: row `n` holds `dₙ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Matrix", into = "Matrix")]
pub struct IrlsWeights(Matrix);

impl IrlsWeights {
    /// All-ones weights (`Dₙ = I`), which make the first IRLS step a plain
    /// ℓ2 fit.
    pub fn identity(n: usize, m: usize) -> Self {
        Self(Matrix::from_element(n, m, 1.0))
    }

    pub fn from_matrix(d: Matrix) -> Result<Self> {
        if d.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(Self(d))
        } else {
            Err(Error::invalid("IRLS weights must be finite and positive"))
        }
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    /// Elementwise squares, i.e. the diagonals of `Dₙ²`.
    pub fn squared(&self) -> Matrix {
        self.0.map(|d| d * d)
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }
}

impl TryFrom<Matrix> for IrlsWeights {
    type Error = Error;

    fn try_from(m: Matrix) -> Result<Self> {
        Self::from_matrix(m)
    }
}

impl From<IrlsWeights> for Matrix {
    fn from(w: IrlsWeights) -> Self {
        w.0
    }
}

/// IRLS bookkeeping after a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrlsState {
    /// Weights computed from the last iterate, i.e. what a further iteration
    /// would use.
    pub weights: IrlsWeights,
    pub iteration: usize,
    /// ℓ1 cost after each iteration.
    pub cost_history: Vec<f64>,
}

/// Weights from residuals `T - Y`.
pub fn irls_update_weights(
    targets: &Matrix,
    fitted: &Matrix,
    delta: f64,
    rule: WeightRule,
) -> Result<IrlsWeights> {
    if targets.shape() != fitted.shape() {
        return Err(Error::dim(format!(
            "targets are {:?}, fitted outputs are {:?}",
            targets.shape(),
            fitted.shape()
        )));
    }
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::invalid(format!("delta must be > 0, got {delta}")));
    }
    let d = targets.zip_map(fitted, |t, y| {
        let r = t - y;
        match rule {
            WeightRule::Damped => (r.abs() + delta).powf(-0.5),
            WeightRule::Literal => (r + delta).abs().powf(-0.5),
        }
    });
    if !d.iter().all(|v| v.is_finite() && *v > 0.0) {
        return Err(Error::NonFinite("IRLS weights"));
    }
    Ok(IrlsWeights(d))
}

/// `T_D`: row `n` is `dₙ² ⊙ tₙ`.
pub fn weighted_targets(targets: &Matrix, weights: &IrlsWeights) -> Result<Matrix> {
    if targets.shape() != weights.shape() {
        return Err(Error::dim(format!(
            "targets are {:?}, weights are {:?}",
            targets.shape(),
            weights.shape()
        )));
    }
    Ok(targets.zip_map(&weights.0, |t, d| d * d * t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn scalar(v: f64) -> Matrix {
        Matrix::from_element(1, 1, v)
    }

    #[test]
    fn zero_residual_weight() {
        let w = irls_update_weights(&scalar(1.5), &scalar(1.5), 0.1, WeightRule::Damped).unwrap();
        assert_relative_eq!(w.as_matrix()[(0, 0)], 3.162_277_660_168_379, max_relative = 1e-14);
    }

    #[test]
    fn large_residual_weight() {
        for r in [10.0, -10.0] {
            let w = irls_update_weights(&scalar(r), &scalar(0.0), 0.1, WeightRule::Damped).unwrap();
            let d = w.as_matrix()[(0, 0)];
            assert_relative_eq!(d, 0.314_658_387_763_776_3, max_relative = 1e-14);
            // ℓ1 surrogate: d² r² ≈ |r|
            assert_relative_eq!(d * d * r * r, 9.900_990_099_009_9, max_relative = 1e-12);
        }
    }

    #[test]
    fn damped_weights_are_bounded() {
        let t = Matrix::from_row_slice(2, 3, &[0.0, 1.0, -2.0, 5.0, -0.1, 1e-9]);
        let y = Matrix::zeros(2, 3);
        let w = irls_update_weights(&t, &y, 0.25, WeightRule::Damped).unwrap();
        assert!(w.as_matrix().iter().all(|&d| d > 0.0 && d <= 0.25f64.powf(-0.5)));
    }

    #[test]
    fn literal_rule_blows_up_at_minus_delta() {
        let err = irls_update_weights(&scalar(-0.1), &scalar(0.0), 0.1, WeightRule::Literal);
        assert!(matches!(err, Err(Error::NonFinite(_))));
        let w = irls_update_weights(&scalar(-0.3), &scalar(0.0), 0.1, WeightRule::Literal).unwrap();
        assert_relative_eq!(w.as_matrix()[(0, 0)], 0.2f64.powf(-0.5), max_relative = 1e-14);
    }

    #[test]
    fn non_finite_residual() {
        let err = irls_update_weights(&scalar(f64::NAN), &scalar(0.0), 0.1, WeightRule::Damped);
        assert!(matches!(err, Err(Error::NonFinite(_))));
    }

    #[test]
    fn weighted_targets_examples() {
        let t = Matrix::from_row_slice(2, 2, &[1.0, -2.0, 3.0, 0.5]);
        assert_eq!(weighted_targets(&t, &IrlsWeights::identity(2, 2)).unwrap(), t);

        let w = IrlsWeights::from_matrix(scalar(0.5f64.sqrt())).unwrap();
        assert_relative_eq!(weighted_targets(&scalar(2.0), &w).unwrap()[(0, 0)], 1.0, max_relative = 1e-15);

        let z = Matrix::zeros(2, 2);
        let w = IrlsWeights::from_matrix(Matrix::from_element(2, 2, 3.0)).unwrap();
        assert_eq!(weighted_targets(&z, &w).unwrap(), z);
    }

    #[test]
    fn weighted_targets_shape_mismatch() {
        let t = Matrix::zeros(2, 3);
        assert!(weighted_targets(&t, &IrlsWeights::identity(3, 2)).is_err());
    }
}
