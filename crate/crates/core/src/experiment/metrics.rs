use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Error energy `Σ‖yₙ - t₀ₙ‖²` and signal energy `Σ‖t₀ₙ‖²` of one run,
/// kept apart so that several runs can be pooled before taking the log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NmseParts {
    pub error: f64,
    pub energy: f64,
}

impl NmseParts {
    /// Rows of `predictions` and `truths` are test points.
    pub fn compute(predictions: &Matrix, truths: &Matrix) -> Result<Self> {
        if predictions.shape() != truths.shape() {
            return Err(Error::dim(format!(
                "predictions are {:?}, truths are {:?}",
                predictions.shape(),
                truths.shape()
            )));
        }
        if truths.is_empty() {
            return Err(Error::invalid("no test points"));
        }
        Ok(Self {
            error: (predictions - truths).norm_squared(),
            energy: truths.norm_squared(),
        })
    }

    pub fn db(&self) -> Result<f64> {
        ratio_db(self.error, self.energy)
    }
}

fn ratio_db(error: f64, energy: f64) -> Result<f64> {
    if energy == 0.0 {
        return Err(Error::invalid("NMSE is undefined for an all-zero truth"));
    }
    // An exact fit gives log10(0) = -inf, the documented sentinel.
    Ok(10.0 * (error / energy).log10())
}

/// `10 log₁₀(Σ‖yₙ - t₀ₙ‖² / Σ‖t₀ₙ‖²)` in dB.
pub fn nmse_db(predictions: &Matrix, truths: &Matrix) -> Result<f64> {
    NmseParts::compute(predictions, truths)?.db()
}

/// NMSE over several runs: mean error energy over mean signal energy, then
/// the log. Summation follows slice order.
pub fn aggregate_nmse_db(runs: &[NmseParts]) -> Result<f64> {
    if runs.is_empty() {
        return Err(Error::invalid("no runs to aggregate"));
    }
    let count = runs.len() as f64;
    let error = runs.iter().map(|r| r.error).sum::<f64>() / count;
    let energy = runs.iter().map(|r| r.energy).sum::<f64>() / count;
    ratio_db(error, energy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exact_fit_is_minus_infinity() {
        let t = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(nmse_db(&t, &t).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn zero_prediction_is_zero_db() {
        let t = Matrix::from_row_slice(2, 2, &[1.0, -2.0, 3.0, 0.5]);
        assert_eq!(nmse_db(&Matrix::zeros(2, 2), &t).unwrap(), 0.0);
    }

    #[test]
    fn single_point_example() {
        let y = Matrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let t = Matrix::from_row_slice(1, 2, &[0.0, 1.0]);
        assert_relative_eq!(nmse_db(&y, &t).unwrap(), 3.010_299_956_639_812, max_relative = 1e-14);
    }

    #[test]
    fn zero_truth_is_an_error() {
        assert!(nmse_db(&Matrix::zeros(1, 2), &Matrix::zeros(1, 2)).is_err());
        assert!(nmse_db(&Matrix::zeros(1, 2), &Matrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn aggregation_pools_before_the_log() {
        let a = NmseParts { error: 1.0, energy: 1.0 };
        let b = NmseParts { error: 0.0, energy: 3.0 };
        assert_relative_eq!(aggregate_nmse_db(&[a, b]).unwrap(), 10.0 * 0.25f64.log10());
        assert_eq!(aggregate_nmse_db(&[a]).unwrap(), a.db().unwrap());
        assert!(aggregate_nmse_db(&[]).is_err());
    }
}
