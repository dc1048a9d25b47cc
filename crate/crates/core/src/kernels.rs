//! Kernel functions, Gram matrices and kernel vectors.
//!
//! Inputs are plain `&[f64]` vectors. A [`KernelSpec::Precomputed`] kernel
//! instead treats each input as a one-element vector holding an index into
//! a stored Gram matrix over a fixed universe of points.

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{max_abs, symmetry_deviation, Matrix, Vector};

const PRECOMPUTED_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelSpec {
    /// `exp(-|x - x'|² / (2 σ²))`.
    Gaussian { sigma: f64 },
    /// `xᵀ x'`.
    Linear,
    Precomputed { gram: PrecomputedGram },
}

/// A symmetric PSD Gram matrix addressed by integer point indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Matrix", into = "Matrix")]
pub struct PrecomputedGram(Matrix);

impl PrecomputedGram {
    pub fn new(gram: Matrix) -> Result<Self> {
        let n = gram.nrows();
        if gram.ncols() != n || n == 0 {
            return Err(Error::dim("precomputed Gram matrix must be square and non-empty"));
        }
        if !gram.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("precomputed Gram matrix"));
        }
        let scale = max_abs(&gram).max(f64::MIN_POSITIVE);
        let deviation = symmetry_deviation(&gram);
        if deviation > PRECOMPUTED_TOL * scale {
            return Err(Error::NotSymmetric {
                deviation,
                allowed: PRECOMPUTED_TOL * scale,
            });
        }
        let smallest = SymmetricEigen::new(gram.clone()).eigenvalues.min();
        if smallest < -PRECOMPUTED_TOL * scale {
            return Err(Error::invalid(format!(
                "precomputed Gram matrix is not PSD (smallest eigenvalue {smallest:e})"
            )));
        }
        Ok(Self(gram))
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    fn index(&self, x: &[f64]) -> Result<usize> {
        match x {
            [v] if *v >= 0.0 && v.fract() == 0.0 && (*v as usize) < self.0.nrows() => {
                Ok(*v as usize)
            }
            _ => Err(Error::UnknownInput),
        }
    }
}

impl TryFrom<Matrix> for PrecomputedGram {
    type Error = Error;

    fn try_from(m: Matrix) -> Result<Self> {
        Self::new(m)
    }
}

impl From<PrecomputedGram> for Matrix {
    fn from(g: PrecomputedGram) -> Self {
        g.0
    }
}

impl KernelSpec {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        let spec = KernelSpec::Gaussian { sigma };
        spec.validate()?;
        Ok(spec)
    }

    pub fn precomputed(gram: Matrix) -> Result<Self> {
        Ok(KernelSpec::Precomputed {
            gram: PrecomputedGram::new(gram)?,
        })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            KernelSpec::Gaussian { sigma } if !(sigma.is_finite() && *sigma > 0.0) => Err(
                Error::invalid(format!("gaussian kernel needs sigma > 0, got {sigma}")),
            ),
            _ => Ok(()),
        }
    }

    /// Short label used in reports.
    pub fn family(&self) -> &'static str {
        match self {
            KernelSpec::Gaussian { .. } => "gaussian",
            KernelSpec::Linear => "linear",
            KernelSpec::Precomputed { .. } => "precomputed",
        }
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        match self {
            KernelSpec::Precomputed { gram } => Ok(gram.0[(gram.index(a)?, gram.index(b)?)]),
            _ if a.len() != b.len() => Err(Error::dim(format!(
                "kernel inputs have dimensions {} and {}",
                a.len(),
                b.len()
            ))),
            KernelSpec::Gaussian { sigma } => {
                let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                Ok((-sq / (2.0 * sigma * sigma)).exp())
            }
            KernelSpec::Linear => Ok(a.iter().zip(b).map(|(x, y)| x * y).sum()),
        }
    }
}

fn check_inputs(inputs: &[Vec<f64>]) -> Result<usize> {
    let first = inputs
        .first()
        .ok_or_else(|| Error::dim("no input vectors"))?;
    let dim = first.len();
    if let Some((i, x)) = inputs.iter().enumerate().find(|(_, x)| x.len() != dim) {
        return Err(Error::dim(format!(
            "input {i} has dimension {}, expected {dim}",
            x.len()
        )));
    }
    if !inputs.iter().flatten().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("input vectors"));
    }
    Ok(dim)
}

/// Gram matrix `K(m, n) = k(x_m, x_n)` over `inputs`. Only the upper triangle
/// is evaluated, so the result is exactly symmetric.
pub fn kernel_matrix(spec: &KernelSpec, inputs: &[Vec<f64>]) -> Result<Matrix> {
    spec.validate()?;
    check_inputs(inputs)?;
    let n = inputs.len();
    let mut k = Matrix::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            let v = spec.eval(&inputs[i], &inputs[j])?;
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

/// Kernel vector `k(x)` with entry `n` equal to `k(x_n, x)`.
pub fn kernel_vector(spec: &KernelSpec, inputs: &[Vec<f64>], x: &[f64]) -> Result<Vector> {
    spec.validate()?;
    let dim = check_inputs(inputs)?;
    if !matches!(spec, KernelSpec::Precomputed { .. }) && x.len() != dim {
        return Err(Error::dim(format!(
            "test input has dimension {}, training inputs have {dim}",
            x.len()
        )));
    }
    let mut out = Vector::zeros(inputs.len());
    for (o, xn) in out.iter_mut().zip(inputs) {
        *o = spec.eval(xn, x)?;
    }
    Ok(out)
}

/// Median Euclidean distance over all unordered pairs of distinct inputs;
/// the natural unit for Gaussian bandwidth grids. Returns 1 when there are
/// fewer than two inputs or every pair coincides.
pub fn median_pairwise_distance(inputs: &[Vec<f64>]) -> f64 {
    let mut d: Vec<f64> = Vec::with_capacity(inputs.len() * inputs.len() / 2);
    for (i, a) in inputs.iter().enumerate() {
        for b in &inputs[i + 1..] {
            d.push(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt());
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    let mid = d.len() / 2;
    let median = if d.len() % 2 == 1 {
        d[mid]
    } else {
        0.5 * (d[mid - 1] + d[mid])
    };
    if median > 0.0 {
        median
    } else {
        1.0
    }
}
