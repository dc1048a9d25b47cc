//! Dense matrix primitives: Kronecker products, column-major vectorization
//! and symmetric positive (semi)definite solves.
//!
//! Matrices are `nalgebra` dense matrices, which store entries column-major;
//! [`vec`] and [`mat`] therefore reduce to slice copies, but their ordering
//! is part of the contract and is tested independently of the storage.

use faer::linalg::solvers::Solve;
use faer::{MatRef, Side};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Largest matrix (in entries) that [`kronecker`] and the system assemblers
/// will materialize. 2^27 doubles is 1 GiB.
pub const MAX_DENSE_ENTRIES: usize = 1 << 27;

const SYMMETRY_TOL: f64 = 1e-8;
const RESIDUAL_TOL: f64 = 1e-8;
const JITTER_SCALE: f64 = 1e-10;

pub(crate) fn check_capacity(rows: usize, cols: usize) -> Result<()> {
    match rows.checked_mul(cols) {
        Some(entries) if entries <= MAX_DENSE_ENTRIES => Ok(()),
        Some(entries) => Err(Error::TooLarge {
            entries,
            cap: MAX_DENSE_ENTRIES,
        }),
        None => Err(Error::TooLarge {
            entries: usize::MAX,
            cap: MAX_DENSE_ENTRIES,
        }),
    }
}

pub(crate) fn ensure_finite(m: &Matrix, what: &'static str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Kronecker product `a ⊗ b`: block `(i, j)` of the result is `a[(i, j)] * b`.
pub fn kronecker(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let (m, n) = a.shape();
    let (p, q) = b.shape();
    check_capacity(m * p, n * q)?;
    let mut out = Matrix::zeros(m * p, n * q);
    for j in 0..n {
        for i in 0..m {
            let aij = a[(i, j)];
            if aij == 0.0 {
                continue;
            }
            let mut block = out.view_mut((i * p, j * q), (p, q));
            block.zip_apply(b, |o, bv| *o = aij * bv);
        }
    }
    Ok(out)
}

/// Stacks the columns of `x` top to bottom.
pub fn vec(x: &Matrix) -> Vector {
    let mut out = Vector::zeros(x.len());
    let rows = x.nrows();
    for (j, col) in x.column_iter().enumerate() {
        out.rows_mut(j * rows, rows).copy_from(&col);
    }
    out
}

/// Inverse of [`vec`]: consecutive runs of `rows` entries become columns.
pub fn mat(v: &[f64], rows: usize, cols: usize) -> Result<Matrix> {
    if rows.checked_mul(cols) != Some(v.len()) {
        return Err(Error::dim(format!(
            "cannot reshape {} entries into {rows}x{cols}",
            v.len()
        )));
    }
    Ok(Matrix::from_column_slice(rows, cols, v))
}

/// Largest absolute entry of `s - sᵀ`.
pub fn symmetry_deviation(s: &Matrix) -> f64 {
    const TILE: usize = 64;
    let n = s.nrows();
    let a = s.as_slice();
    let mut worst = 0.0f64;
    // Tiled so that both the column and the row access stay in cache.
    for jb in (0..n).step_by(TILE) {
        for ib in (jb..n).step_by(TILE) {
            for j in jb..(jb + TILE).min(n) {
                let col = &a[j * n..(j + 1) * n];
                for i in ib.max(j + 1)..(ib + TILE).min(n) {
                    let d = (col[i] - a[j + i * n]).abs();
                    if d > worst {
                        worst = d;
                    }
                }
            }
        }
    }
    worst
}

/// Largest absolute value, or `None` if any entry is NaN or infinite.
/// Written with independent lanes so the compiler can vectorize it.
fn finite_max_abs(a: &[f64]) -> Option<f64> {
    const LANES: usize = 8;
    let mut top = [0.0f64; LANES];
    // `v - v` is 0 for finite `v` and NaN otherwise.
    let mut poison = [0.0f64; LANES];
    let chunks = a.chunks_exact(LANES);
    let rest = chunks.remainder();
    for c in chunks {
        for k in 0..LANES {
            top[k] = top[k].max(c[k].abs());
            poison[k] += c[k] - c[k];
        }
    }
    for (k, &v) in rest.iter().enumerate() {
        top[k] = top[k].max(v.abs());
        poison[k] += v - v;
    }
    let max = top.iter().fold(0.0f64, |m, &v| m.max(v));
    (poison.iter().all(|&p| p == 0.0) && max.is_finite()).then_some(max)
}

pub(crate) fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// Result of [`solve_psd`].
#[derive(Debug, Clone)]
pub struct PsdSolution {
    pub x: Vector,
    /// Diagonal shift that had to be added to the system, if any.
    pub jitter: Option<f64>,
}

impl PsdSolution {
    pub fn jittered(&self) -> bool {
        self.jitter.is_some()
    }
}

/// Solves `s x = b` for symmetric positive semidefinite `s`.
///
/// A Cholesky factorization is tried first and its residual is checked
/// against `1e-8 * max(1, |b|)`. If the factorization breaks down or the
/// residual is too large the system is treated as (near) singular and
/// `(s + jitter I) x = b` is solved instead, with
/// `jitter = 1e-10 * trace(s) / n`; the shift is reported in the result.
pub fn solve_psd(s: &Matrix, b: &Vector) -> Result<PsdSolution> {
    let n = s.nrows();
    if s.ncols() != n {
        return Err(Error::dim(format!(
            "system matrix is {}x{}, expected square",
            n,
            s.ncols()
        )));
    }
    if b.len() != n {
        return Err(Error::dim(format!(
            "right-hand side has length {}, system has order {n}",
            b.len()
        )));
    }
    if n == 0 {
        return Err(Error::dim("empty system"));
    }
    let scale = finite_max_abs(s.as_slice()).ok_or(Error::NonFinite("system matrix"))?;
    if !b.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("right-hand side"));
    }
    let allowed = SYMMETRY_TOL * scale.max(f64::MIN_POSITIVE);
    let deviation = symmetry_deviation(s);
    if deviation > allowed {
        return Err(Error::NotSymmetric { deviation, allowed });
    }

    let tol = RESIDUAL_TOL * b.norm().max(1.0);
    if let Some(x) = cholesky_solve(s, b) {
        if (s * &x - b).norm() <= tol {
            return Ok(PsdSolution { x, jitter: None });
        }
    }

    let jitter = JITTER_SCALE * s.trace() / n as f64;
    if !(jitter > 0.0 && jitter.is_finite()) {
        return Err(Error::Singular);
    }
    let mut shifted = s.clone();
    for i in 0..n {
        shifted[(i, i)] += jitter;
    }
    let x = cholesky_solve(&shifted, b).ok_or(Error::Singular)?;
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::Singular);
    }
    Ok(PsdSolution {
        x,
        jitter: Some(jitter),
    })
}

fn cholesky_solve(s: &Matrix, b: &Vector) -> Option<Vector> {
    let n = s.nrows();
    let view = MatRef::from_column_major_slice(s.as_slice(), n, n);
    let llt = view.llt(Side::Lower).ok()?;
    let rhs = MatRef::from_column_major_slice(b.as_slice(), n, 1);
    let sol = llt.solve(rhs);
    let x = Vector::from_fn(n, |i, _| sol[(i, 0)]);
    x.iter().all(|v| v.is_finite()).then_some(x)
}
