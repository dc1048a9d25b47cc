//! Sparse corruption of training targets.
//!
//! Each observation (row) independently gets `round(fraction · M)` distinct
//! nodes, drawn uniformly without replacement, that are either zeroed
//! (missing samples) or multiplied by a constant factor (large
//! perturbations). All other entries are left bit-identical.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Missing,
    Scaling,
}

impl std::str::FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "missing" => Ok(NoiseKind::Missing),
            "scaling" => Ok(NoiseKind::Scaling),
            other => Err(Error::invalid(format!(
                "unknown noise kind {other:?} (expected \"missing\" or \"scaling\")"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub fraction: f64,
    /// Multiplier for [`NoiseKind::Scaling`]; ignored for missing samples.
    pub scale_factor: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn missing(fraction: f64, seed: u64) -> Self {
        Self {
            kind: NoiseKind::Missing,
            fraction,
            scale_factor: 1.0,
            seed,
        }
    }

    pub fn scaling(fraction: f64, factor: f64, seed: u64) -> Self {
        Self {
            kind: NoiseKind::Scaling,
            fraction,
            scale_factor: factor,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_fraction(self.fraction)?;
        if !self.scale_factor.is_finite() {
            return Err(Error::invalid("scale factor must be finite"));
        }
        Ok(())
    }

    /// Corrupts `clean` using the supplied generator.
    pub fn apply<R: Rng + ?Sized>(&self, clean: &Matrix, rng: &mut R) -> Result<Matrix> {
        self.validate()?;
        match self.kind {
            NoiseKind::Missing => inject_missing(clean, self.fraction, rng),
            NoiseKind::Scaling => inject_scaling(clean, self.fraction, self.scale_factor, rng),
        }
    }

    /// Corrupts `clean` using stream 0 of this spec's own seed.
    pub fn apply_seeded(&self, clean: &Matrix) -> Result<Matrix> {
        self.apply(clean, &mut stream_rng(self.seed, 0))
    }
}

fn check_fraction(fraction: f64) -> Result<()> {
    if (0.0..=1.0).contains(&fraction) {
        Ok(())
    } else {
        Err(Error::invalid(format!("fraction must lie in [0, 1], got {fraction}")))
    }
}

/// Number of nodes corrupted per observation: `fraction · m` rounded half up.
pub fn corrupted_count(fraction: f64, m: usize) -> usize {
    ((fraction * m as f64 + 0.5).floor() as usize).min(m)
}

fn corrupt_rows<R: Rng + ?Sized>(
    clean: &Matrix,
    fraction: f64,
    rng: &mut R,
    mut f: impl FnMut(f64) -> f64,
) -> Result<Matrix> {
    check_fraction(fraction)?;
    let (n, m) = clean.shape();
    let count = corrupted_count(fraction, m);
    let mut out = clean.clone();
    for row in 0..n {
        for node in sample(rng, m, count) {
            out[(row, node)] = f(out[(row, node)]);
        }
    }
    Ok(out)
}

/// Zeroes `round(fraction · M)` random nodes of every row.
pub fn inject_missing<R: Rng + ?Sized>(clean: &Matrix, fraction: f64, rng: &mut R) -> Result<Matrix> {
    corrupt_rows(clean, fraction, rng, |_| 0.0)
}

/// Multiplies `round(fraction · M)` random nodes of every row by `factor`.
pub fn inject_scaling<R: Rng + ?Sized>(
    clean: &Matrix,
    fraction: f64,
    factor: f64,
    rng: &mut R,
) -> Result<Matrix> {
    if !factor.is_finite() {
        return Err(Error::invalid("scale factor must be finite"));
    }
    corrupt_rows(clean, fraction, rng, |v| v * factor)
}

/// Signal-to-noise ratio `10 log₁₀(|T₀|² / |T - T₀|²)` in dB; `+∞` when the
/// two matrices are equal.
pub fn snr_db(clean: &Matrix, noisy: &Matrix) -> Result<f64> {
    if clean.shape() != noisy.shape() {
        return Err(Error::dim(format!(
            "clean targets are {:?}, noisy targets are {:?}",
            clean.shape(),
            noisy.shape()
        )));
    }
    let signal = clean.norm_squared();
    if signal == 0.0 {
        return Err(Error::invalid("clean signal is identically zero"));
    }
    let noise = (noisy - clean).norm_squared();
    if noise == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (signal / noise).log10())
}
