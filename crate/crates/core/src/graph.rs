//! Undirected weighted graphs over the output nodes.

use crate::error::{Error, Result};
use crate::linalg::{max_abs, symmetry_deviation, Matrix, Vector};

/// Mean Earth radius used by [`haversine_km`].
pub const EARTH_RADIUS_KM: f64 = 6371.0;

const ASYMMETRY_TOL: f64 = 1e-9;

/// A validated adjacency matrix together with its combinatorial Laplacian
/// `L = D - A`.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    adjacency: Matrix,
    laplacian: Matrix,
}

impl Graph {
    /// Validates `adjacency` and builds the Laplacian.
    ///
    /// Weights must be finite and nonnegative with a zero diagonal. An
    /// asymmetry of at most `1e-9` relative to the largest weight is removed
    /// by averaging with the transpose; anything larger is rejected.
    pub fn from_adjacency(adjacency: Matrix) -> Result<Self> {
        let m = adjacency.nrows();
        if adjacency.ncols() != m {
            return Err(Error::InvalidGraph(format!(
                "adjacency is {}x{}, expected square",
                m,
                adjacency.ncols()
            )));
        }
        if m == 0 {
            return Err(Error::InvalidGraph("graph has no nodes".into()));
        }
        if !adjacency.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidGraph("non-finite edge weight".into()));
        }
        if let Some(i) = (0..m).find(|&i| adjacency[(i, i)] != 0.0) {
            return Err(Error::InvalidGraph(format!(
                "self-loop at node {i} (weight {})",
                adjacency[(i, i)]
            )));
        }
        if let Some(((i, j), w)) = adjacency
            .iter()
            .enumerate()
            .map(|(k, w)| ((k % m, k / m), *w))
            .find(|(_, w)| *w < 0.0)
        {
            return Err(Error::InvalidGraph(format!(
                "negative weight {w} on edge ({i}, {j})"
            )));
        }

        let deviation = symmetry_deviation(&adjacency);
        let adjacency = if deviation == 0.0 {
            adjacency
        } else if deviation <= ASYMMETRY_TOL * max_abs(&adjacency) {
            (&adjacency + adjacency.transpose()) * 0.5
        } else {
            return Err(Error::InvalidGraph(format!(
                "adjacency is asymmetric (max deviation {deviation:e})"
            )));
        };

        let degrees = adjacency.column_sum();
        let mut laplacian = -&adjacency;
        for i in 0..m {
            laplacian[(i, i)] = degrees[i];
        }
        Ok(Self {
            adjacency,
            laplacian,
        })
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn adjacency(&self) -> &Matrix {
        &self.adjacency
    }

    pub fn laplacian(&self) -> &Matrix {
        &self.laplacian
    }

    pub fn degrees(&self) -> Vector {
        self.laplacian.diagonal()
    }

    /// The Laplacian quadratic form `yᵀ L y`, i.e. the sum over undirected
    /// edges of `A(i, j) (y(i) - y(j))²`.
    pub fn smoothness(&self, y: &[f64]) -> Result<f64> {
        let m = self.node_count();
        if y.len() != m {
            return Err(Error::dim(format!(
                "signal has length {}, graph has {m} nodes",
                y.len()
            )));
        }
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("graph signal"));
        }
        let y = Vector::from_column_slice(y);
        Ok(y.dot(&(&self.laplacian * &y)).max(0.0))
    }
}

/// Free-function form of [`Graph::from_adjacency`].
pub fn build_graph(adjacency: Matrix) -> Result<Graph> {
    Graph::from_adjacency(adjacency)
}

/// Great-circle distance in km between two `(latitude, longitude)` points
/// given in degrees.
pub fn haversine_km((lat1, lon1): (f64, f64), (lat2, lon2): (f64, f64)) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Pairwise haversine distances (km) between `(latitude, longitude)` points.
pub fn geodesic_distances(coords: &[(f64, f64)]) -> Result<Matrix> {
    for (i, &(lat, lon)) in coords.iter().enumerate() {
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            return Err(Error::invalid(format!(
                "coordinate {i} out of range: ({lat}, {lon})"
            )));
        }
    }
    let m = coords.len();
    let mut dist = Matrix::zeros(m, m);
    for i in 0..m {
        for j in (i + 1)..m {
            let d = haversine_km(coords[i], coords[j]);
            dist[(i, j)] = d;
            dist[(j, i)] = d;
        }
    }
    Ok(dist)
}

/// Gaussian-of-distance adjacency `A(i, j) = exp(-d(i, j)² / S)`, where `S`
/// sums `d²` over all ordered pairs `i != j`. The diagonal is zero.
pub fn adjacency_from_distances(dist: &Matrix) -> Result<Matrix> {
    let m = dist.nrows();
    if dist.ncols() != m {
        return Err(Error::dim(format!(
            "distance matrix is {}x{}, expected square",
            m,
            dist.ncols()
        )));
    }
    if !dist.iter().all(|d| d.is_finite() && *d >= 0.0) {
        return Err(Error::invalid("distances must be finite and nonnegative"));
    }
    if symmetry_deviation(dist) > ASYMMETRY_TOL * max_abs(dist) {
        return Err(Error::invalid("distance matrix is not symmetric"));
    }
    if (0..m).any(|i| dist[(i, i)] != 0.0) {
        return Err(Error::invalid("distance matrix has a nonzero diagonal"));
    }
    let normalizer: f64 = dist.iter().map(|d| d * d).sum();
    if normalizer <= 0.0 {
        return Err(Error::invalid(
            "all distances are zero; adjacency normalizer is undefined",
        ));
    }
    Ok(Matrix::from_fn(m, m, |i, j| {
        if i == j {
            0.0
        } else {
            let d = 0.5 * (dist[(i, j)] + dist[(j, i)]);
            (-d * d / normalizer).exp()
        }
    }))
}
