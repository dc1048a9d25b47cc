//! Datasets: a node table with coordinates and a daily signal series over
//! those nodes, plus next-day pair construction and a synthetic generator.
//!
//! File formats (UTF-8, `.` decimal separator):
//!
//! - nodes: header `id,name,lat,lon`, one row per node, ids `0..M`.
//! - signals: header `date,v0,v1,...,v{M-1}`, one row per day, dates in
//!   strictly increasing order. Dates are opaque labels (ISO-8601 by
//!   convention); only their ordering is used.

use std::fs::File;
use std::path::Path;

use chrono::{Days, NaiveDate};
use nalgebra::SymmetricEigen;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{adjacency_from_distances, build_graph, geodesic_distances, Graph};
use crate::linalg::{Matrix, Vector};
use crate::rng::stream_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
    pub name: String,
    pub lat: f64,
    pub lon: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeTable {
    nodes: Vec<Node>,
}

impl NodeTable {
    /// Validates ids (unique, exactly `0..M` in some order) and coordinates,
    /// and sorts the nodes by id.
    pub fn new(mut nodes: Vec<Node>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::invalid("node table is empty"));
        }
        nodes.sort_by_key(|n| n.id);
        for pair in nodes.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(Error::invalid(format!("duplicate node id {}", pair[0].id)));
            }
        }
        if let Some((i, n)) = nodes.iter().enumerate().find(|(i, n)| n.id != *i) {
            return Err(Error::invalid(format!(
                "node ids must be contiguous from 0; expected {i}, found {}",
                n.id
            )));
        }
        for n in &nodes {
            if !(-90.0..=90.0).contains(&n.lat) || !(-180.0..=180.0).contains(&n.lon) {
                return Err(Error::invalid(format!(
                    "node {} has out-of-range coordinates ({}, {})",
                    n.id, n.lat, n.lon
                )));
            }
        }
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn coordinates(&self) -> Vec<(f64, f64)> {
        self.nodes.iter().map(|n| (n.lat, n.lon)).collect()
    }

    /// Graph with Gaussian-of-geodesic-distance edge weights.
    pub fn geodesic_graph(&self) -> Result<Graph> {
        let dist = geodesic_distances(&self.coordinates())?;
        build_graph(adjacency_from_distances(&dist)?)
    }
}

/// Daily values over the graph nodes; row `t` of `values` is day `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSeries {
    dates: Vec<String>,
    values: Matrix,
    pub units: Option<String>,
}

impl SignalSeries {
    pub fn new(dates: Vec<String>, values: Matrix) -> Result<Self> {
        if dates.len() != values.nrows() {
            return Err(Error::dim(format!(
                "{} dates but {} rows of values",
                dates.len(),
                values.nrows()
            )));
        }
        if let Some(w) = dates.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::invalid(format!(
                "dates must be strictly increasing: {:?} is followed by {:?}",
                w[0], w[1]
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("signal values"));
        }
        Ok(Self {
            dates,
            values,
            units: None,
        })
    }

    pub fn dates(&self) -> &[String] {
        &self.dates
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.values.ncols()
    }

    pub fn day(&self, t: usize) -> Vec<f64> {
        self.values.row(t).iter().copied().collect()
    }
}

fn open_csv(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).from_reader(file))
}

fn csv_error(path: &Path, line: u64, err: csv::Error) -> Error {
    let line = err.position().map(|p| p.line()).unwrap_or(line);
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: err.to_string(),
    }
}

fn parse_error(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_f64(path: &Path, line: u64, field: &str, what: &str) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| parse_error(path, line, format!("{what}: cannot parse {field:?} as a number")))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(parse_error(path, line, format!("{what}: non-finite value {field:?}")))
    }
}

pub fn load_nodes(path: impl AsRef<Path>) -> Result<NodeTable> {
    let path = path.as_ref();
    let mut reader = open_csv(path)?;
    let header = reader.headers().map_err(|e| csv_error(path, 1, e))?.clone();
    let fields: Vec<&str> = header.iter().map(str::trim).collect();
    if fields != ["id", "name", "lat", "lon"] {
        return Err(parse_error(path, 1, format!("expected header id,name,lat,lon, found {}", fields.join(","))));
    }
    let mut nodes = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let line = k as u64 + 2;
        let record = record.map_err(|e| csv_error(path, line, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(line);
        if record.len() != 4 {
            return Err(parse_error(path, line, format!("expected 4 columns, found {}", record.len())));
        }
        let id = record[0]
            .trim()
            .parse()
            .map_err(|_| parse_error(path, line, format!("invalid node id {:?}", &record[0])))?;
        nodes.push(Node {
            id,
            name: record[1].to_string(),
            lat: parse_f64(path, line, &record[2], "lat")?,
            lon: parse_f64(path, line, &record[3], "lon")?,
        });
    }
    NodeTable::new(nodes).map_err(|e| parse_error(path, 0, e.to_string()))
}

/// Reads a signals CSV. The node count is taken from the header.
pub fn load_signals(path: impl AsRef<Path>) -> Result<SignalSeries> {
    let path = path.as_ref();
    let mut reader = open_csv(path)?;
    let header = reader.headers().map_err(|e| csv_error(path, 1, e))?.clone();
    if header.is_empty() || header[0].trim() != "date" {
        return Err(parse_error(path, 1, "first column must be named date"));
    }
    let m = header.len() - 1;
    if m == 0 {
        return Err(parse_error(path, 1, "no value columns"));
    }
    for (i, name) in header.iter().skip(1).enumerate() {
        if name.trim() != format!("v{i}") {
            return Err(parse_error(path, 1, format!("column {} must be named v{i}, found {name:?}", i + 1)));
        }
    }
    let mut dates = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let line = k as u64 + 2;
        let record = record.map_err(|e| csv_error(path, line, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(line);
        if record.len() != m + 1 {
            return Err(parse_error(
                path,
                line,
                format!("row has {} columns, expected {}", record.len(), m + 1),
            ));
        }
        let date = record[0].trim().to_string();
        if let Some(prev) = dates.last() {
            if &date <= prev {
                return Err(parse_error(path, line, format!("date {date:?} does not follow {prev:?}")));
            }
        }
        dates.push(date);
        for (i, field) in record.iter().skip(1).enumerate() {
            values.push(parse_f64(path, line, field, &format!("v{i}"))?);
        }
    }
    if dates.is_empty() {
        return Err(parse_error(path, 2, "no data rows"));
    }
    let values = Matrix::from_row_slice(dates.len(), m, &values);
    SignalSeries::new(dates, values)
}

/// Loads both files and checks that they agree on the node count.
pub fn load_dataset(
    nodes_path: impl AsRef<Path>,
    signals_path: impl AsRef<Path>,
) -> Result<(NodeTable, SignalSeries)> {
    let nodes = load_nodes(nodes_path)?;
    let signals = load_signals(signals_path)?;
    if nodes.len() != signals.node_count() {
        return Err(Error::dim(format!(
            "node table has {} nodes, signals have {} columns",
            nodes.len(),
            signals.node_count()
        )));
    }
    Ok((nodes, signals))
}

fn create_csv(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    Ok(csv::Writer::from_writer(file))
}

fn write_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(format!("writing {}", path.display()), io),
        other => Error::invalid(format!("writing {}: {other:?}", path.display())),
    }
}

pub fn write_nodes(path: impl AsRef<Path>, table: &NodeTable) -> Result<()> {
    let path = path.as_ref();
    let mut w = create_csv(path)?;
    w.write_record(["id", "name", "lat", "lon"]).map_err(write_err(path))?;
    for n in table.nodes() {
        w.write_record([n.id.to_string(), n.name.clone(), n.lat.to_string(), n.lon.to_string()])
            .map_err(write_err(path))?;
    }
    w.flush().map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Writes a signals CSV. Values use the shortest representation that
/// round-trips exactly.
pub fn write_signals(path: impl AsRef<Path>, series: &SignalSeries) -> Result<()> {
    let path = path.as_ref();
    let mut w = create_csv(path)?;
    let mut header = vec!["date".to_string()];
    header.extend((0..series.node_count()).map(|i| format!("v{i}")));
    w.write_record(&header).map_err(write_err(path))?;
    for (t, date) in series.dates().iter().enumerate() {
        let mut row = vec![date.clone()];
        row.extend(series.values().row(t).iter().map(f64::to_string));
        w.write_record(&row).map_err(write_err(path))?;
    }
    w.flush().map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// A next-day regression pair: today's values predict tomorrow's.
#[derive(Debug, Clone, PartialEq)]
pub struct Pair {
    /// Date of the input day.
    pub date: String,
    pub input: Vec<f64>,
    pub target: Vec<f64>,
}

/// Pair `n` is `(day n, day n + 1)`, giving `len - 1` pairs.
pub fn make_pairs(series: &SignalSeries) -> Result<Vec<Pair>> {
    if series.len() < 2 {
        return Err(Error::invalid(format!(
            "need at least 2 days to form pairs, got {}",
            series.len()
        )));
    }
    Ok((0..series.len() - 1)
        .map(|t| Pair {
            date: series.dates()[t].clone(),
            input: series.day(t),
            target: series.day(t + 1),
        })
        .collect())
}

/// Chronological split: the first `n_train` pairs train, the rest test.
pub fn split_train_test(pairs: &[Pair], n_train: usize) -> Result<(Vec<Pair>, Vec<Pair>)> {
    if n_train == 0 || n_train >= pairs.len() {
        return Err(Error::invalid(format!(
            "training size must be in 1..{}, got {n_train}",
            pairs.len()
        )));
    }
    Ok((pairs[..n_train].to_vec(), pairs[n_train..].to_vec()))
}

pub fn pair_inputs(pairs: &[Pair]) -> Vec<Vec<f64>> {
    pairs.iter().map(|p| p.input.clone()).collect()
}

/// Targets stacked as rows.
pub fn pair_targets(pairs: &[Pair]) -> Matrix {
    let m = pairs.first().map_or(0, |p| p.target.len());
    Matrix::from_fn(pairs.len(), m, |r, c| pairs[r].target[c])
}

/// Parameters of [`synth_dataset`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub days: usize,
    /// Number of lowest-frequency Laplacian eigenvectors spanning the signal.
    pub bandwidth: usize,
    /// Day-to-day AR(1) correlation, in `[0, 1)`.
    pub rho: f64,
    /// Standard deviation of white noise added on every node and day.
    pub noise_floor: f64,
    /// Constant added to every value (e.g. a mean temperature).
    pub offset: f64,
    /// Multiplier applied to the generated field before the offset.
    pub amplitude: f64,
    pub seed: u64,
    pub start_date: String,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            days: 92,
            bandwidth: 5,
            rho: 0.8,
            noise_floor: 0.05,
            offset: 0.0,
            amplitude: 1.0,
            seed: 0,
            start_date: "2017-09-01".to_string(),
        }
    }
}

/// Generates `z_t = ρ z_{t-1} + √(1-ρ²) U c_t + σ₀ ε_t`, where the columns of
/// `U` are the `bandwidth` Laplacian eigenvectors with the smallest
/// eigenvalues and `c_t`, `ε_t` are standard normal. The series starts from
/// `z_0 = U c_0 + σ₀ ε_0` and reports `offset + amplitude · z_t`.
pub fn synth_dataset(graph: &Graph, params: &SynthParams) -> Result<SignalSeries> {
    let m = graph.node_count();
    if params.bandwidth == 0 || params.bandwidth > m {
        return Err(Error::invalid(format!(
            "bandwidth must be in 1..={m}, got {}",
            params.bandwidth
        )));
    }
    if !(0.0..1.0).contains(&params.rho) {
        return Err(Error::invalid(format!("rho must be in [0, 1), got {}", params.rho)));
    }
    if !(params.noise_floor >= 0.0 && params.noise_floor.is_finite()) {
        return Err(Error::invalid("noise floor must be finite and >= 0"));
    }
    if params.days == 0 {
        return Err(Error::invalid("days must be at least 1"));
    }
    let start = NaiveDate::parse_from_str(&params.start_date, "%Y-%m-%d")
        .map_err(|e| Error::invalid(format!("start date {:?}: {e}", params.start_date)))?;

    let basis = low_frequency_basis(graph, params.bandwidth)?;
    let mut rng = stream_rng(params.seed, 0);
    let innovation = (1.0 - params.rho * params.rho).sqrt();
    let mut z = Vector::zeros(m);
    let mut values = Matrix::zeros(params.days, m);
    let mut dates = Vec::with_capacity(params.days);
    for t in 0..params.days {
        let c = Vector::from_fn(params.bandwidth, |_, _| rng.sample::<f64, _>(StandardNormal));
        let eps = Vector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
        let (carry, gain) = if t == 0 { (0.0, 1.0) } else { (params.rho, innovation) };
        z = &z * carry + &basis * c * gain + eps * params.noise_floor;
        values
            .row_mut(t)
            .tr_copy_from(&z.map(|v| params.offset + params.amplitude * v));
        let date = start
            .checked_add_days(Days::new(t as u64))
            .ok_or_else(|| Error::invalid("date overflow"))?;
        dates.push(date.format("%Y-%m-%d").to_string());
    }
    SignalSeries::new(dates, values)
}

fn low_frequency_basis(graph: &Graph, bandwidth: usize) -> Result<Matrix> {
    let m = graph.node_count();
    let eig = SymmetricEigen::try_new(graph.laplacian().clone(), 1e-14, 10_000)
        .ok_or_else(|| Error::invalid("Laplacian eigendecomposition did not converge"))?;
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let mut basis = Matrix::zeros(m, bandwidth);
    for (col, &idx) in order.iter().take(bandwidth).enumerate() {
        let mut v = eig.eigenvectors.column(idx).into_owned();
        // Fix the sign so the basis does not depend on solver conventions.
        let pivot = v.iter().copied().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if pivot < 0.0 {
            v.neg_mut();
        }
        basis.column_mut(col).copy_from(&v);
    }
    Ok(basis)
}

/// Random node coordinates in a latitude/longitude box roughly covering
/// Sweden, for desk-scale stand-ins of a real station network.
pub fn random_node_table(m: usize, seed: u64) -> Result<NodeTable> {
    let mut rng = stream_rng(seed, 1);
    let nodes = (0..m)
        .map(|id| Node {
            id,
            name: format!("node-{id:02}"),
            lat: rng.random_range(55.3..69.0),
            lon: rng.random_range(11.0..24.0),
        })
        .collect();
    NodeTable::new(nodes)
}
