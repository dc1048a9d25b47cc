use std::fmt::Write as _;
use std::fs::{self, File};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::monte_carlo::ExperimentResult;

pub const NMSE_FILE: &str = "nmse_by_iteration.csv";
pub const METADATA_FILE: &str = "run_metadata.csv";
pub const PLOT_FILE: &str = "nmse_by_iteration.svg";

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    Ok(csv::Writer::from_writer(file))
}

fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let io = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::io(format!("writing {}", path.display()), e),
        other => Error::invalid(format!("writing {}: {other:?}", path.display())),
    };
    let mut w = writer(path)?;
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// `iteration,N,nmse_db,trials_ok,trials_failed`, one row per (N, iteration).
pub fn write_nmse_csv(path: impl AsRef<Path>, result: &ExperimentResult) -> Result<()> {
    write_rows(
        path.as_ref(),
        &["iteration", "N", "nmse_db", "trials_ok", "trials_failed"],
        result.rows.iter().map(|r| {
            vec![
                r.iteration.to_string(),
                r.n.to_string(),
                r.nmse_db.to_string(),
                r.trials_ok.to_string(),
                r.trials_failed.to_string(),
            ]
        }),
    )
}

/// `key,value` rows: RNG algorithm, config echo (`config.*`), the selected
/// hyperparameters and per-size trial and jitter counts. Contains nothing
/// time- or host-dependent.
pub fn write_metadata_csv(path: impl AsRef<Path>, result: &ExperimentResult) -> Result<()> {
    let sel = &result.selection;
    let mut rows: Vec<(String, String)> = vec![("rng_algorithm".into(), result.rng_algorithm.into())];
    rows.extend(result.config.echo().into_iter().map(|(k, v)| (format!("config.{k}"), v)));
    rows.push(("cv.alpha".into(), sel.outcome.best.alpha.to_string()));
    rows.push(("cv.beta".into(), sel.outcome.best.beta.to_string()));
    rows.push((
        "cv.sigma".into(),
        sel.outcome.best.sigma.map(|s| s.to_string()).unwrap_or_default(),
    ));
    rows.push(("cv.score_db".into(), sel.outcome.best_score.to_string()));
    rows.push(("cv.grid_points".into(), sel.outcome.scores.len().to_string()));
    rows.push(("cv.train_snr_db".into(), sel.train_snr_db.to_string()));
    for s in &result.sizes {
        rows.push((format!("N{}.trials_ok", s.n), s.trials_ok.to_string()));
        rows.push((format!("N{}.trials_failed", s.n), s.trials_failed.to_string()));
        rows.push((format!("N{}.iterations_run", s.n), s.iterations_run.to_string()));
        rows.push((format!("N{}.jitter_events", s.n), s.jitter_events.to_string()));
    }
    let total: usize = result.sizes.iter().map(|s| s.jitter_events).sum();
    rows.push(("jitter_events".into(), total.to_string()));
    rows.push((
        "failure_threshold_exceeded".into(),
        result.failure_threshold_exceeded().to_string(),
    ));
    write_rows(path.as_ref(), &["key", "value"], rows.into_iter().map(|(k, v)| vec![k, v]))
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Line chart of NMSE (dB) against iteration, one line per training size.
pub fn render_svg(result: &ExperimentResult) -> String {
    let (w, h) = (640.0, 400.0);
    let (left, right, top, bottom) = (64.0, 110.0, 24.0, 48.0);
    let finite: Vec<f64> = result.rows.iter().map(|r| r.nmse_db).filter(|v| v.is_finite()).collect();
    let (mut lo, mut hi) = finite
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (lo, hi) = (-1.0, 0.0);
    }
    if hi - lo < 1e-9 {
        lo -= 0.5;
        hi += 0.5;
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let i_max = result.config.i_max.max(2) as f64;
    let px = |it: f64| left + (it - 1.0) / (i_max - 1.0) * (w - left - right);
    let py = |v: f64| top + (hi - v) / (hi - lo) * (h - top - bottom);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let (x0, x1, y0, y1) = (left, w - right, top, h - bottom);
    let _ = writeln!(
        s,
        r#"<path d="M{x0} {y0} L{x0} {y1} L{x1} {y1}" fill="none" stroke="black"/>"#
    );
    for it in 1..=result.config.i_max {
        let x = px(it as f64);
        let _ = writeln!(
            s,
            r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{it}</text>"#,
            y1 + 16.0
        );
    }
    for k in 0..=4 {
        let v = lo + (hi - lo) * k as f64 / 4.0;
        let y = py(v);
        let _ = writeln!(
            s,
            r##"<line x1="{x0}" y1="{y:.1}" x2="{x1}" y2="{y:.1}" stroke="#dddddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{v:.2}</text>"##,
            x0 - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">iteration</text>"#,
        (x0 + x1) / 2.0,
        h - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate(16 {:.1}) rotate(-90)" text-anchor="middle">NMSE (dB)</text>"#,
        (y0 + y1) / 2.0
    );
    for (k, size) in result.sizes.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let points: Vec<String> = result
            .rows
            .iter()
            .filter(|r| r.n == size.n && r.nmse_db.is_finite())
            .map(|r| format!("{:.1},{:.1}", px(r.iteration as f64), py(r.nmse_db)))
            .collect();
        if !points.is_empty() {
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                points.join(" ")
            );
        }
        let ly = top + 16.0 * k as f64 + 8.0;
        let _ = writeln!(
            s,
            r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">N = {}</text>"#,
            x1 + 12.0,
            x1 + 32.0,
            x1 + 38.0,
            ly + 4.0,
            size.n
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn write_svg(path: impl AsRef<Path>, result: &ExperimentResult) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, render_svg(result)).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Writes the CSV outputs (and the chart when `plot` is set) into `dir`,
/// creating it if needed. Returns the paths written.
pub fn write_outputs(dir: impl AsRef<Path>, result: &ExperimentResult, plot: bool) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let mut written = vec![dir.join(NMSE_FILE), dir.join(METADATA_FILE)];
    write_nmse_csv(&written[0], result)?;
    write_metadata_csv(&written[1], result)?;
    if plot {
        let svg = dir.join(PLOT_FILE);
        write_svg(&svg, result)?;
        written.push(svg);
    }
    Ok(written)
}
