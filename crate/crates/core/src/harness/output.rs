use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::config::Mode;
use super::metrics::RunSummary;
use super::sim::TimeSeries;
use super::sweep::{BaselineComparison, SweepRow};
use super::HarnessError;

const PLANAR_AXES: [&str; 2] = ["x", "y"];
const SPATIAL_AXES: [&str; 6] = ["fx", "fy", "fz", "tx", "ty", "tz"];

fn io_err(path: &Path, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Io(format!("{}: {e}", path.display()))
}

pub fn csv_header(mode: Mode) -> Vec<String> {
    match mode {
        Mode::Planar => ["t", "robot", "ex", "ey", "hx", "hy", "href_x", "href_y", "err_norm", "ux", "uy"]
            .into_iter()
            .map(String::from)
            .collect(),
        Mode::Embodied => {
            let mut h: Vec<String> = ["t", "robot", "ex", "ey", "ez", "ewx", "ewy", "ewz"].into_iter().map(String::from).collect();
            h.extend(SPATIAL_AXES.iter().map(|a| format!("h{a}")));
            h.extend(SPATIAL_AXES.iter().map(|a| format!("href_{a}")));
            h.push("err_norm".into());
            h.extend((1..=6).map(|j| format!("u{j}")));
            h
        }
    }
}

/// Long-format time series: one row per robot per step.
pub fn write_csv<W: Write>(series: &TimeSeries, out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| HarnessError::Io(e.to_string());
    w.write_record(csv_header(series.mode)).map_err(csv_err)?;
    for rec in &series.records {
        for (i, r) in rec.robots.iter().enumerate() {
            let mut row = vec![rec.t.to_string(), i.to_string()];
            row.extend(r.e.iter().map(f64::to_string));
            row.extend(r.h.iter().map(f64::to_string));
            row.extend(r.h_ref.iter().map(f64::to_string));
            row.push(r.err_norm.to_string());
            row.extend(r.u.iter().map(f64::to_string));
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| HarnessError::Io(e.to_string()))
}

fn write_text(path: &Path, text: &str) -> Result<PathBuf, HarnessError> {
    fs::write(path, text).map_err(|e| io_err(path, e))?;
    Ok(path.to_path_buf())
}

fn json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("plain data serializes")
}

/// Writes `timeseries.csv`, `summary.json` and gnuplot data files
/// (`error_norm.dat`, one `wrench_<axis>.dat` per task axis and
/// `lyapunov.dat` when recorded) into `dir`.
pub fn emit_outputs(series: &TimeSeries, summary: &RunSummary, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut written = Vec::new();

    let csv_path = dir.join("timeseries.csv");
    let file = fs::File::create(&csv_path).map_err(|e| io_err(&csv_path, e))?;
    write_csv(series, std::io::BufWriter::new(file))?;
    written.push(csv_path);
    written.push(write_text(&dir.join("summary.json"), &json(summary))?);

    let robots: Vec<String> = (0..series.n).map(|i| format!("robot{i}")).collect();
    let mut norms = format!("# t {} max\n", robots.join(" "));
    for rec in &series.records {
        let cols: Vec<String> = rec.robots.iter().map(|r| r.err_norm.to_string()).collect();
        norms.push_str(&format!("{} {} {}\n", rec.t, cols.join(" "), rec.max_error));
    }
    written.push(write_text(&dir.join("error_norm.dat"), &norms)?);

    let axes: &[&str] = if series.dim == 2 { &PLANAR_AXES } else { &SPATIAL_AXES };
    for (a, name) in axes.iter().enumerate() {
        let mut text = format!("# t {} (h - h_ref along {name})\n", robots.join(" "));
        for rec in &series.records {
            let cols: Vec<String> = rec.robots.iter().map(|r| (r.h[a] - r.h_ref[a]).to_string()).collect();
            text.push_str(&format!("{} {}\n", rec.t, cols.join(" ")));
        }
        written.push(write_text(&dir.join(format!("wrench_{name}.dat")), &text)?);
    }

    if series.records.iter().any(|r| r.lyapunov.is_some()) {
        let mut text = String::from("# t V V1 V2 V3\n");
        for l in series.records.iter().filter_map(|r| r.lyapunov) {
            text.push_str(&format!("{} {} {} {} {}\n", l.t, l.v, l.v1, l.v2, l.v3));
        }
        written.push(write_text(&dir.join("lyapunov.dat"), &text)?);
    }
    Ok(written)
}

/// `sweep.json` and `sweep.dat` (bound, mean convergence time, mean
/// steady-state error, converged repeats).
pub fn emit_sweep(rows: &[SweepRow], dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let fmt = |x: Option<f64>| x.map_or_else(|| "nan".to_string(), |v| v.to_string());
    let mut text = String::from("# bound mean_convergence_time mean_steady_state_error converged repeats\n");
    for r in rows {
        text.push_str(&format!(
            "{} {} {} {} {}\n",
            r.bound,
            fmt(r.mean_convergence_time),
            fmt(r.mean_steady_state_error),
            r.converged,
            r.repeats
        ));
    }
    Ok(vec![write_text(&dir.join("sweep.json"), &json(&rows))?, write_text(&dir.join("sweep.dat"), &text)?])
}

/// `compare.json` plus `compare.dat` with the max-error traces of the
/// proposed, leader-follower and uncorrected runs.
pub fn emit_comparison(
    comparison: &BaselineComparison,
    proposed: &TimeSeries,
    leader_follower: &TimeSeries,
    uncorrected: &TimeSeries,
    dir: &Path,
) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut text = String::from("# t proposed leader_follower uncorrected\n");
    for ((p, l), u) in proposed.records.iter().zip(&leader_follower.records).zip(&uncorrected.records) {
        text.push_str(&format!("{} {} {} {}\n", p.t, p.max_error, l.max_error, u.max_error));
    }
    Ok(vec![write_text(&dir.join("compare.json"), &json(comparison))?, write_text(&dir.join("compare.dat"), &text)?])
}
