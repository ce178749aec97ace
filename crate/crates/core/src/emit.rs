//! Report output: one JSON document, CSV tables, and columnar plot data.

use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

use crate::run::RunOutput;
use crate::spectral::{hermite_gauss_mode, SpectralError};
use crate::squeezing::mode_variances;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, clap::ValueEnum)]
pub enum Format {
    Json,
    CsvTables,
    PlotData,
}

#[derive(Debug, Error)]
pub enum EmitError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("{path}: non-finite value in column {column}")]
    NonFinite { path: String, column: String },
}

/// Modes written to the waveform file.
const WAVEFORM_MODES: usize = 4;

/// Writes `format` into `dir` and returns the files created. Tables with
/// no data are skipped.
pub fn emit(output: &RunOutput, format: Format, dir: &Path) -> Result<Vec<PathBuf>, EmitError> {
    mkdir(dir)?;
    match format {
        Format::Json => {
            let path = dir.join("report.json");
            let text = serde_json::to_string_pretty(&output.report)?;
            fs::write(&path, text + "\n").map_err(|source| EmitError::Io { path: path.display().to_string(), source })?;
            Ok(vec![path])
        }
        Format::CsvTables => csv_tables(output, dir),
        Format::PlotData => plot_data(output, &dir.join("plot-data")),
    }
}

fn mkdir(dir: &Path) -> Result<(), EmitError> {
    fs::create_dir_all(dir).map_err(|source| EmitError::Io { path: dir.display().to_string(), source })
}

/// A CSV file assembled row by row; every cell is a number or a label.
struct Table {
    header: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    fn write(&self, path: &Path) -> Result<PathBuf, EmitError> {
        let name = path.display().to_string();
        let csv_err = |source| EmitError::Csv { path: name.clone(), source };
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        w.write_record(&self.header).map_err(csv_err)?;
        for row in &self.rows {
            let mut record = Vec::with_capacity(row.len());
            for (i, c) in row.iter().enumerate() {
                record.push(match c {
                    Cell::Num(x) if !x.is_finite() => {
                        return Err(EmitError::NonFinite { path: name.clone(), column: self.header[i].clone() })
                    }
                    Cell::Num(x) if *x == 0.0 || (1e-4..1e15).contains(&x.abs()) => x.to_string(),
                    Cell::Num(x) => format!("{x:e}"),
                    Cell::Int(n) => n.to_string(),
                    Cell::Text(s) => s.clone(),
                });
            }
            w.write_record(&record).map_err(csv_err)?;
        }
        w.flush().map_err(|source| EmitError::Io { path: name.clone(), source })?;
        Ok(path.to_path_buf())
    }
}

fn csv_tables(output: &RunOutput, dir: &Path) -> Result<Vec<PathBuf>, EmitError> {
    let report = &output.report;
    let mut written = Vec::new();
    if let Some(s) = &report.spectrum {
        let mut t = Table::new(&["k", "lambda", "lambda_ratio", "node_count"]);
        for (k, (l, n)) in s.eigenvalues.iter().zip(&s.node_counts).enumerate() {
            t.rows.push(vec![Cell::Int(k as i64), Cell::Num(*l), Cell::Num(l / s.lambda0), Cell::Int(*n as i64)]);
        }
        written.push(t.write(&dir.join("eigenvalues.csv"))?);
    }
    if !report.squeezing.is_empty() {
        // long layout: one row per mode and matching scheme
        let mut t = Table::new(&["pump_ratio", "noise_frequency", "k", "matching", "phase", "variance", "variance_db"]);
        for sq in &report.squeezing {
            for m in &sq.per_mode {
                let (v, phase) = if m.v_minus <= m.v_plus { (m.v_minus, std::f64::consts::FRAC_PI_2) } else { (m.v_plus, 0.0) };
                t.rows.push(vec![
                    Cell::Num(sq.pump_ratio),
                    Cell::Num(sq.noise_frequency),
                    Cell::Int(m.k as i64),
                    Cell::Text("perfect".into()),
                    Cell::Num(phase),
                    Cell::Num(v),
                    Cell::Num(m.best_db),
                ]);
                for lo in sq.lo_results.iter().filter(|lo| lo.k == m.k) {
                    t.rows.push(vec![
                        Cell::Num(sq.pump_ratio),
                        Cell::Num(sq.noise_frequency),
                        Cell::Int(lo.k as i64),
                        Cell::Text(lo.descriptor.clone()),
                        Cell::Num(lo.phase),
                        Cell::Num(lo.variance),
                        Cell::Num(lo.variance_db),
                    ]);
                }
            }
        }
        written.push(t.write(&dir.join("variances.csv"))?);
    }
    if let Some(rows) = &report.sweep {
        let mut t = Table::new(&[
            "length_m",
            "kappa",
            "lambda0_numeric",
            "lambda0_analytic",
            "product_numeric_m",
            "product_analytic_m",
            "p_thr_w_per_m2",
            "power_thr_w",
        ]);
        for r in rows {
            t.rows.push(
                [r.length, r.kappa, r.lambda0_numeric, r.lambda0_analytic, r.product_numeric, r.product_analytic, r.p_thr, r.power_thr]
                    .into_iter()
                    .map(Cell::Num)
                    .collect(),
            );
        }
        written.push(t.write(&dir.join("sweep.csv"))?);
    }
    Ok(written)
}

fn plot_data(output: &RunOutput, dir: &Path) -> Result<Vec<PathBuf>, EmitError> {
    let report = &output.report;
    let mut written = Vec::new();
    let has_data = report.spectrum.is_some() || report.sweep.is_some();
    if !has_data {
        return Ok(written);
    }
    mkdir(dir)?;
    if let Some(s) = &report.spectrum {
        let mut t = Table::new(&["k", "lambda"]);
        for (k, l) in s.eigenvalues.iter().enumerate() {
            t.rows.push(vec![Cell::Int(k as i64), Cell::Num(*l)]);
        }
        written.push(t.write(&dir.join("spectrum.csv"))?);
    }
    if let Some(b) = &output.basis {
        let modes = WAVEFORM_MODES.min(b.n_significant);
        let waves = (0..modes).map(|k| b.physical_mode(k)).collect::<Result<Vec<_>, _>>()?;
        let n_signal = report.analytic.as_ref().map(|a| a.n_signal);
        let mut header = vec!["m".to_string(), "offset_hz".to_string()];
        header.extend((0..modes).map(|k| format!("mode_{k}")));
        if n_signal.is_some() {
            header.extend((0..modes).map(|k| format!("hermite_gauss_{k}")));
        }
        let mut t = Table { header, rows: Vec::new() };
        // analytic modes take the numeric modes' sign convention at their peaks
        let signs: Vec<f64> = match n_signal {
            Some(ns) => waves
                .iter()
                .enumerate()
                .map(|(k, w)| {
                    let peak = (0..w.amplitudes.len()).max_by(|&x, &y| w.amplitudes[x].abs().total_cmp(&w.amplitudes[y].abs()));
                    match peak {
                        Some(j) if hermite_gauss_mode(k, (w.first_index + j as i64) as f64, ns) * w.amplitudes[j] < 0.0 => -1.0,
                        _ => 1.0,
                    }
                })
                .collect(),
            None => Vec::new(),
        };
        let omega_hz = b.grid.omega / (2.0 * std::f64::consts::PI);
        for i in 0..b.dim() {
            // physical index nearest to each scaled node
            let m = (b.grid.index(i) as f64 * b.kappa()).round() as i64;
            let mut row = vec![Cell::Int(m), Cell::Num(m as f64 * omega_hz)];
            row.extend(waves.iter().map(|w| Cell::Num(w.at(m))));
            if let Some(ns) = n_signal {
                row.extend(signs.iter().enumerate().map(|(k, sg)| Cell::Num(sg * hermite_gauss_mode(k, m as f64, ns))));
            }
            t.rows.push(row);
        }
        written.push(t.write(&dir.join("waveforms.csv"))?);

        let rv = report
            .squeezing
            .first()
            .map(|s| (s.pump_ratio, s.noise_frequency))
            .or_else(|| report.counts.first().map(|c| (c.pump_ratio, c.noise_frequency)));
        if let Some((r, w)) = rv {
            if let Ok(rows) = mode_variances(&b.ratios(), r, w, b.n_significant) {
                let mut t = Table::new(&["k", "lambda_ratio", "v_minus_db", "v_plus_db", "best_db"]);
                for m in rows {
                    t.rows.push(vec![
                        Cell::Int(m.k as i64),
                        Cell::Num(m.lam_ratio),
                        Cell::Num(m.v_minus_db),
                        Cell::Num(m.v_plus_db),
                        Cell::Num(m.best_db),
                    ]);
                }
                written.push(t.write(&dir.join("variance_by_mode.csv"))?);
            }
        }
    }
    if let Some(rows) = &report.sweep {
        let mut t = Table::new(&["length_m", "product_numeric_m", "product_analytic_m"]);
        for r in rows {
            t.rows.push(vec![Cell::Num(r.length), Cell::Num(r.product_numeric), Cell::Num(r.product_analytic)]);
        }
        written.push(t.write(&dir.join("length_product.csv"))?);
    }
    Ok(written)
}
