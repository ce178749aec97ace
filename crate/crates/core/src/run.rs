//! Pipeline orchestration: one diagonalization shared by every requested
//! analysis, assembled into a serializable report.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;
use std::time::{Instant, SystemTime};
use thiserror::Error;

use crate::config::{Analysis, LoSpec, RunConfig};
use crate::coupling::{build_coupling_matrix, default_kappa, CouplingError, ModeGrid};
use crate::dispersion::{beta_coefficients, gaussian_validity, ParameterError, PumpLevel, ValidityVerdict};
use crate::spectral::{analytic_eigensystem, compare_bases, diagonalize_with, ModeComparison, SpectralError, SupermodeBasis};
use crate::squeezing::{
    count_below, count_in_band, homodyne_from_projections, lo_projections, optimize_gh_lo, optimize_gh_lo_in, to_db,
    GhOptimum, HomodyneValue, LoResult, LocalOscillator, SqueezedCount, SqueezingError, SqueezingReport,
};
use crate::threshold::{is_stable, length_sweep, rate_eigenvalues, SweepRow, ThresholdError, ThresholdReport};

#[derive(Debug, Error)]
pub enum StageError {
    #[error(transparent)]
    Parameter(#[from] ParameterError),
    #[error(transparent)]
    Coupling(#[from] CouplingError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Squeezing(#[from] SqueezingError),
    #[error(transparent)]
    Threshold(#[from] ThresholdError),
}

#[derive(Debug, Error)]
#[error("{analysis}: {source}")]
pub struct RunError {
    pub analysis: &'static str,
    #[source]
    pub source: StageError,
}

impl RunError {
    /// True when the failure comes from the inputs rather than the numerics.
    pub fn is_config_error(&self) -> bool {
        match &self.source {
            StageError::Parameter(_) => true,
            StageError::Coupling(_) => true,
            StageError::Spectral(e) => matches!(e, SpectralError::NoSuchMode { .. } | SpectralError::WindowMismatch { .. }),
            StageError::Squeezing(e) => matches!(
                e,
                SqueezingError::InvalidBound(_) | SqueezingError::WindowMismatch(_) | SqueezingError::NotNormalized(_)
            ),
            StageError::Threshold(e) => matches!(e, ThresholdError::MissingTp | ThresholdError::UnsortedLengths),
        }
    }
}

fn tag<E: Into<StageError>>(analysis: &'static str) -> impl Fn(E) -> RunError {
    move |e| RunError { analysis, source: e.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub lambda0: f64,
    pub dimension: usize,
    pub n_significant: usize,
    pub epsilon: f64,
    pub max_residual: f64,
    pub leading_negative: bool,
    /// Physical eigenvalues of the significant supermodes, largest |Λ| first.
    pub eigenvalues: Vec<f64>,
    pub node_counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSection {
    #[serde(flatten)]
    pub report: ThresholdReport,
    pub pump_ratio: f64,
    /// Every supermode decays at this pump ratio.
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoOptimumReport {
    pub pump_ratio: f64,
    pub noise_frequency: f64,
    #[serde(flatten)]
    pub optimum: GhOptimum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandCount {
    pub lower_db: f64,
    pub upper_db: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountReport {
    pub pump_ratio: f64,
    pub noise_frequency: f64,
    pub counts: Vec<SqueezedCount>,
    pub bands: Vec<BandCount>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticReport {
    pub lambda0: f64,
    pub ratio: f64,
    pub n_signal: f64,
    pub tau_s: f64,
    pub comparisons: Vec<ModeComparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub version: String,
    pub timestamp: String,
    pub wall_time_s: f64,
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: serde_json::Value,
    pub validity: ValidityVerdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<ModeGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<ThresholdSection>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub squeezing: Vec<SqueezingReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lo_optima: Vec<LoOptimumReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub counts: Vec<CountReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Vec<SweepRow>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analytic: Option<AnalyticReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    pub provenance: Provenance,
}

impl RunReport {
    /// JSON with the provenance block removed, for reproducibility checks.
    pub fn deterministic_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        if let Some(m) = v.as_object_mut() {
            m.remove("provenance");
        }
        v
    }
}

/// The report plus the decomposition it was computed from, kept for
/// waveform exports.
pub struct RunOutput {
    pub report: RunReport,
    pub basis: Option<SupermodeBasis>,
}

fn basis_for(config: &RunConfig) -> Result<SupermodeBasis, RunError> {
    let fail = tag::<StageError>("diagonalize");
    let grid = match config.numerics.grid_half_width {
        Some(hw) => {
            let omega = config.spopo.free_spectral_range;
            let kappa = config.numerics.kappa.unwrap_or_else(|| {
                default_kappa(config.spopo.pump_mode_count(), &beta_coefficients(&config.crystal, omega))
            });
            ModeGrid::new(kappa, hw, omega).map_err(|e| fail(e.into()))?
        }
        None => ModeGrid::auto(&config.crystal, &config.spopo, config.numerics.kappa).map_err(|e| fail(e.into()))?,
    };
    let matrix = build_coupling_matrix(&config.crystal, &config.spopo, grid).map_err(|e| fail(e.into()))?;
    diagonalize_with(&matrix, config.numerics.epsilon_significant).map_err(|e| fail(e.into()))
}

/// Variance for a LO given its projections at phase zero. `None` picks the
/// better of the two quadratures.
fn lo_variance(ratios: &[f64], d: &[Complex64], phase: Option<f64>, r: f64, w: f64) -> Result<(HomodyneValue, f64), SqueezingError> {
    let at = |p: f64| -> Result<HomodyneValue, SqueezingError> {
        let rot = Complex64::from_polar(1.0, p);
        let rd: Vec<Complex64> = d.iter().map(|z| z * rot).collect();
        homodyne_from_projections(ratios, &rd, r, w)
    };
    match phase {
        Some(p) => Ok((at(p)?, p)),
        None => {
            let a = at(0.0)?;
            let b = at(FRAC_PI_2)?;
            Ok(if b.variance < a.variance { (b, FRAC_PI_2) } else { (a, 0.0) })
        }
    }
}

fn squeeze(basis: &SupermodeBasis, r: f64, ws: &[f64], modes: usize, los: &[LoSpec]) -> Result<Vec<SqueezingReport>, SqueezingError> {
    let ratios = basis.ratios();
    // LO projections do not depend on r or w
    let projected = los
        .iter()
        .map(|spec| {
            let (lo, k) = match *spec {
                LoSpec::GaussHermite { k, n_l, .. } => (LocalOscillator::gauss_hermite(basis, k, n_l, 0.0)?, k),
                LoSpec::Supermode { k, .. } => (LocalOscillator::supermode(basis, k, 0.0)?, k),
            };
            let descriptor = match *spec {
                LoSpec::GaussHermite { k, n_l, .. } => format!("gauss-hermite k={k} n_l={n_l:e}"),
                LoSpec::Supermode { k, .. } => format!("supermode k={k}"),
            };
            Ok((k, descriptor, lo_projections(basis, &lo)?))
        })
        .collect::<Result<Vec<_>, SqueezingError>>()?;
    ws.iter()
        .map(|&w| {
            let mut report = SqueezingReport::build(basis, r, w, modes, &[])?;
            for (spec, (k, descriptor, d)) in los.iter().zip(&projected) {
                let phase = match spec {
                    LoSpec::GaussHermite { phase, .. } | LoSpec::Supermode { phase, .. } => *phase,
                };
                let (h, phase) = lo_variance(&ratios, d, phase, r, w)?;
                report.lo_results.push(LoResult {
                    k: *k,
                    descriptor: descriptor.clone(),
                    phase,
                    noise_frequency: w,
                    variance: h.variance,
                    variance_db: to_db(h.variance),
                    captured_weight: h.captured_weight,
                    incomplete_span: h.incomplete_span,
                });
            }
            Ok(report)
        })
        .collect()
}

pub fn run(config: &RunConfig) -> Result<RunOutput, RunError> {
    let started = Instant::now();
    let validity = gaussian_validity(&config.crystal, &config.spopo);
    let mut report = RunReport {
        config: config.to_json(),
        validity,
        grid: None,
        spectrum: None,
        threshold: None,
        squeezing: Vec::new(),
        lo_optima: Vec::new(),
        counts: Vec::new(),
        sweep: None,
        analytic: None,
        notes: Vec::new(),
        provenance: Provenance { version: String::new(), timestamp: String::new(), wall_time_s: 0.0, threads: 0 },
    };

    let basis = if config.analyses.iter().any(Analysis::needs_basis) { Some(basis_for(config)?) } else { None };
    // threshold is cheap once Λ₀ is known and fixes r for irradiance pumping
    let threshold = match &basis {
        Some(b) => Some(ThresholdReport::new(&config.crystal, &config.spopo, b.lambda0()).map_err(tag("threshold"))?),
        None => None,
    };
    let config_ratio = match (config.spopo.pump, &threshold) {
        (PumpLevel::Ratio(r), _) => Some(r),
        (PumpLevel::Irradiance(p), Some(t)) => Some(t.pump_ratio(p)),
        (PumpLevel::Irradiance(_), None) => None,
    };
    let resolve = |r: Option<f64>| r.or(config_ratio).expect("analyses needing r also need the basis");

    if let Some(b) = &basis {
        report.grid = Some(b.grid);
        report.spectrum = Some(SpectrumSummary {
            lambda0: b.lambda0(),
            dimension: b.dim(),
            n_significant: b.n_significant,
            epsilon: b.epsilon,
            max_residual: b.max_residual,
            leading_negative: b.leading_negative,
            eigenvalues: b.eigenvalues[..b.n_significant].to_vec(),
            node_counts: (0..b.n_significant).map(|k| b.node_count(k)).collect(),
        });
    }

    for analysis in &config.analyses {
        let name = analysis.name();
        match analysis {
            Analysis::Diagonalize => {}
            Analysis::Threshold => {
                let t = threshold.expect("basis computed");
                let r = resolve(None);
                let rates = rate_eigenvalues(&basis.as_ref().expect("basis computed").ratios(), r, t.gamma_s);
                report.threshold = Some(ThresholdSection { report: t, pump_ratio: r, stable: is_stable(&rates) });
                report.notes.push(
                    "reference threshold assumes optimal focusing (pump area half the signal area)".to_string(),
                );
            }
            Analysis::Squeeze { r, w, modes, local_oscillators } => {
                let b = basis.as_ref().expect("basis computed");
                let rows = squeeze(b, resolve(*r), w, *modes, local_oscillators).map_err(tag(name))?;
                report.squeezing.extend(rows);
            }
            Analysis::LoOptimize { r, w, modes, n_min, n_max } => {
                let b = basis.as_ref().expect("basis computed");
                let r = resolve(*r);
                let optima = modes
                    .par_iter()
                    .map(|&k| match (n_min, n_max) {
                        (None, None) => optimize_gh_lo(b, k, r, *w),
                        _ => {
                            let lo = n_min.unwrap_or(4.0 * b.kappa());
                            let hi = n_max.unwrap_or(0.25 * b.grid.physical_half_width() as f64);
                            optimize_gh_lo_in(b, k, r, *w, lo, hi)
                        }
                    })
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(tag(name))?;
                report
                    .lo_optima
                    .extend(optima.into_iter().map(|optimum| LoOptimumReport { pump_ratio: r, noise_frequency: *w, optimum }));
            }
            Analysis::Count { r, w, bounds_db, bands_db } => {
                let b = basis.as_ref().expect("basis computed");
                let r = resolve(*r);
                let ratios = b.ratios();
                let counts = bounds_db
                    .iter()
                    .map(|&bound_db| Ok(SqueezedCount { bound_db, count: count_below(&ratios, r, *w, bound_db)? }))
                    .collect::<Result<Vec<_>, SqueezingError>>()
                    .map_err(tag(name))?;
                let bands = bands_db
                    .iter()
                    .map(|[lo, hi]| {
                        Ok(BandCount { lower_db: *lo, upper_db: *hi, count: count_in_band(&ratios, r, *w, *lo, *hi)? })
                    })
                    .collect::<Result<Vec<_>, SqueezingError>>()
                    .map_err(tag(name))?;
                report.counts.push(CountReport { pump_ratio: r, noise_frequency: *w, counts, bands });
            }
            Analysis::LengthSweep { lengths, kappa } => {
                let rows = length_sweep(&config.crystal, &config.spopo, lengths, kappa.or(config.numerics.kappa))
                    .map_err(tag(name))?;
                report.sweep = Some(rows);
            }
            Analysis::CompareAnalytic { modes } => {
                let b = basis.as_ref().expect("basis computed");
                let a = analytic_eigensystem(&config.crystal, &config.spopo);
                let comparisons = compare_bases(b, &a, *modes).map_err(tag(name))?;
                if !a.validity.pulse.satisfied || !a.validity.length.satisfied {
                    report.notes.push("Gaussian approximation outside its validity range; closed form is indicative only".into());
                }
                report.analytic =
                    Some(AnalyticReport { lambda0: a.lambda0, ratio: a.ratio, n_signal: a.n_signal, tau_s: a.tau_s, comparisons });
            }
        }
    }

    report.provenance = Provenance {
        version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: humantime::format_rfc3339_seconds(SystemTime::now()).to_string(),
        wall_time_s: started.elapsed().as_secs_f64(),
        threads: rayon::current_num_threads(),
    };
    Ok(RunOutput { report, basis })
}
