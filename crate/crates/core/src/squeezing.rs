//! Quadrature noise of the output supermodes and the balanced-homodyne
//! spectrum for an arbitrary local oscillator.
//!
//! Noise frequencies are in units of the signal cavity linewidth, variances
//! relative to shot noise.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;
use thiserror::Error;

use crate::spectral::{hermite_gauss_samples, SpectralError, SupermodeBasis};

/// Denominators smaller than this signal operation at threshold.
pub const SINGULARITY_TOLERANCE: f64 = 1e-12;
/// Accepted deviation of `Σ|e_m|²` from one.
pub const LO_NORM_TOLERANCE: f64 = 1e-8;
/// Unprojected LO weight above which a spectrum is flagged.
pub const SPAN_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SqueezingError {
    #[error("transfer function is singular at threshold (lambda ratio {lam_ratio}, r = {r}, w = {w})")]
    ThresholdSingularity { lam_ratio: f64, r: f64, w: f64 },
    #[error("local oscillator window does not fit the supermode window: {0}")]
    WindowMismatch(SpectralError),
    #[error("local oscillator is not normalized: sum |e_m|^2 = {0}")]
    NotNormalized(f64),
    #[error("squeezing bound must be negative, got {0} dB")]
    InvalidBound(f64),
    #[error(transparent)]
    Spectral(SpectralError),
}

impl From<SpectralError> for SqueezingError {
    fn from(e: SpectralError) -> Self {
        match e {
            SpectralError::WindowMismatch { .. } => SqueezingError::WindowMismatch(e),
            other => SqueezingError::Spectral(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quadrature {
    /// `S + S†`, measured with a real LO.
    Plus,
    /// `−i(S − S†)`, measured with the LO shifted by π/2.
    Minus,
}

impl Quadrature {
    fn sign(self) -> f64 {
        match self {
            Quadrature::Plus => 1.0,
            Quadrature::Minus => -1.0,
        }
    }
}

/// Output/input ratio of one quadrature of a supermode with coupling
/// `lam_ratio = Λ_k/Λ₀` at pump ratio `r` and noise frequency `w = ω/γ_s`:
/// `[(1 ± r x) − i w] / [(1 ∓ r x) + i w]`.
pub fn quadrature_transfer(lam_ratio: f64, r: f64, w: f64, q: Quadrature) -> Result<Complex64, SqueezingError> {
    let g = q.sign() * r * lam_ratio;
    let num = Complex64::new(1.0 + g, -w);
    let den = Complex64::new(1.0 - g, w);
    if den.norm() < SINGULARITY_TOLERANCE {
        return Err(SqueezingError::ThresholdSingularity { lam_ratio, r, w });
    }
    Ok(num / den)
}

/// `V = v(w) v(−w)`.
pub fn quadrature_variance(lam_ratio: f64, r: f64, w: f64, q: Quadrature) -> Result<f64, SqueezingError> {
    let g = q.sign() * r * lam_ratio;
    let den = (1.0 - g).powi(2) + w * w;
    if den.sqrt() < SINGULARITY_TOLERANCE {
        return Err(SqueezingError::ThresholdSingularity { lam_ratio, r, w });
    }
    Ok(((1.0 + g).powi(2) + w * w) / den)
}

/// Floor reached at threshold and zero frequency.
pub fn min_variance(lam_k: f64, lam_0: f64) -> f64 {
    let a = lam_k.abs();
    ((lam_0 - a) / (lam_0 + a)).powi(2)
}

pub fn to_db(v: f64) -> f64 {
    10.0 * v.log10()
}

pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Comb amplitudes of a local oscillator on consecutive physical indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalOscillator {
    pub first_index: i64,
    pub amplitudes: Vec<Complex64>,
    pub descriptor: String,
}

impl LocalOscillator {
    pub fn new(first_index: i64, amplitudes: Vec<Complex64>, descriptor: impl Into<String>) -> Result<Self, SqueezingError> {
        let lo = Self { first_index, amplitudes, descriptor: descriptor.into() };
        let n = lo.normalization();
        if (n - 1.0).abs() > LO_NORM_TOLERANCE {
            return Err(SqueezingError::NotNormalized(n));
        }
        Ok(lo)
    }

    /// Rescales `amplitudes` to unit weight.
    pub fn normalized(first_index: i64, mut amplitudes: Vec<Complex64>, descriptor: impl Into<String>) -> Result<Self, SqueezingError> {
        let n = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>();
        if !(n > 0.0 && n.is_finite()) {
            return Err(SqueezingError::NotNormalized(n));
        }
        let s = n.sqrt();
        amplitudes.iter_mut().for_each(|z| *z /= s);
        Self::new(first_index, amplitudes, descriptor)
    }

    pub fn normalization(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Hermite-Gauss comb of order `k` and width `n_l` lines, with a global
    /// phase, over the whole physical window of `basis`.
    pub fn gauss_hermite(basis: &SupermodeBasis, k: usize, n_l: f64, phase: f64) -> Result<Self, SqueezingError> {
        let rot = Complex64::from_polar(1.0, phase);
        let p = basis.grid.physical_half_width();
        let amps = hermite_gauss_samples(&basis.grid, k, n_l).into_iter().map(|z| z * rot).collect();
        Self::normalized(-p, amps, format!("GH k={k}, N_L={n_l:.4e}, phi_L={phase:.4}"))
    }

    /// Copy of supermode `k` with a global phase.
    pub fn supermode(basis: &SupermodeBasis, k: usize, phase: f64) -> Result<Self, SqueezingError> {
        let w = basis.physical_mode(k)?;
        let rot = Complex64::from_polar(1.0, phase);
        let amps = w.amplitudes.iter().map(|a| rot * a).collect();
        Self::normalized(w.first_index, amps, format!("supermode k={k}, phi_L={phase:.4}"))
    }
}

pub fn lo_projections(basis: &SupermodeBasis, lo: &LocalOscillator) -> Result<Vec<Complex64>, SqueezingError> {
    Ok(basis.project(lo.first_index, &lo.amplitudes)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomodyneValue {
    pub variance: f64,
    /// `Σ|d_k|²`.
    pub captured_weight: f64,
    /// Set when more than [`SPAN_TOLERANCE`] of the LO lies outside the
    /// basis; that part is counted as shot noise.
    pub incomplete_span: bool,
}

pub fn homodyne_spectrum(basis: &SupermodeBasis, lo: &LocalOscillator, r: f64, w: f64) -> Result<HomodyneValue, SqueezingError> {
    let d = lo_projections(basis, lo)?;
    homodyne_from_projections(&basis.ratios(), &d, r, w)
}

/// Four-term homodyne sum over supermodes with coupling ratios `ratios`
/// and LO projections `d`.
pub fn homodyne_from_projections(ratios: &[f64], d: &[Complex64], r: f64, w: f64) -> Result<HomodyneValue, SqueezingError> {
    let mut total = Complex64::new(0.0, 0.0);
    let mut captured = 0.0;
    for (x, dk) in ratios.iter().zip(d) {
        let (a, b) = (dk.re, dk.im);
        captured += a * a + b * b;
        if a == 0.0 && b == 0.0 {
            continue;
        }
        let pp = quadrature_transfer(*x, r, w, Quadrature::Plus)?;
        let pm = quadrature_transfer(*x, r, -w, Quadrature::Plus)?;
        let mp = quadrature_transfer(*x, r, w, Quadrature::Minus)?;
        let mm = quadrature_transfer(*x, r, -w, Quadrature::Minus)?;
        total += a * a * pp * pm + b * b * mp * mm + Complex64::i() * a * b * (pp * mm - mp * pm);
    }
    debug_assert!(total.im.abs() <= 1e-10 * total.re.abs().max(1.0), "imaginary residue {}", total.im);
    let residual = 1.0 - captured;
    Ok(HomodyneValue {
        variance: total.re + residual,
        captured_weight: captured,
        incomplete_span: residual.abs() > SPAN_TOLERANCE,
    })
}

/// Variance of the homodyne signal when the LO is rotated by `phase`.
fn rotated_variance(ratios: &[f64], d: &[Complex64], phase: f64, r: f64, w: f64) -> Result<f64, SqueezingError> {
    let rot = Complex64::from_polar(1.0, phase);
    let rd: Vec<Complex64> = d.iter().map(|z| z * rot).collect();
    Ok(homodyne_from_projections(ratios, &rd, r, w)?.variance)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GhOptimum {
    pub k: usize,
    pub n_l: f64,
    pub phase: f64,
    pub variance: f64,
    pub variance_db: f64,
}

/// Best Hermite-Gauss LO of order `k` at both principal quadratures.
///
/// Scans 33 log-spaced widths between `4 kappa` and a quarter of the
/// physical window, then refines around the best one by golden-section
/// search in `log N_L`.
pub fn optimize_gh_lo(basis: &SupermodeBasis, k: usize, r: f64, w: f64) -> Result<GhOptimum, SqueezingError> {
    let lo = (4.0 * basis.kappa()).ln();
    let hi = (0.25 * basis.grid.physical_half_width() as f64).ln().max(lo + 1.0);
    optimize_gh_lo_in(basis, k, r, w, lo.exp(), hi.exp())
}

pub fn optimize_gh_lo_in(basis: &SupermodeBasis, k: usize, r: f64, w: f64, n_min: f64, n_max: f64) -> Result<GhOptimum, SqueezingError> {
    let ratios = basis.ratios();
    let eval = |log_n: f64| -> Result<(f64, f64), SqueezingError> {
        let lo = LocalOscillator::gauss_hermite(basis, k, log_n.exp(), 0.0)?;
        let d = lo_projections(basis, &lo)?;
        let v0 = rotated_variance(&ratios, &d, 0.0, r, w)?;
        let v1 = rotated_variance(&ratios, &d, FRAC_PI_2, r, w)?;
        Ok(if v1 < v0 { (v1, FRAC_PI_2) } else { (v0, 0.0) })
    };
    let (a, b) = (n_min.ln(), n_max.ln());
    const STEPS: usize = 32;
    const GOLDEN_STEPS: usize = 24;
    let xs: Vec<f64> = (0..=STEPS).map(|i| a + (b - a) * i as f64 / STEPS as f64).collect();
    let vals = xs.par_iter().map(|&x| eval(x).map(|v| v.0)).collect::<Result<Vec<f64>, _>>()?;
    let best = (0..xs.len()).min_by(|&i, &j| vals[i].total_cmp(&vals[j])).unwrap_or(0);
    let mut lo = xs[best.saturating_sub(1)];
    let mut hi = xs[(best + 1).min(STEPS)];
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let mut f1 = eval(x1)?.0;
    let mut f2 = eval(x2)?.0;
    for _ in 0..GOLDEN_STEPS {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = eval(x1)?.0;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = eval(x2)?.0;
        }
    }
    let mut candidates = [(xs[best], vals[best]), (x1, f1), (x2, f2)];
    candidates.sort_by(|p, q| p.1.total_cmp(&q.1));
    let x = candidates[0].0;
    let (variance, phase) = eval(x)?;
    Ok(GhOptimum { k, n_l: x.exp(), phase, variance, variance_db: to_db(variance) })
}

/// Squeezing of the better quadrature of every supermode.
pub fn best_variance(lam_ratio: f64, r: f64, w: f64) -> Result<f64, SqueezingError> {
    let p = quadrature_variance(lam_ratio, r, w, Quadrature::Plus)?;
    let m = quadrature_variance(lam_ratio, r, w, Quadrature::Minus)?;
    Ok(p.min(m))
}

/// Number of supermodes whose better quadrature lies below `bound_db`.
pub fn count_squeezed(basis: &SupermodeBasis, r: f64, w: f64, bound_db: f64) -> Result<usize, SqueezingError> {
    count_below(&basis.ratios(), r, w, bound_db)
}

pub fn count_below(ratios: &[f64], r: f64, w: f64, bound_db: f64) -> Result<usize, SqueezingError> {
    if !(bound_db < 0.0) {
        return Err(SqueezingError::InvalidBound(bound_db));
    }
    let bound = from_db(bound_db);
    let mut n = 0;
    for x in ratios {
        if best_variance(*x, r, w)? < bound {
            n += 1;
        }
    }
    Ok(n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeVariance {
    pub k: usize,
    pub lam_ratio: f64,
    pub v_minus: f64,
    pub v_plus: f64,
    pub v_minus_db: f64,
    pub v_plus_db: f64,
    /// The squeezed quadrature in dB.
    pub best_db: f64,
}

pub fn mode_variances(ratios: &[f64], r: f64, w: f64, modes: usize) -> Result<Vec<ModeVariance>, SqueezingError> {
    ratios
        .iter()
        .take(modes)
        .enumerate()
        .map(|(k, &x)| {
            let v_minus = quadrature_variance(x, r, w, Quadrature::Minus)?;
            let v_plus = quadrature_variance(x, r, w, Quadrature::Plus)?;
            Ok(ModeVariance {
                k,
                lam_ratio: x,
                v_minus,
                v_plus,
                v_minus_db: to_db(v_minus),
                v_plus_db: to_db(v_plus),
                best_db: to_db(v_minus.min(v_plus)),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezedCount {
    pub bound_db: f64,
    pub count: usize,
}

/// Band count: supermodes whose better quadrature lies in `(lower_db, upper_db)`.
pub fn count_in_band(ratios: &[f64], r: f64, w: f64, lower_db: f64, upper_db: f64) -> Result<usize, SqueezingError> {
    let mut n = 0;
    for x in ratios {
        let db = to_db(best_variance(*x, r, w)?);
        if db > lower_db && db < upper_db {
            n += 1;
        }
    }
    Ok(n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoResult {
    /// Order of the supermode or Hermite-Gauss shape the LO targets.
    pub k: usize,
    pub descriptor: String,
    /// LO phase the variance refers to.
    pub phase: f64,
    pub noise_frequency: f64,
    pub variance: f64,
    pub variance_db: f64,
    pub captured_weight: f64,
    pub incomplete_span: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SqueezingReport {
    pub pump_ratio: f64,
    pub noise_frequency: f64,
    pub per_mode: Vec<ModeVariance>,
    pub counts: Vec<SqueezedCount>,
    pub lo_results: Vec<LoResult>,
}

impl SqueezingReport {
    pub fn build(basis: &SupermodeBasis, r: f64, w: f64, modes: usize, bounds_db: &[f64]) -> Result<Self, SqueezingError> {
        let ratios = basis.ratios();
        let counts = bounds_db
            .iter()
            .map(|&b| Ok(SqueezedCount { bound_db: b, count: count_below(&ratios, r, w, b)? }))
            .collect::<Result<_, SqueezingError>>()?;
        Ok(Self {
            pump_ratio: r,
            noise_frequency: w,
            per_mode: mode_variances(&ratios, r, w, modes)?,
            counts,
            lo_results: Vec::new(),
        })
    }
}

/// Pump ratio below threshold that gives `v` on a mode with `|Λ_k/Λ₀| = x`
/// at zero frequency; used to invert dB bounds into coupling bounds.
pub fn coupling_for_variance(v: f64, r: f64) -> f64 {
    let s = v.sqrt();
    (1.0 - s) / ((1.0 + s) * r)
}
