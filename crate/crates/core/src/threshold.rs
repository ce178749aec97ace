//! Oscillation thresholds, mean-field decay rates of the supermodes, and the
//! crystal-length sweep of the leading eigenvalue.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::coupling::{build_coupling_matrix, CouplingError, ModeGrid};
use crate::dispersion::{CrystalDispersion, Geometry, Resonance, SpopoConfig, SPEED_OF_LIGHT, VACUUM_PERMITTIVITY};
use crate::spectral::{analytic_eigensystem, eigenvalues, SpectralError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ThresholdError {
    #[error("doubly resonant cavity needs pump_mirror_transmission")]
    MissingTp,
    #[error("leading eigenvalue must be nonzero, got {0}")]
    ZeroLambda(f64),
    #[error("sweep lengths must be positive and strictly ascending")]
    UnsortedLengths,
    #[error("at l = {length} m: {source}")]
    Coupling { length: f64, source: CouplingError },
    #[error("at l = {length} m: {source}")]
    Spectral { length: f64, source: SpectralError },
}

/// Cavity coefficient of the single-mode threshold: 1 when only the signal
/// resonates, `T_p/4` (ring) or `T_p/16` (linear) when the pump resonates too.
pub fn geometry_coefficient(config: &SpopoConfig) -> Result<f64, ThresholdError> {
    match config.resonance {
        Resonance::Singly => Ok(1.0),
        Resonance::Doubly => {
            let tp = config.pump_mirror_transmission.ok_or(ThresholdError::MissingTp)?;
            Ok(match config.geometry {
                Geometry::Ring => tp / 4.0,
                Geometry::Linear => tp / 16.0,
            })
        }
    }
}

/// Single-mode c.w. threshold irradiance `P₀`, W/m², under optimal focusing
/// (pump area half the signal area).
pub fn reference_threshold(crystal: &CrystalDispersion, config: &SpopoConfig) -> Result<f64, ThresholdError> {
    let pi0 = geometry_coefficient(config)?;
    let omega0 = config.signal_carrier();
    let c = SPEED_OF_LIGHT;
    let ts = config.signal_mirror_transmission;
    let den = 2.0 * (crystal.chi * crystal.length * omega0).powi(2);
    Ok(pi0 * VACUUM_PERMITTIVITY * c.powi(3) * crystal.n0.powi(2) * ts * ts / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpopoThreshold {
    /// Threshold irradiance, W/m².
    pub p_thr: f64,
    /// Threshold average power, W.
    pub power_thr: f64,
}

/// `P_thr = P₀/Λ₀²` and the power through a disc of radius `waist`.
pub fn spopo_threshold(p0: f64, lambda0: f64, waist: f64) -> Result<SpopoThreshold, ThresholdError> {
    if lambda0 == 0.0 || !lambda0.is_finite() {
        return Err(ThresholdError::ZeroLambda(lambda0));
    }
    let p_thr = p0 / (lambda0 * lambda0);
    Ok(SpopoThreshold { p_thr, power_thr: p_thr * PI * waist * waist })
}

/// Power through a disc of radius `waist` at irradiance `p`.
pub fn irradiance_to_power(p: f64, waist: f64) -> f64 {
    p * PI * waist * waist
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub p0: f64,
    pub p_thr: f64,
    pub power_thr: f64,
    pub lambda0: f64,
    pub pi0: f64,
    /// Signal cavity damping rate, s⁻¹.
    pub gamma_s: f64,
    /// Same rate in Hz.
    pub gamma_s_hz: f64,
}

impl ThresholdReport {
    pub fn new(crystal: &CrystalDispersion, config: &SpopoConfig, lambda0: f64) -> Result<Self, ThresholdError> {
        let p0 = reference_threshold(crystal, config)?;
        let t = spopo_threshold(p0, lambda0, config.pump_waist)?;
        let gamma_s = config.signal_linewidth();
        Ok(Self {
            p0,
            p_thr: t.p_thr,
            power_thr: t.power_thr,
            lambda0,
            pi0: geometry_coefficient(config)?,
            gamma_s,
            gamma_s_hz: gamma_s / (2.0 * PI),
        })
    }

    /// `r = sqrt(P/P_thr)` for a pump irradiance `p`.
    pub fn pump_ratio(&self, p: f64) -> f64 {
        (p / self.p_thr).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePair {
    pub k: usize,
    pub plus: f64,
    pub minus: f64,
}

/// `λ± = γ_s(−1 ± r Λ_k/Λ₀)` for every supermode.
pub fn rate_eigenvalues(ratios: &[f64], r: f64, gamma_s: f64) -> Vec<RatePair> {
    ratios
        .iter()
        .enumerate()
        .map(|(k, x)| RatePair { k, plus: gamma_s * (-1.0 + r * x), minus: gamma_s * (-1.0 - r * x) })
        .collect()
}

/// True when every rate is negative (all fluctuations decay).
pub fn is_stable(rates: &[RatePair]) -> bool {
    rates.iter().all(|p| p.plus < 0.0 && p.minus < 0.0)
}

/// Large-length limit of the closed-form leading eigenvalue,
/// `π^¼ sqrt(20 N_p) τ_p / (|k'p − k's| l)`.
pub fn long_crystal_asymptote(crystal: &CrystalDispersion, config: &SpopoConfig) -> f64 {
    PI.powf(0.25) * (20.0 * config.pump_mode_count()).sqrt() * config.pump_pulse_duration / crystal.walk_off()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub length: f64,
    pub kappa: f64,
    pub lambda0_numeric: f64,
    pub lambda0_analytic: f64,
    /// `Λ₀·l` from the decomposition, m.
    pub product_numeric: f64,
    /// `Λ₀·l` from the closed form, m.
    pub product_analytic: f64,
    pub p_thr: f64,
    pub power_thr: f64,
}

/// Leading eigenvalue and threshold for each crystal length, computed in
/// parallel. `kappa` overrides the automatic scale for every length.
pub fn length_sweep(
    crystal: &CrystalDispersion,
    config: &SpopoConfig,
    lengths: &[f64],
    kappa: Option<f64>,
) -> Result<Vec<SweepRow>, ThresholdError> {
    if lengths.iter().any(|l| !(*l > 0.0)) || lengths.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ThresholdError::UnsortedLengths);
    }
    let p0_unit = reference_threshold(crystal, config)? * (crystal.length * crystal.length);
    lengths
        .par_iter()
        .map(|&length| {
            let c = crystal.with_length(length);
            let grid = ModeGrid::auto(&c, config, kappa).map_err(|source| ThresholdError::Coupling { length, source })?;
            let m = build_coupling_matrix(&c, config, grid).map_err(|source| ThresholdError::Coupling { length, source })?;
            let lam = eigenvalues(&m).map_err(|source| ThresholdError::Spectral { length, source })?[0];
            drop(m);
            let analytic = analytic_eigensystem(&c, config).lambda0;
            let t = spopo_threshold(p0_unit / (length * length), lam, config.pump_waist)?;
            Ok(SweepRow {
                length,
                kappa: grid.kappa,
                lambda0_numeric: lam,
                lambda0_analytic: analytic,
                product_numeric: lam * length,
                product_analytic: analytic * length,
                p_thr: t.p_thr,
                power_thr: t.power_thr,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::{bibo, PumpLevel};

    fn config(ts: f64) -> SpopoConfig {
        SpopoConfig {
            free_spectral_range: 2.0 * PI * 75e6,
            pump_pulse_duration: 100e-15,
            pump_center_wavelength: 0.4e-6,
            signal_mirror_transmission: ts,
            pump_mirror_transmission: None,
            geometry: Geometry::Ring,
            resonance: Resonance::Singly,
            pump_waist: 70e-6,
            signal_waist: None,
            pump: PumpLevel::Ratio(0.9),
        }
    }

    #[test]
    fn coefficient_table() {
        let mut c = config(0.01);
        assert_eq!(geometry_coefficient(&c).unwrap(), 1.0);
        c.geometry = Geometry::Linear;
        assert_eq!(geometry_coefficient(&c).unwrap(), 1.0);
        c.resonance = Resonance::Doubly;
        assert_eq!(geometry_coefficient(&c), Err(ThresholdError::MissingTp));
        c.pump_mirror_transmission = Some(0.02);
        assert_eq!(geometry_coefficient(&c).unwrap(), 0.02 / 16.0);
        c.geometry = Geometry::Ring;
        assert_eq!(geometry_coefficient(&c).unwrap(), 0.02 / 4.0);
        let singly = reference_threshold(&bibo(), &config(0.01)).unwrap();
        let doubly = reference_threshold(&bibo(), &c).unwrap();
        assert!((doubly / singly - 0.005).abs() < 1e-15);
    }

    #[test]
    fn reference_irradiance_scales_as_transmission_squared() {
        let a = reference_threshold(&bibo(), &config(0.01)).unwrap();
        let b = reference_threshold(&bibo(), &config(0.1)).unwrap();
        assert!((b / a - 100.0).abs() < 1e-10);
        // ε₀ c³ T_s² / (2 (χ l ω₀)²) worked by hand for the preset
        assert!((a / 1.3477e11 - 1.0).abs() < 1e-3, "{a}");
    }

    #[test]
    fn threshold_identities() {
        let t = spopo_threshold(2.0e11, 270.0, 70e-6).unwrap();
        assert!((t.p_thr * 270.0 * 270.0 - 2.0e11).abs() < 1e-3);
        let t2 = spopo_threshold(2.0e11, 270.0, 140e-6).unwrap();
        assert!((t2.power_thr / t.power_thr - 4.0).abs() < 1e-12);
        assert!(spopo_threshold(1.0, 0.0, 1.0).is_err());
        let cfg = config(0.01);
        assert_eq!(cfg.signal_linewidth(), cfg.free_spectral_range * 0.01 / (4.0 * PI));
    }

    #[test]
    fn rates_at_and_below_threshold() {
        let ratios = [1.0, -0.8, 0.5, 0.0];
        let g = 3.0;
        let below = rate_eigenvalues(&ratios, 0.9, g);
        assert!(is_stable(&below));
        let at = rate_eigenvalues(&ratios, 1.0, g);
        assert_eq!(at[0].plus, 0.0);
        assert_eq!(at[0].minus, -2.0 * g);
        let min = at.iter().flat_map(|p| [p.plus, p.minus]).fold(f64::INFINITY, f64::min);
        assert_eq!(min, -2.0 * g);
        assert!(!is_stable(&at));
    }

    #[test]
    fn sweep_rejects_unsorted_lengths() {
        assert_eq!(
            length_sweep(&bibo(), &config(0.01), &[2e-4, 1e-4], None),
            Err(ThresholdError::UnsortedLengths)
        );
    }
}
