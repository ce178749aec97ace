//! Crystal dispersion data, cavity/pump parameters of the oscillator, and the
//! dimensionless coefficients of the quadratic phase-mismatch expansion.
//!
//! All quantities are SI. Wavenumber derivatives are taken with respect to
//! angular frequency: `k'` in s/m and `k''` in s²/m.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParameterError {
    #[error("{field} must be {requirement}, got {value}")]
    OutOfRange {
        field: &'static str,
        requirement: &'static str,
        value: f64,
    },
    #[error("pump comb is not multimode: N_p = 1/(Ω τ_p) = {0} must exceed 1")]
    SingleModePump(f64),
}

fn require(ok: bool, field: &'static str, requirement: &'static str, value: f64) -> Result<(), ParameterError> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(ParameterError::OutOfRange { field, requirement, value })
    }
}

/// Group slowness, group-velocity dispersion and nonlinearity of a
/// phase-matched crystal cut, plus its length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrystalDispersion {
    /// `k'` at the pump (2ω₀), s/m.
    pub kp_prime: f64,
    /// `k''` at the pump, s²/m.
    pub kp_double_prime: f64,
    /// `k'` at the signal (ω₀), s/m.
    pub ks_prime: f64,
    /// `k''` at the signal, s²/m.
    pub ks_double_prime: f64,
    /// Effective second-order susceptibility, m/V.
    pub chi: f64,
    /// Refractive index at degeneracy.
    pub n0: f64,
    /// Crystal length, m.
    pub length: f64,
    #[serde(default)]
    pub label: String,
}

impl CrystalDispersion {
    pub fn validate(&self) -> Result<(), ParameterError> {
        require(self.length > 0.0, "length", "> 0", self.length)?;
        require(self.n0 >= 1.0, "n0", ">= 1", self.n0)?;
        require(self.kp_prime > 0.0, "kp_prime", "> 0", self.kp_prime)?;
        require(self.ks_prime > 0.0, "ks_prime", "> 0", self.ks_prime)?;
        require(self.chi > 0.0, "chi", "> 0", self.chi)?;
        require(true, "kp_double_prime", "finite", self.kp_double_prime)?;
        require(true, "ks_double_prime", "finite", self.ks_double_prime)?;
        Ok(())
    }

    pub fn with_length(&self, length: f64) -> Self {
        Self { length, ..self.clone() }
    }

    /// Group-delay difference between pump and signal over one pass, s.
    pub fn walk_off(&self) -> f64 {
        (self.kp_prime - self.ks_prime).abs() * self.length
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Geometry {
    Ring,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Resonance {
    /// Only the signal resonates; the pump makes a single pass.
    Singly,
    /// Signal and pump both resonate.
    Doubly,
}

/// How hard the oscillator is pumped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PumpLevel {
    /// `r = sqrt(P / P_thr)`; 1 is threshold.
    Ratio(f64),
    /// Average pump irradiance `P`, W/m².
    Irradiance(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpopoConfig {
    /// Ω, rad/s.
    pub free_spectral_range: f64,
    /// τ_p, s.
    pub pump_pulse_duration: f64,
    /// Pump carrier wavelength (at 2ω₀), m.
    pub pump_center_wavelength: f64,
    pub signal_mirror_transmission: f64,
    /// Only read for doubly resonant cavities.
    pub pump_mirror_transmission: Option<f64>,
    pub geometry: Geometry,
    pub resonance: Resonance,
    /// Pump beam radius, m.
    pub pump_waist: f64,
    /// Signal beam radius, m. Optimal focusing has `w_s = sqrt(2) w_p`.
    pub signal_waist: Option<f64>,
    pub pump: PumpLevel,
}

impl SpopoConfig {
    pub fn validate(&self) -> Result<(), ParameterError> {
        require(self.free_spectral_range > 0.0, "free_spectral_range", "> 0", self.free_spectral_range)?;
        require(self.pump_pulse_duration > 0.0, "pump_pulse_duration", "> 0", self.pump_pulse_duration)?;
        require(self.pump_center_wavelength > 0.0, "pump_center_wavelength", "> 0", self.pump_center_wavelength)?;
        let ts = self.signal_mirror_transmission;
        require(ts > 0.0 && ts < 1.0, "signal_mirror_transmission", "in (0, 1)", ts)?;
        if let Some(tp) = self.pump_mirror_transmission {
            require(tp > 0.0 && tp <= 1.0, "pump_mirror_transmission", "in (0, 1]", tp)?;
        }
        require(self.pump_waist > 0.0, "pump_waist", "> 0", self.pump_waist)?;
        if let Some(ws) = self.signal_waist {
            require(ws > 0.0, "signal_waist", "> 0", ws)?;
        }
        match self.pump {
            PumpLevel::Ratio(r) => require(r >= 0.0, "pump_ratio", ">= 0", r)?,
            PumpLevel::Irradiance(p) => require(p >= 0.0, "pump_irradiance", ">= 0", p)?,
        }
        let np = self.pump_mode_count();
        if np <= 1.0 {
            return Err(ParameterError::SingleModePump(np));
        }
        Ok(())
    }

    /// `N_p = 1/(Ω τ_p)`, the number of pump comb lines within the spectrum.
    pub fn pump_mode_count(&self) -> f64 {
        1.0 / (self.free_spectral_range * self.pump_pulse_duration)
    }

    /// Degenerate signal carrier ω₀, half the pump carrier frequency.
    pub fn signal_carrier(&self) -> f64 {
        0.5 * (2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / self.pump_center_wavelength)
    }

    /// Cavity damping rate `γ_s = Ω T_s / 4π`, s⁻¹.
    pub fn signal_linewidth(&self) -> f64 {
        self.free_spectral_range * self.signal_mirror_transmission / (4.0 * std::f64::consts::PI)
    }

    /// The same oscillator with its cavity length multiplied by `ratio`
    /// (free spectral range divided by `ratio`).
    pub fn with_cavity_length_ratio(&self, ratio: f64) -> Self {
        Self {
            free_spectral_range: self.free_spectral_range / ratio,
            ..self.clone()
        }
    }
}

/// Dimensionless coefficients of `φ(m,q) = β₁(m+q) + β₂p(m+q)² − β₂s(m²+q²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaCoefficients {
    pub beta1: f64,
    pub beta2p: f64,
    pub beta2s: f64,
}

impl BetaCoefficients {
    /// Coefficients on a grid whose unit step stands for `kappa` comb lines.
    pub fn scaled(&self, kappa: f64) -> Self {
        Self {
            beta1: kappa * self.beta1,
            beta2p: kappa * kappa * self.beta2p,
            beta2s: kappa * kappa * self.beta2s,
        }
    }
}

pub fn beta_coefficients(crystal: &CrystalDispersion, omega: f64) -> BetaCoefficients {
    let l = crystal.length;
    BetaCoefficients {
        beta1: 0.5 * omega * (crystal.kp_prime - crystal.ks_prime) * l,
        beta2p: 0.25 * omega * omega * crystal.kp_double_prime * l,
        beta2s: 0.25 * omega * omega * crystal.ks_double_prime * l,
    }
}

/// A crystal of the given length whose coefficients at `omega` are `beta`,
/// with signal group slowness `ks_prime` and the nonlinearity of `like`.
pub fn crystal_with_coefficients(beta: BetaCoefficients, omega: f64, ks_prime: f64, like: &CrystalDispersion) -> CrystalDispersion {
    let l = like.length;
    CrystalDispersion {
        kp_prime: ks_prime + 2.0 * beta.beta1 / (omega * l),
        kp_double_prime: 4.0 * beta.beta2p / (omega * omega * l),
        ks_prime,
        ks_double_prime: 4.0 * beta.beta2s / (omega * omega * l),
        label: String::new(),
        ..like.clone()
    }
}

/// Walk-off and dispersion times entering the Gaussian-regime eigensystem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicTimes {
    /// τ₁ = |k'p − k's| l / √10
    pub tau1: f64,
    /// τ₂ = sqrt(|k''s| l) / (4√3)
    pub tau2: f64,
}

pub fn characteristic_times(crystal: &CrystalDispersion) -> CharacteristicTimes {
    CharacteristicTimes {
        tau1: crystal.walk_off() / 10f64.sqrt(),
        tau2: (crystal.ks_double_prime.abs() * crystal.length).sqrt() / (4.0 * 3f64.sqrt()),
    }
}

/// One inequality `lhs > bound`, with `margin = lhs / bound`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub satisfied: bool,
    pub value: f64,
    pub bound: f64,
    pub margin: f64,
}

impl Condition {
    fn greater_than(value: f64, bound: f64) -> Self {
        let margin = if bound > 0.0 { value / bound } else { f64::INFINITY };
        Self { satisfied: value > bound, value, bound, margin }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Gaussian,
    Borderline,
    NonGaussian,
}

/// Smallest margin still reported as borderline rather than non-Gaussian.
pub const BORDERLINE_MARGIN: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidityVerdict {
    /// τ_p > |k'p − k's| l
    pub pulse: Condition,
    /// l > 20 |k''p − k''s/2| / (k'p − k's)²
    pub length: Condition,
    pub regime: Regime,
}

pub fn gaussian_validity(crystal: &CrystalDispersion, config: &SpopoConfig) -> ValidityVerdict {
    let pulse = Condition::greater_than(config.pump_pulse_duration, crystal.walk_off());
    let dk = crystal.kp_prime - crystal.ks_prime;
    let min_length = if dk == 0.0 {
        f64::INFINITY
    } else {
        20.0 * (crystal.kp_double_prime - 0.5 * crystal.ks_double_prime).abs() / (dk * dk)
    };
    let length = Condition::greater_than(crystal.length, min_length);
    let worst = pulse.margin.min(length.margin);
    let regime = if pulse.satisfied && length.satisfied {
        Regime::Gaussian
    } else if worst >= BORDERLINE_MARGIN {
        Regime::Borderline
    } else {
        Regime::NonGaussian
    };
    ValidityVerdict { pulse, length, regime }
}

/// A named crystal configuration. `values` is `None` for slots whose
/// dispersion data must come from the user.
#[derive(Debug, Clone, PartialEq)]
pub struct CrystalPreset {
    pub name: &'static str,
    pub description: &'static str,
    pub values: Option<CrystalDispersion>,
}

pub const BIBO_PRESET: &str = "bibo-0.4um-typeI";
pub const KNBO3_PRESET: &str = "knbo3";

/// BIBO, collinear degenerate type I (o → e + e) at 0.4 µm pump, θ = 151°.
///
/// Only `n0 / chi` enters the reference threshold. The preset keeps `n0 = 1`
/// and an effective `chi` fitted (minimax relative error) to the reference
/// irradiances 14/344/1400 MW/cm² and powers 2/53/212 kW quoted for a
/// 100 µm crystal at T_s = 0.01/0.05/0.1 and a 70 µm pump radius.
pub fn bibo() -> CrystalDispersion {
    CrystalDispersion {
        kp_prime: 6.6537e-9,
        kp_double_prime: 4.7248e-25,
        ks_prime: 6.2664e-9,
        ks_double_prime: 1.6420e-25,
        chi: 1.2635e-12,
        n0: 1.0,
        length: 100e-6,
        label: BIBO_PRESET.to_string(),
    }
}

pub fn presets() -> Vec<CrystalPreset> {
    vec![
        CrystalPreset {
            name: BIBO_PRESET,
            description: "BiB3O6, type I o->e+e at 0.4 um pump (theta = 151 deg); default length 100 um",
            values: Some(bibo()),
        },
        CrystalPreset {
            name: KNBO3_PRESET,
            description: "KNbO3 slot; all dispersion values must be supplied inline",
            values: None,
        },
    ]
}

pub fn find_preset(name: &str) -> Option<CrystalPreset> {
    presets().into_iter().find(|p| p.name.eq_ignore_ascii_case(name))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    pub(crate) fn case_config(tau_p: f64) -> SpopoConfig {
        SpopoConfig {
            free_spectral_range: 2.0 * PI * 75e6,
            pump_pulse_duration: tau_p,
            pump_center_wavelength: 0.4e-6,
            signal_mirror_transmission: 0.01,
            pump_mirror_transmission: None,
            geometry: Geometry::Ring,
            resonance: Resonance::Singly,
            pump_waist: 70e-6,
            signal_waist: None,
            pump: PumpLevel::Ratio(0.9),
        }
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn bibo_beta1_case_a() {
        // hand calculation: π·75e6 · 0.3873e-9 · 1e-4 = 9.12554e-6
        let b = beta_coefficients(&bibo(), 2.0 * PI * 75e6);
        assert!(rel(b.beta1, 9.125_541e-6) < 1e-5, "{}", b.beta1);
        let b2s = 0.25 * (2.0 * PI * 75e6f64).powi(2) * 1.6420e-25 * 1e-4;
        assert_eq!(b.beta2s, b2s);
    }

    #[test]
    fn coefficients_round_trip() {
        let b = BetaCoefficients { beta1: 0.02, beta2p: 1e-3, beta2s: 5e-4 };
        let c = crystal_with_coefficients(b, 1e9, 6e-9, &bibo());
        let back = beta_coefficients(&c, 1e9);
        assert!((back.beta1 / b.beta1 - 1.0).abs() < 1e-12);
        assert!((back.beta2p / b.beta2p - 1.0).abs() < 1e-12);
        assert!((back.beta2s / b.beta2s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_walk_off_gives_zero_beta1() {
        let mut c = bibo();
        c.kp_prime = c.ks_prime;
        assert_eq!(beta_coefficients(&c, 1e9).beta1, 0.0);
    }

    #[test]
    fn betas_scale_with_length_and_omega() {
        let c = bibo();
        let b = beta_coefficients(&c, 1e9);
        let b2 = beta_coefficients(&c.with_length(2.0 * c.length), 1e9);
        assert!(rel(b2.beta1, 2.0 * b.beta1) < 1e-15);
        assert!(rel(b2.beta2p, 2.0 * b.beta2p) < 1e-15);
        assert!(rel(b2.beta2s, 2.0 * b.beta2s) < 1e-15);
        let bw = beta_coefficients(&c, 2e9);
        assert!(rel(bw.beta1, 2.0 * b.beta1) < 1e-15);
        assert!(rel(bw.beta2p, 4.0 * b.beta2p) < 1e-15);
        assert!(rel(bw.beta2s, 4.0 * b.beta2s) < 1e-15);
    }

    #[test]
    fn walk_off_time_case_a() {
        let t = characteristic_times(&bibo());
        // (6.6537 − 6.2664)e-9 * 1e-4 / sqrt(10)
        assert!(rel(t.tau1, 12.2475e-15) < 1e-4, "{}", t.tau1);
    }

    #[test]
    fn characteristic_times_scaling_and_order_of_magnitude() {
        let c = bibo().with_length(1e-3);
        let t = characteristic_times(&c);
        assert!(t.tau1 > 50e-15 && t.tau1 < 200e-15);
        assert!(t.tau2 > 1e-15 && t.tau2 < 10e-15);
        let t4 = characteristic_times(&c.with_length(4e-3));
        assert!(rel(t4.tau1, 4.0 * t.tau1) < 1e-14);
        assert!(rel(t4.tau2, 2.0 * t.tau2) < 1e-14);
    }

    #[test]
    fn beta1_and_tau1_agree() {
        let c = bibo();
        let omega = 2.0 * PI * 75e6;
        let b = beta_coefficients(&c, omega);
        let t = characteristic_times(&c);
        assert!(rel(0.5 * omega * t.tau1 * 10f64.sqrt(), b.beta1.abs()) < 1e-12);
    }

    #[test]
    fn validity_of_the_three_cases() {
        let cfg = case_config(100e-15);
        let a = gaussian_validity(&bibo(), &cfg);
        assert!(a.pulse.satisfied);
        assert!(rel(a.pulse.bound, 38.73e-15) < 1e-3);
        assert_eq!(a.regime, Regime::Gaussian);

        let b = gaussian_validity(&bibo().with_length(0.5e-3), &cfg);
        assert!(!b.pulse.satisfied);
        assert!(rel(b.pulse.bound, 193.65e-15) < 1e-3);
        assert_eq!(b.regime, Regime::Borderline);

        let c = gaussian_validity(&bibo().with_length(5e-3), &cfg);
        assert!(!c.pulse.satisfied);
        assert!(rel(c.pulse.bound, 1936.5e-15) < 1e-3);
        assert_eq!(c.regime, Regime::NonGaussian);
    }

    #[test]
    fn pulse_condition_is_monotone_in_length() {
        let cfg = case_config(100e-15);
        let mut was_satisfied = true;
        for i in 1..200 {
            let v = gaussian_validity(&bibo().with_length(i as f64 * 5e-6), &cfg);
            assert!(was_satisfied || !v.pulse.satisfied);
            was_satisfied = v.pulse.satisfied;
        }
        assert!(!was_satisfied);
    }

    #[test]
    fn config_validation() {
        let mut cfg = case_config(100e-15);
        assert!(cfg.validate().is_ok());
        assert!((cfg.pump_mode_count() - 21_220.66).abs() < 0.1);
        cfg.signal_mirror_transmission = 1.5;
        assert!(cfg.validate().is_err());
        let mut cfg = case_config(1e-6);
        cfg.free_spectral_range = 1e7;
        assert!(matches!(cfg.validate(), Err(ParameterError::SingleModePump(_))));
        let mut c = bibo();
        c.length = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn preset_registry() {
        assert_eq!(find_preset("bibo-0.4um-typeI").unwrap().values, Some(bibo()));
        assert!(find_preset("knbo3").unwrap().values.is_none());
        assert!(find_preset("quartz").is_none());
        let b = bibo();
        assert_eq!(
            (b.kp_prime, b.kp_double_prime, b.ks_prime, b.ks_double_prime),
            (6.6537e-9, 4.7248e-25, 6.2664e-9, 1.6420e-25)
        );
    }
}
