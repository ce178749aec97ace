//! The real symmetric coupling matrix between signal comb lines: a phase
//! matching factor times the pump amplitude at the summed index, assembled
//! on a coarse grid where one step stands for `kappa` comb lines.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::dispersion::{beta_coefficients, BetaCoefficients, CrystalDispersion, SpopoConfig};

/// Width multiple of the widest pump/phase-matching scale that the grid must cover.
pub const MIN_WIDTHS_COVERED: f64 = 5.0;
pub const MIN_HALF_WIDTH: usize = 8;
pub const DEFAULT_MIN_HALF_WIDTH: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CouplingError {
    #[error("grid half-width {half_width} is narrower than the required {required} scaled modes")]
    GridTooNarrow { half_width: usize, required: usize },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeGrid {
    pub kappa: f64,
    /// The grid covers scaled indices `-half_width..=half_width`.
    pub half_width: usize,
    /// Free spectral range the grid refers to, rad/s.
    pub omega: f64,
}

impl ModeGrid {
    pub fn new(kappa: f64, half_width: usize, omega: f64) -> Result<Self, CouplingError> {
        if !(kappa >= 1.0 && kappa.is_finite()) {
            return Err(CouplingError::InvalidGrid(format!("kappa must be >= 1, got {kappa}")));
        }
        if half_width < MIN_HALF_WIDTH {
            return Err(CouplingError::InvalidGrid(format!(
                "half_width must be >= {MIN_HALF_WIDTH}, got {half_width}"
            )));
        }
        if !(omega > 0.0) {
            return Err(CouplingError::InvalidGrid(format!("omega must be > 0, got {omega}")));
        }
        Ok(Self { kappa, half_width, omega })
    }

    /// Grid chosen from the physical scales of the problem.
    ///
    /// `kappa` defaults to `min(N_p, N₁)/20` rounded onto the 1-2-5
    /// series, so the narrowest feature spans about twenty scaled steps.
    /// The half-width covers the main phase-matching lobe (`|φ|` up to π plus
    /// the phase accumulated across the pump band) for summed indices within
    /// two pump widths of the centre.
    pub fn auto(crystal: &CrystalDispersion, config: &SpopoConfig, kappa: Option<f64>) -> Result<Self, CouplingError> {
        let omega = config.free_spectral_range;
        let beta = beta_coefficients(crystal, omega);
        let np = config.pump_mode_count();
        let kappa = kappa.unwrap_or_else(|| default_kappa(np, &beta));
        let b = beta.scaled(kappa);
        let npp = np / kappa;

        let s_max = 2.0 * npp;
        let budget = PI + b.beta1.abs() * s_max + (b.beta2p - 0.5 * b.beta2s).abs() * s_max * s_max;
        let lobe = if b.beta2s != 0.0 {
            let d_max = (2.0 * budget / b.beta2s.abs()).sqrt();
            (0.5 * (d_max + s_max)).ceil()
        } else {
            0.0
        };
        let required = required_half_width(npp, &b);
        let half_width = (lobe as usize).max(required).max(DEFAULT_MIN_HALF_WIDTH);
        Self::new(kappa, half_width, omega)
    }

    pub fn len(&self) -> usize {
        2 * self.half_width + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Scaled index of row/column `i`.
    pub fn index(&self, i: usize) -> i64 {
        i as i64 - self.half_width as i64
    }

    /// Largest physical comb index represented on the grid.
    pub fn physical_half_width(&self) -> i64 {
        (self.kappa * self.half_width as f64).floor() as i64
    }
}

/// `min(N_p, N₁)/20` snapped to the nearest (in ratio) of 1, 2, 5 times a
/// power of ten, at least 1.
pub fn default_kappa(pump_modes: f64, beta: &BetaCoefficients) -> f64 {
    let n1 = phase_matching_width(beta.beta1);
    let target = pump_modes.min(n1) / 20.0;
    if !(target > 1.0) {
        return 1.0;
    }
    let decade = 10f64.powf(target.log10().floor());
    let mantissa = target / decade;
    let snapped = [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .min_by(|a: &f64, b: &f64| (mantissa / a).ln().abs().total_cmp(&(mantissa / b).ln().abs()))
        .unwrap_or(1.0);
    snapped * decade
}

/// `N₁ = sqrt(5/2)/|β₁|`; infinite without walk-off.
pub fn phase_matching_width(beta1: f64) -> f64 {
    if beta1 == 0.0 {
        f64::INFINITY
    } else {
        (2.5f64).sqrt() / beta1.abs()
    }
}

/// `N₂ = 2 sqrt(3) / sqrt(|β₂s|)`; infinite without signal dispersion.
pub fn anti_diagonal_width(beta2s: f64) -> f64 {
    if beta2s == 0.0 {
        f64::INFINITY
    } else {
        2.0 * 3f64.sqrt() / beta2s.abs().sqrt()
    }
}

fn required_half_width(scaled_pump_modes: f64, scaled: &BetaCoefficients) -> usize {
    let n1 = phase_matching_width(scaled.beta1);
    let widest = if n1.is_finite() { scaled_pump_modes.max(n1) } else { scaled_pump_modes };
    (MIN_WIDTHS_COVERED * widest).ceil() as usize
}

pub fn phase_mismatch_angle(beta1: f64, beta2p: f64, beta2s: f64, m: f64, q: f64) -> f64 {
    let s = m + q;
    beta1 * s + beta2p * s * s - beta2s * (m * m + q * q)
}

/// `sin φ / φ`, exactly 1 at the origin.
pub fn sinc_factor(phi: f64) -> f64 {
    if phi.abs() < 1e-4 {
        let p2 = phi * phi;
        1.0 - p2 / 6.0 * (1.0 - p2 / 20.0)
    } else {
        phi.sin() / phi
    }
}

/// Gaussian pump amplitude at scaled summed index `m` for a comb of
/// `n_p` physical lines, including the `sqrt(kappa)` of the scaled matrix.
pub fn pump_spectrum(n_p: f64, m: f64, kappa: f64) -> f64 {
    let npp = n_p / kappa;
    PI.powf(-0.25) / npp.sqrt() * (-0.5 * (m / npp).powi(2)).exp()
}

/// Pump amplitudes across the comb.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum PumpProfile {
    /// Transform-limited Gaussian of `N_p = 1/(Ω τ_p)` lines, centred on the
    /// phase-matched pump line.
    Gaussian,
    /// Real amplitudes on physical summed indices `first_index..`. Linearly
    /// interpolated and zero outside the samples; normalization is the
    /// caller's choice (the Gaussian has `Σ α² = 1`).
    Sampled { first_index: i64, amplitudes: Vec<f64> },
}

impl PumpProfile {
    fn scaled_amplitude(&self, n_p: f64, s: f64, kappa: f64) -> f64 {
        match self {
            PumpProfile::Gaussian => pump_spectrum(n_p, s, kappa),
            PumpProfile::Sampled { first_index, amplitudes } => {
                let x = kappa * s - *first_index as f64;
                if x < 0.0 || amplitudes.is_empty() || x > (amplitudes.len() - 1) as f64 {
                    return 0.0;
                }
                let i = x.floor() as usize;
                let t = x - i as f64;
                let a0 = amplitudes[i];
                let a1 = amplitudes.get(i + 1).copied().unwrap_or(0.0);
                kappa.sqrt() * (a0 + t * (a1 - a0))
            }
        }
    }
}

/// Dense coupling matrix on a scaled grid. Entries are stored in a single
/// buffer that reads identically row- or column-major (the matrix is
/// symmetric).
#[derive(Debug, Clone)]
pub struct CouplingMatrix {
    pub grid: ModeGrid,
    /// Coefficients used on the scaled grid.
    pub scaled_beta: BetaCoefficients,
    /// `N_p / kappa`.
    pub scaled_pump_modes: f64,
    /// Σ α² over the summed indices `-2M..=2M` of the grid.
    pub pump_norm_check: f64,
    entries: Vec<f64>,
}

impl CouplingMatrix {
    /// Wraps explicit entries (row-major, must be symmetric).
    pub fn from_entries(grid: ModeGrid, entries: Vec<f64>) -> Result<Self, CouplingError> {
        let n = grid.len();
        if entries.len() != n * n {
            return Err(CouplingError::InvalidGrid(format!(
                "expected {} entries for a {n}x{n} matrix, got {}",
                n * n,
                entries.len()
            )));
        }
        for i in 0..n {
            for j in 0..i {
                if entries[i * n + j] != entries[j * n + i] {
                    return Err(CouplingError::InvalidGrid(format!("entries not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self {
            grid,
            scaled_beta: BetaCoefficients { beta1: 0.0, beta2p: 0.0, beta2s: 0.0 },
            scaled_pump_modes: f64::NAN,
            pump_norm_check: f64::NAN,
            entries,
        })
    }

    pub fn dim(&self) -> usize {
        self.grid.len()
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Entry at grid positions (row, column).
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim() + j]
    }

    /// Entry at scaled mode indices.
    pub fn at(&self, m: i64, q: i64) -> f64 {
        let h = self.grid.half_width as i64;
        self.get((m + h) as usize, (q + h) as usize)
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.entries.iter().map(|x| x * x).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |a, x| a.max(x.abs()))
    }
}

fn assemble(grid: ModeGrid, entry: impl Fn(f64, f64) -> f64 + Sync) -> Vec<f64> {
    let n = grid.len();
    let mut entries = vec![0.0; n * n];
    entries.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let m = grid.index(i) as f64;
        for (j, x) in row.iter_mut().enumerate().take(i + 1) {
            *x = entry(m, grid.index(j) as f64);
        }
    });
    for i in 0..n {
        for j in 0..i {
            entries[j * n + i] = entries[i * n + j];
        }
    }
    entries
}

fn check_grid(crystal: &CrystalDispersion, config: &SpopoConfig, grid: &ModeGrid) -> Result<(BetaCoefficients, f64), CouplingError> {
    let beta = beta_coefficients(crystal, grid.omega).scaled(grid.kappa);
    let npp = config.pump_mode_count() / grid.kappa;
    let required = required_half_width(npp, &beta);
    if grid.half_width < required {
        return Err(CouplingError::GridTooNarrow { half_width: grid.half_width, required });
    }
    Ok((beta, npp))
}

fn pump_norm(grid: &ModeGrid, alpha: impl Fn(f64) -> f64) -> f64 {
    let h = 2 * grid.half_width as i64;
    (-h..=h).map(|s| alpha(s as f64).powi(2)).sum()
}

pub fn build_coupling_matrix(
    crystal: &CrystalDispersion,
    config: &SpopoConfig,
    grid: ModeGrid,
) -> Result<CouplingMatrix, CouplingError> {
    build_with_pump(crystal, config, grid, &PumpProfile::Gaussian)
}

pub fn build_with_pump(
    crystal: &CrystalDispersion,
    config: &SpopoConfig,
    grid: ModeGrid,
    pump: &PumpProfile,
) -> Result<CouplingMatrix, CouplingError> {
    let (b, npp) = check_grid(crystal, config, &grid)?;
    let np = config.pump_mode_count();
    let kappa = grid.kappa;
    let alpha = |s: f64| pump.scaled_amplitude(np, s, kappa);
    let entries = assemble(grid, |m, q| {
        sinc_factor(phase_mismatch_angle(b.beta1, b.beta2p, b.beta2s, m, q)) * alpha(m + q)
    });
    Ok(CouplingMatrix {
        grid,
        scaled_beta: b,
        scaled_pump_modes: npp,
        pump_norm_check: pump_norm(&grid, alpha),
        entries,
    })
}

/// Two-Gaussian approximation of the phase-matching factor, along the
/// diagonal with width `N₁` and across it with width `N₂`.
pub fn gaussian_coupling_matrix(
    crystal: &CrystalDispersion,
    config: &SpopoConfig,
    grid: ModeGrid,
) -> Result<CouplingMatrix, CouplingError> {
    let (b, npp) = check_grid(crystal, config, &grid)?;
    let np = config.pump_mode_count();
    let kappa = grid.kappa;
    let n1 = phase_matching_width(b.beta1);
    let n2 = anti_diagonal_width(b.beta2s);
    let entries = assemble(grid, |m, q| {
        let s = m + q;
        let d = m - q;
        (-0.5 * (s / n1).powi(2)).exp() * (-0.5 * (d / n2).powi(2)).exp() * pump_spectrum(np, s, kappa)
    });
    Ok(CouplingMatrix {
        grid,
        scaled_beta: b,
        scaled_pump_modes: npp,
        pump_norm_check: pump_norm(&grid, |s| pump_spectrum(np, s, kappa)),
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::{bibo, Geometry, PumpLevel, Resonance};

    fn case_config() -> SpopoConfig {
        SpopoConfig {
            free_spectral_range: 2.0 * PI * 75e6,
            pump_pulse_duration: 100e-15,
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

    #[test]
    fn angle_basics() {
        assert_eq!(phase_mismatch_angle(0.3, 0.2, 0.1, 0.0, 0.0), 0.0);
        let a = phase_mismatch_angle(0.3, 0.0, 0.0, 5.0, -2.0);
        assert_eq!(a, phase_mismatch_angle(0.3, 0.0, 0.0, 1.0, 2.0));
        let b = beta_coefficients(&bibo(), 2.0 * PI * 75e6);
        let phi = phase_mismatch_angle(b.beta1, b.beta2p, b.beta2s, 1e4, -1e4);
        assert_eq!(phi, -2.0 * b.beta2s * 1e8);
    }

    #[test]
    fn sinc_values() {
        assert_eq!(sinc_factor(0.0), 1.0);
        assert!(sinc_factor(PI).abs() < 1e-16);
        assert!((sinc_factor(PI / 2.0) - 2.0 / PI).abs() < 1e-15);
        for i in 0..2000 {
            let phi = 10f64.powf(-3.0 + 6.0 * i as f64 / 1999.0);
            let naive = phi.sin() / phi;
            let f = sinc_factor(phi);
            assert!(((f - naive) / naive).abs() < 1e-12 || (f - naive).abs() < 1e-15, "{phi}");
        }
        // the series branch joins the direct formula smoothly
        let below = sinc_factor(0.999_999e-4);
        let above = sinc_factor(1.000_001e-4);
        assert!((below - above).abs() < 1e-12);
    }

    #[test]
    fn pump_spectrum_shape() {
        let np = 21_220.66;
        let kappa = 1000.0;
        let peak = pump_spectrum(np, 0.0, kappa);
        assert_eq!(peak, PI.powf(-0.25) * (np / kappa).powf(-0.5));
        let at_width = pump_spectrum(np, np / kappa, kappa);
        assert!((at_width / peak - (-0.5f64).exp()).abs() < 1e-14);
        let w = (6.0 * np / kappa).ceil() as i64;
        let sum: f64 = (-w..=w).map(|m| pump_spectrum(np, m as f64, kappa).powi(2)).sum();
        assert!((sum - 1.0).abs() < 1e-6, "{sum}");
    }

    fn small_grid() -> (CouplingMatrix, CouplingMatrix) {
        let cfg = case_config();
        let grid = ModeGrid::new(1000.0, 900, cfg.free_spectral_range).unwrap();
        let exact = build_coupling_matrix(&bibo(), &cfg, grid).unwrap();
        let gauss = gaussian_coupling_matrix(&bibo(), &cfg, grid).unwrap();
        (exact, gauss)
    }

    #[test]
    fn exact_and_gaussian_matrices_case_a() {
        let (exact, gauss) = small_grid();
        let n = exact.dim();
        for i in (0..n).step_by(37) {
            for j in (0..n).step_by(41) {
                assert_eq!(exact.get(i, j), exact.get(j, i));
            }
        }
        let peak = PI.powf(-0.25) * (21_220.659_34f64 / 1000.0).powf(-0.5);
        assert!((exact.at(0, 0) - peak).abs() < 1e-6 * peak);
        assert_eq!(gauss.at(0, 0), exact.at(0, 0));
        assert!((exact.pump_norm_check - 1.0).abs() < 1e-9);
        // the band runs along m + q ≈ 0: the anti-diagonal end carries
        // weight while the diagonal end is empty
        assert!(exact.at(300, -300).abs() > 0.5 * peak);
        assert!(exact.at(300, 300).abs() < 1e-12);
    }

    #[test]
    fn gaussian_width_along_diagonal() {
        let (_, g) = small_grid();
        let b = g.scaled_beta;
        let n1 = phase_matching_width(b.beta1);
        let np = case_config().pump_mode_count();
        // same m − q = 0, summed index 0 and 2·86
        let ratio = g.at(86, 86) / g.at(0, 0);
        let pump_ratio = pump_spectrum(np, 172.0, 1000.0) / pump_spectrum(np, 0.0, 1000.0);
        let expected = (-0.5 * (172.0 / n1).powi(2)).exp();
        assert!((ratio / pump_ratio - expected).abs() < 1e-12);
        // at m + q = N₁ the phase-matching factor alone is e^{-1/2}
        assert!(((-0.5 * (n1 / n1).powi(2)).exp() - (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn translation_structure_without_signal_dispersion() {
        let mut c = bibo();
        c.ks_double_prime = 0.0;
        let cfg = case_config();
        let grid = ModeGrid::new(1000.0, 900, cfg.free_spectral_range).unwrap();
        let l = build_coupling_matrix(&c, &cfg, grid).unwrap();
        for (m, q) in [(0, 0), (10, -3), (-200, 150), (400, 5)] {
            assert_eq!(l.at(m, q), l.at(m + 1, q - 1));
        }
    }

    #[test]
    fn narrow_grid_is_rejected() {
        let cfg = case_config();
        let grid = ModeGrid::new(1000.0, 100, cfg.free_spectral_range).unwrap();
        assert!(matches!(
            build_coupling_matrix(&bibo(), &cfg, grid),
            Err(CouplingError::GridTooNarrow { .. })
        ));
        assert!(ModeGrid::new(0.5, 100, 1.0).is_err());
        assert!(ModeGrid::new(1.0, 4, 1.0).is_err());
    }

    #[test]
    fn auto_grid_for_the_three_cases() {
        let cfg = case_config();
        let a = ModeGrid::auto(&bibo(), &cfg, None).unwrap();
        assert_eq!(a.kappa, 1000.0);
        let b = ModeGrid::auto(&bibo().with_length(0.5e-3), &cfg, None).unwrap();
        assert_eq!(b.kappa, 1000.0);
        let c = ModeGrid::auto(&bibo().with_length(5e-3), &cfg, None).unwrap();
        assert_eq!(c.kappa, 200.0);
        assert!(a.len() < 3001 && b.len() < 2001 && c.len() < 5301, "{a:?} {b:?} {c:?}");
        assert_eq!(default_kappa(1e9, &BetaCoefficients { beta1: 0.0, beta2p: 0.0, beta2s: 0.0 }), 5e7);
        assert_eq!(default_kappa(10.0, &BetaCoefficients { beta1: 0.0, beta2p: 0.0, beta2s: 0.0 }), 1.0);
    }

    #[test]
    fn sampled_pump_matches_gaussian() {
        let cfg = case_config();
        let np = cfg.pump_mode_count();
        let w = (8.0 * np) as i64;
        let amplitudes: Vec<f64> = (-w..=w).map(|s| pump_spectrum(np, s as f64, 1.0)).collect();
        let pump = PumpProfile::Sampled { first_index: -w, amplitudes };
        let grid = ModeGrid::new(1000.0, 900, cfg.free_spectral_range).unwrap();
        let g = build_coupling_matrix(&bibo(), &cfg, grid).unwrap();
        let s = build_with_pump(&bibo(), &cfg, grid, &pump).unwrap();
        let diff = g
            .entries()
            .iter()
            .zip(s.entries())
            .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        assert!(diff < 1e-12, "{diff}");
    }
}
