#![allow(dead_code)]

use faer::linalg::solvers::DenseSolveCore;
use faer::{c64, Mat};
use num_complex::Complex64;
use proptest::prelude::*;
use std::f64::consts::PI;
use std::path::PathBuf;

use supermode_lab::config::parse_config_file;
use supermode_lab::coupling::{build_coupling_matrix, ModeGrid};
use supermode_lab::dispersion::{
    bibo, crystal_with_coefficients, BetaCoefficients, CrystalDispersion, Geometry, PumpLevel, Resonance, SpopoConfig,
};
use supermode_lab::run::{run, RunOutput};
use supermode_lab::spectral::{cavity_length_rescale, diagonalize, eigenvalues, SupermodeBasis};
use supermode_lab::squeezing::{quadrature_variance, Quadrature};
use supermode_lab::threshold::rate_eigenvalues;

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

pub fn run_golden(name: &str) -> RunOutput {
    let config = parse_config_file(&config_path(name)).expect("golden config parses");
    run(&config).expect("golden run succeeds")
}

/// Oscillator of the worked cases: 75 MHz comb, 100 fs pump, 1 % output
/// coupler, singly resonant ring, 70 µm pump waist.
pub fn case_spopo() -> SpopoConfig {
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

/// A small problem given by its widths in comb lines: pump `n_p`,
/// phase-matching `n1 = sqrt(5/2)/|β₁|` and anti-diagonal
/// `n2 = 2 sqrt(3)/sqrt(|β₂s|)`, with `β₂p = pump_gvd_ratio · β₂s`.
#[derive(Debug, Clone, Copy)]
pub struct SmallProblem {
    pub n_p: f64,
    pub n1: f64,
    pub n2: f64,
    pub pump_gvd_ratio: f64,
    pub walk_off_sign: f64,
    pub gvd_sign: f64,
}

pub const SMALL_OMEGA: f64 = 2.0 * PI * 100e6;

impl SmallProblem {
    pub fn beta(&self) -> BetaCoefficients {
        let b2s = self.gvd_sign * 12.0 / (self.n2 * self.n2);
        BetaCoefficients {
            beta1: self.walk_off_sign * (2.5f64).sqrt() / self.n1,
            beta2p: self.pump_gvd_ratio * b2s,
            beta2s: b2s,
        }
    }

    pub fn crystal(&self) -> CrystalDispersion {
        let like = bibo();
        crystal_with_coefficients(self.beta(), SMALL_OMEGA, like.ks_prime, &like)
    }

    pub fn spopo(&self) -> SpopoConfig {
        SpopoConfig {
            free_spectral_range: SMALL_OMEGA,
            pump_pulse_duration: 1.0 / (SMALL_OMEGA * self.n_p),
            ..case_spopo()
        }
    }

    /// Automatic half-width at unit scale, rounded up to even so the
    /// window is unchanged at twice the scale.
    pub fn half_width(&self) -> usize {
        let m = ModeGrid::auto(&self.crystal(), &self.spopo(), Some(1.0)).unwrap().half_width;
        m + m % 2
    }

    pub fn basis(&self, kappa: f64, half_width: usize) -> SupermodeBasis {
        let grid = ModeGrid::new(kappa, half_width, SMALL_OMEGA).unwrap();
        diagonalize(&build_coupling_matrix(&self.crystal(), &self.spopo(), grid).unwrap()).unwrap()
    }
}

/// Random small problems whose anti-diagonal width exceeds the other two,
/// so that doubling the scale still resolves the coupling.
pub fn small_problem() -> impl Strategy<Value = SmallProblem> {
    (10.0..40.0f64, 10.0..60.0f64, 1.5..6.0f64, 0.5..3.0f64, any::<bool>(), any::<bool>()).prop_map(
        |(n_p, n1, spread, pump_gvd_ratio, flip1, flip2)| SmallProblem {
            n_p,
            n1,
            n2: spread * n_p.max(n1),
            pump_gvd_ratio,
            walk_off_sign: if flip1 { -1.0 } else { 1.0 },
            gvd_sign: if flip2 { -1.0 } else { 1.0 },
        },
    )
}

pub fn max_abs(m: &Mat<f64>) -> f64 {
    let mut x = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            x = x.max(m[(i, j)].abs());
        }
    }
    x
}

/// Every invariant of the property suite on one problem; the error names
/// the first one violated.
pub fn check_invariants(p: &SmallProblem, r: f64) -> Result<(), String> {
    let crystal = p.crystal();
    let spopo = p.spopo();
    let m = p.half_width();
    let grid = ModeGrid::new(1.0, m, SMALL_OMEGA).map_err(|e| e.to_string())?;
    let matrix = build_coupling_matrix(&crystal, &spopo, grid).map_err(|e| e.to_string())?;
    let n = matrix.dim();

    for i in 0..n {
        for j in 0..i {
            if matrix.get(i, j) != matrix.get(j, i) {
                return Err(format!("symmetry broken at ({i}, {j})"));
            }
        }
    }

    let basis = diagonalize(&matrix).map_err(|e| e.to_string())?;
    let v = basis.vectors();
    let mut gram = v.transpose() * v;
    for i in 0..n {
        gram[(i, i)] -= 1.0;
    }
    let ortho = max_abs(&gram);
    if ortho > 1e-10 {
        return Err(format!("orthonormality defect {ortho:e}"));
    }

    let sum: f64 = basis.eigenvalues.iter().map(|l| l * l).sum::<f64>() / basis.kappa();
    let frob = matrix.frobenius_norm_sq();
    if ((sum - frob) / frob).abs() > 1e-8 {
        return Err(format!("sum rule: sum of squares {sum} vs Frobenius {frob}"));
    }

    for x in basis.ratios() {
        let vp = quadrature_variance(x, r, 0.0, Quadrature::Plus).map_err(|e| e.to_string())?;
        let vm = quadrature_variance(x, r, 0.0, Quadrature::Minus).map_err(|e| e.to_string())?;
        if (vp * vm - 1.0).abs() > 1e-10 {
            return Err(format!("V+ V- = {} for ratio {x}", vp * vm));
        }
    }

    // same physical window at twice the scale factor
    let coarse = ModeGrid::new(2.0, m / 2, SMALL_OMEGA).map_err(|e| e.to_string())?;
    let l2 = eigenvalues(&build_coupling_matrix(&crystal, &spopo, coarse).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?[0];
    let l1 = basis.lambda0();
    if ((l2 - l1) / l1).abs() > 1e-3 {
        return Err(format!("kappa invariance: {l1} at kappa=1, {l2} at kappa=2"));
    }

    // cavity 1.5x longer, same scale factor, window grown to match
    let ratio = 1.5;
    let longer = spopo.with_cavity_length_ratio(ratio);
    let longer_crystal = crystal.clone();
    let wide = ModeGrid::new(1.0, (m as f64 * ratio).ceil() as usize, longer.free_spectral_range).map_err(|e| e.to_string())?;
    let rebuilt = eigenvalues(&build_coupling_matrix(&longer_crystal, &longer, wide).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?[0];
    let predicted = cavity_length_rescale(&basis, ratio)[0];
    if ((rebuilt - predicted) / predicted).abs() > 1e-3 {
        return Err(format!("cavity rescale: predicted {predicted}, rebuilt {rebuilt}"));
    }

    let gamma = spopo.signal_linewidth();
    let rates = rate_eigenvalues(&basis.ratios(), 1.0, gamma);
    let min = rates.iter().flat_map(|p| [p.plus, p.minus]).fold(f64::INFINITY, f64::min);
    if min != -2.0 * gamma {
        return Err(format!("minimum rate at threshold {min} != {}", -2.0 * gamma));
    }
    Ok(())
}

/// Homodyne spectrum from the linearized input-output relation solved in
/// the frequency domain, with no supermode decomposition: `T(w) = −I +
/// 2((iw + 1)I − σK)⁻¹` on `(S, S†)`, `K = [[0, L], [L, 0]]`,
/// `σ = r/Λ₀`, and `V = cᵀ T(w) N T(−w)ᵀ c` with `c = (e*, e)`.
/// `l` is row-major `n×n`.
pub fn homodyne_oracle(l: &[f64], n: usize, lambda0: f64, e: &[Complex64], r: f64, w: f64) -> f64 {
    let sigma = r / lambda0;
    let transfer = |w: f64| -> Mat<c64> {
        let a = Mat::<c64>::from_fn(2 * n, 2 * n, |i, j| {
            let (bi, bj) = (i / n, j / n);
            let k = if bi != bj { l[(i % n) * n + j % n] } else { 0.0 };
            let diag = if i == j { c64::new(1.0, w) } else { c64::new(0.0, 0.0) };
            diag - c64::new(sigma * k, 0.0)
        });
        let inv = a.partial_piv_lu().inverse();
        Mat::<c64>::from_fn(2 * n, 2 * n, |i, j| {
            let id = if i == j { 1.0 } else { 0.0 };
            inv[(i, j)] * 2.0 - c64::new(id, 0.0)
        })
    };
    let tp = transfer(w);
    let tm = transfer(-w);
    let c: Vec<c64> = e.iter().map(|z| z.conj()).chain(e.iter().copied()).collect();
    // N picks the (S, S†) correlation block
    let mut total = c64::new(0.0, 0.0);
    for a in 0..2 * n {
        for b in 0..2 * n {
            let mut s = c64::new(0.0, 0.0);
            for i in 0..n {
                s += tp[(a, i)] * tm[(b, n + i)];
            }
            total += c[a] * s * c[b];
        }
    }
    total.re
}

/// Largest |supermode route − linear-solve route| over a few random
/// symmetric 6×6 couplings, LOs, pump ratios and frequencies.
pub fn oracle_gap(seed: u64, trials: usize) -> f64 {
    use rand::{Rng, SeedableRng};
    use supermode_lab::spectral::symmetric_eigen;
    use supermode_lab::squeezing::homodyne_from_projections;

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = 6;
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let x: f64 = rng.gen_range(-1.0..1.0);
                l[i * n + j] = x;
                l[j * n + i] = x;
            }
        }
        let eig = symmetric_eigen(n, &l).unwrap();
        let lambda0 = eig.values[0];
        let ratios: Vec<f64> = eig.values.iter().map(|x| x / lambda0).collect();
        let mut e: Vec<Complex64> = (0..n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let norm = e.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        e.iter_mut().for_each(|z| *z /= norm);
        let d: Vec<Complex64> = (0..n)
            .map(|k| (0..n).map(|m| e[m] * eig.vectors[(m, k)]).sum())
            .collect();
        let r = rng.gen_range(0.05..0.98);
        for w in [0.0, 0.3, 1.7, rng.gen_range(0.0..5.0)] {
            let via_modes = homodyne_from_projections(&ratios, &d, r, w).unwrap().variance;
            let direct = homodyne_oracle(&l, n, lambda0, &e, r, w);
            worst = worst.max((via_modes - direct).abs());
        }
    }
    worst
}
