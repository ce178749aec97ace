//! Eigen-decomposition of the coupling matrix into supermodes, the closed
//! form Hermite-Gauss eigensystem of the two-Gaussian approximation, and
//! helpers moving eigenvectors between the scaled and physical comb grids.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::evd::{self, ComputeEigenvectors};
use faer::diag::Diag;
use faer::{Mat, MatRef, Par};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::OnceLock;
use thiserror::Error;

use crate::coupling::{CouplingMatrix, ModeGrid};
use crate::dispersion::{characteristic_times, gaussian_validity, CrystalDispersion, SpopoConfig, ValidityVerdict};

pub const DEFAULT_EPSILON: f64 = 1e-3;
/// Largest accepted `‖𝓛v − Λv‖ / ‖𝓛‖` for a retained supermode.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;
/// Relative gap below which two |Λ| count as degenerate when ordering.
const DEGENERACY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("eigensolver did not converge")]
    NoConvergence,
    #[error("eigen-residual {residual:e} of supermode {mode} exceeds {tolerance:e}")]
    ConvergenceFailure { mode: usize, residual: f64, tolerance: f64 },
    #[error("samples cover physical indices {first}..={last}, outside the grid window ±{half_width}")]
    WindowMismatch { first: i64, last: i64, half_width: i64 },
    #[error("supermode {0} is out of range")]
    NoSuchMode(usize),
}

#[derive(Debug, Clone)]
pub struct SupermodeBasis {
    /// Physical eigenvalues (scaled-grid values times `sqrt(kappa)`), sorted
    /// by descending magnitude.
    pub eigenvalues: Vec<f64>,
    pub grid: ModeGrid,
    pub n_significant: usize,
    pub epsilon: f64,
    /// Largest relative eigen-residual among the retained supermodes.
    pub max_residual: f64,
    /// Set when the largest-magnitude eigenvalue is negative; no sign is
    /// flipped, quadrature roles simply swap.
    pub leading_negative: bool,
    /// Column `k` holds supermode `k` on the scaled grid, unit 2-norm.
    vectors: Mat<f64>,
    physical_norms: OnceLock<Vec<f64>>,
}

impl SupermodeBasis {
    pub fn dim(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn lambda0(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn kappa(&self) -> f64 {
        self.grid.kappa
    }

    /// `Λ_k / Λ₀`.
    pub fn ratios(&self) -> Vec<f64> {
        let l0 = self.lambda0();
        self.eigenvalues.iter().map(|l| l / l0).collect()
    }

    /// Supermode `k` on the scaled grid.
    pub fn scaled_mode(&self, k: usize) -> &[f64] {
        self.vectors.col_as_slice(k)
    }

    pub fn vectors(&self) -> MatRef<'_, f64> {
        self.vectors.as_ref()
    }

    /// Number of sign changes of supermode `k`, ignoring components below
    /// `1e-8` of its peak.
    pub fn node_count(&self, k: usize) -> usize {
        node_count(self.scaled_mode(k))
    }

    /// Supermode `k` sampled on every physical comb line of the window.
    pub fn physical_mode(&self, k: usize) -> Result<PhysicalWaveform, SpectralError> {
        if k >= self.eigenvalues.len() {
            return Err(SpectralError::NoSuchMode(k));
        }
        let interp = Interpolator::new(&self.grid);
        let v = self.scaled_mode(k);
        let mut amplitudes: Vec<f64> = (-interp.p..=interp.p).map(|m| interp.eval(v, m)).collect();
        let norm = amplitudes.iter().map(|a| a * a).sum::<f64>().sqrt();
        amplitudes.iter_mut().for_each(|a| *a /= norm);
        Ok(PhysicalWaveform { first_index: -interp.p, amplitudes })
    }

    /// `d_k = Σ_m L_{k,m} e_m` for samples `e` on physical indices
    /// `first_index..`, with `L_{k,m}` the interpolated, renormalized
    /// supermodes returned by [`Self::physical_mode`].
    pub fn project(&self, first_index: i64, samples: &[Complex64]) -> Result<Vec<Complex64>, SpectralError> {
        let interp = Interpolator::new(&self.grid);
        let last = first_index + samples.len() as i64 - 1;
        if first_index < -interp.p || last > interp.p {
            return Err(SpectralError::WindowMismatch { first: first_index, last, half_width: interp.p });
        }
        let n = self.dim();
        // pull the samples back onto the scaled grid through the interpolation
        // weights, gathering per node so the summation order is fixed
        let pulled: Vec<Complex64> = (0..n as i64)
            .into_par_iter()
            .map(|j| {
                let lo = (interp.kappa * (j - 2 - interp.half_width) as f64).floor() as i64 - 1;
                let hi = (interp.kappa * (j + 2 - interp.half_width) as f64).ceil() as i64 + 1;
                let mut acc = Complex64::new(0.0, 0.0);
                for m in lo.max(first_index)..=hi.min(last) {
                    let e = samples[(m - first_index) as usize];
                    let (j0, w) = interp.weights(m);
                    if j >= j0 && j < j0 + 4 {
                        acc += e * w[(j - j0) as usize];
                    }
                }
                acc
            })
            .collect();
        let norms = self.physical_norms();
        let re: Vec<f64> = pulled.iter().map(|z| z.re).collect();
        let im: Vec<f64> = pulled.iter().map(|z| z.im).collect();
        Ok((0..self.eigenvalues.len())
            .into_par_iter()
            .map(|k| {
                let v = self.scaled_mode(k);
                let c = 1.0 / norms[k];
                Complex64::new(c * dot(v, &re), c * dot(v, &im))
            })
            .collect())
    }

    /// Norm of each interpolated supermode over the physical window.
    fn physical_norms(&self) -> &[f64] {
        self.physical_norms.get_or_init(|| {
            let gram = Interpolator::new(&self.grid).gram(self.dim());
            (0..self.eigenvalues.len()).map(|k| gram.quadratic_form(self.scaled_mode(k)).sqrt()).collect()
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Real amplitudes on consecutive physical comb indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalWaveform {
    pub first_index: i64,
    pub amplitudes: Vec<f64>,
}

impl PhysicalWaveform {
    pub fn at(&self, m: i64) -> f64 {
        let i = m - self.first_index;
        if i < 0 {
            return 0.0;
        }
        self.amplitudes.get(i as usize).copied().unwrap_or(0.0)
    }
}

/// Catmull-Rom interpolation from the scaled grid to physical indices.
struct Interpolator {
    kappa: f64,
    half_width: i64,
    /// Physical half-width.
    p: i64,
}

impl Interpolator {
    fn new(grid: &ModeGrid) -> Self {
        Self { kappa: grid.kappa, half_width: grid.half_width as i64, p: grid.physical_half_width() }
    }

    /// First scaled-grid row touched by physical index `m`, and the four
    /// weights on rows `j0..j0+4`.
    fn weights(&self, m: i64) -> (i64, [f64; 4]) {
        let x = m as f64 / self.kappa + self.half_width as f64;
        let i = x.floor();
        let t = x - i;
        let i = i as i64;
        if t == 0.0 {
            return (i - 1, [0.0, 1.0, 0.0, 0.0]);
        }
        let t2 = t * t;
        let t3 = t2 * t;
        (
            i - 1,
            [
                0.5 * (-t3 + 2.0 * t2 - t),
                0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
                0.5 * (-3.0 * t3 + 4.0 * t2 + t),
                0.5 * (t3 - t2),
            ],
        )
    }

    fn eval(&self, v: &[f64], m: i64) -> f64 {
        let (j0, w) = self.weights(m);
        w.iter()
            .enumerate()
            .map(|(t, wt)| {
                let j = j0 + t as i64;
                if *wt == 0.0 || j < 0 || j as usize >= v.len() {
                    0.0
                } else {
                    wt * v[j as usize]
                }
            })
            .sum()
    }

    /// `G = WᵀW` over the whole physical window, a 7-band matrix.
    fn gram(&self, n: usize) -> BandedGram {
        let mut bands = vec![[0.0; 4]; n];
        for m in -self.p..=self.p {
            let (j0, w) = self.weights(m);
            for a in 0..4 {
                let ja = j0 + a as i64;
                if w[a] == 0.0 || ja < 0 || ja as usize >= n {
                    continue;
                }
                for b in a..4 {
                    let jb = j0 + b as i64;
                    if w[b] == 0.0 || jb as usize >= n {
                        continue;
                    }
                    bands[ja as usize][b - a] += w[a] * w[b];
                }
            }
        }
        BandedGram { bands }
    }
}

/// Symmetric banded matrix; `bands[i][d]` is entry `(i, i + d)`.
struct BandedGram {
    bands: Vec<[f64; 4]>,
}

impl BandedGram {
    fn quadratic_form(&self, v: &[f64]) -> f64 {
        let n = v.len();
        let mut s = 0.0;
        for i in 0..n {
            let b = &self.bands[i];
            s += b[0] * v[i] * v[i];
            for d in 1..4 {
                if i + d < n {
                    s += 2.0 * b[d] * v[i] * v[i + d];
                }
            }
        }
        s
    }
}

pub fn node_count(v: &[f64]) -> usize {
    let peak = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let mut last = 0.0f64;
    let mut count = 0;
    for &x in v {
        if x.abs() < 1e-8 * peak {
            continue;
        }
        if last != 0.0 && x.signum() != last.signum() {
            count += 1;
        }
        last = x;
    }
    count
}

fn eigh(n: usize, entries: &[f64], vectors: bool) -> Result<(Vec<f64>, Option<Mat<f64>>), SpectralError> {
    let a = MatRef::from_column_major_slice(entries, n, n);
    let mut s = Diag::<f64>::zeros(n);
    let mut u = if vectors { Some(Mat::<f64>::zeros(n, n)) } else { None };
    let compute = if vectors { ComputeEigenvectors::Yes } else { ComputeEigenvectors::No };
    let par = if rayon::current_num_threads() > 1 { Par::rayon(0) } else { Par::Seq };
    let mut mem = MemBuffer::new(evd::self_adjoint_evd_scratch::<f64>(n, compute, par, Default::default()));
    evd::self_adjoint_evd(
        a,
        s.as_mut(),
        u.as_mut().map(|u| u.as_mut()),
        par,
        MemStack::new(&mut mem),
        Default::default(),
    )
    .map_err(|_| SpectralError::NoConvergence)?;
    let values = (0..n).map(|i| s[i]).collect();
    Ok((values, u))
}

/// Eigenpairs of a dense symmetric matrix ordered by descending |Λ|, with
/// near-degenerate magnitudes ordered by node count and each vector signed
/// so that its largest component (the first one, on ties) is positive.
#[derive(Debug, Clone)]
pub struct SortedEigen {
    pub values: Vec<f64>,
    /// Column `k` pairs with `values[k]`.
    pub vectors: Mat<f64>,
}

/// Decomposes the `n×n` symmetric matrix stored in `entries`.
pub fn symmetric_eigen(n: usize, entries: &[f64]) -> Result<SortedEigen, SpectralError> {
    let (values, u) = eigh(n, entries, true)?;
    let u = u.expect("eigenvectors requested");

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()));
    let nodes = |i: usize| node_count(u.col_as_slice(i));
    let scale = values[order[0]].abs();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (values[order[start]].abs() - values[order[end]].abs()) <= DEGENERACY_TOLERANCE * scale {
            end += 1;
        }
        if end - start > 1 {
            order[start..end].sort_by_key(|&i| nodes(i));
        }
        start = end;
    }

    let mut vectors = Mat::<f64>::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        let src = u.col_as_slice(i);
        let peak = src.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let pivot = src.iter().find(|x| x.abs() >= (1.0 - 1e-9) * peak).copied().unwrap_or(1.0);
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for (dst, x) in vectors.col_as_slice_mut(k).iter_mut().zip(src) {
            *dst = sign * x;
        }
    }
    Ok(SortedEigen { values: order.iter().map(|&i| values[i]).collect(), vectors })
}

/// Full decomposition with the default significance threshold.
pub fn diagonalize(matrix: &CouplingMatrix) -> Result<SupermodeBasis, SpectralError> {
    diagonalize_with(matrix, DEFAULT_EPSILON)
}

pub fn diagonalize_with(matrix: &CouplingMatrix, epsilon: f64) -> Result<SupermodeBasis, SpectralError> {
    let n = matrix.dim();
    let SortedEigen { values: scaled, vectors } = symmetric_eigen(n, matrix.entries())?;
    let lead = scaled[0].abs();
    let n_significant = scaled.iter().filter(|l| l.abs() > epsilon * lead).count().max(1);

    let a = MatRef::from_column_major_slice(matrix.entries(), n, n);
    let retained = vectors.as_ref().subcols(0, n_significant);
    let av = a * retained;
    let mut max_residual = 0.0f64;
    for (k, lam) in scaled.iter().enumerate().take(n_significant) {
        let r: f64 = av
            .col_as_slice(k)
            .iter()
            .zip(retained.col(k).iter())
            .map(|(x, v)| (x - lam * v).powi(2))
            .sum::<f64>()
            .sqrt();
        let rel = if lead > 0.0 { r / lead } else { r };
        if !(rel <= RESIDUAL_TOLERANCE) {
            return Err(SpectralError::ConvergenceFailure { mode: k, residual: rel, tolerance: RESIDUAL_TOLERANCE });
        }
        max_residual = max_residual.max(rel);
    }

    let root = matrix.grid.kappa.sqrt();
    Ok(SupermodeBasis {
        leading_negative: scaled[0] < 0.0,
        eigenvalues: scaled.iter().map(|l| l * root).collect(),
        grid: matrix.grid,
        n_significant,
        epsilon,
        max_residual,
        vectors,
        physical_norms: OnceLock::new(),
    })
}

/// Physical eigenvalues only, sorted by descending magnitude.
pub fn eigenvalues(matrix: &CouplingMatrix) -> Result<Vec<f64>, SpectralError> {
    let (mut values, _) = eigh(matrix.dim(), matrix.entries(), false)?;
    values.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
    let root = matrix.grid.kappa.sqrt();
    Ok(values.into_iter().map(|l| l * root).collect())
}

/// Closed-form eigensystem of the two-Gaussian coupling matrix:
/// `Λ_k = Λ₀ ρ^k` with Hermite-Gauss supermodes of width `N_s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticEigensystem {
    pub lambda0: f64,
    pub ratio: f64,
    /// Width of the supermodes in comb lines, `1/(Ω τ_s)`.
    pub n_signal: f64,
    /// Duration of the leading supermode, s.
    pub tau_s: f64,
    /// Whether the approximation applies; computed but never enforced.
    pub validity: ValidityVerdict,
}

impl AnalyticEigensystem {
    pub fn eigenvalue(&self, k: usize) -> f64 {
        self.lambda0 * self.ratio.powi(k as i32)
    }

    pub fn mode(&self, k: usize, m: f64) -> f64 {
        hermite_gauss_mode(k, m, self.n_signal)
    }
}

pub fn analytic_eigensystem(crystal: &CrystalDispersion, config: &SpopoConfig) -> AnalyticEigensystem {
    let t = characteristic_times(crystal);
    let tp = config.pump_pulse_duration;
    let spread = t.tau1 * t.tau1 + tp * tp;
    let np = config.pump_mode_count();
    let lambda0 = PI.powf(0.25) * (2.0 * np).sqrt() * (tp * tp / spread).sqrt();
    let ratio = -1.0 + 2.0 * (t.tau2 * t.tau2 / spread).sqrt();
    let tau_s = (2.0 * t.tau2 * spread.sqrt()).sqrt();
    AnalyticEigensystem {
        lambda0,
        ratio,
        n_signal: 1.0 / (config.free_spectral_range * tau_s),
        tau_s,
        validity: gaussian_validity(crystal, config),
    }
}

/// Normalized Hermite-Gauss amplitude of order `k` at comb index `m` for
/// width `n_s`, via the three-term recurrence of the Hermite functions.
pub fn hermite_gauss_mode(k: usize, m: f64, n_s: f64) -> f64 {
    HermiteTable::new(k).eval(m / n_s) / n_s.sqrt()
}

/// Recurrence coefficients for the normalized Hermite function of order `k`.
struct HermiteTable {
    a: Vec<f64>,
    b: Vec<f64>,
    /// Beyond this `|x|` the function is below the smallest normal double.
    cutoff: f64,
}

impl HermiteTable {
    fn new(k: usize) -> Self {
        let a = (0..k).map(|j| (2.0 / (j + 1) as f64).sqrt()).collect();
        let b = (0..k).map(|j| (j as f64 / (j + 1) as f64).sqrt()).collect();
        Self { a, b, cutoff: (2.0 * k as f64 + 1.0).sqrt() + 40.0 }
    }

    fn eval(&self, x: f64) -> f64 {
        if x.abs() > self.cutoff {
            return 0.0;
        }
        let mut prev = 0.0;
        let mut cur = PI.powf(-0.25) * (-0.5 * x * x).exp();
        for (a, b) in self.a.iter().zip(&self.b) {
            let next = a * x * cur - b * prev;
            prev = cur;
            cur = next;
        }
        cur
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeComparison {
    pub k: usize,
    /// `|⟨L_k, HG_k⟩|` on the physical comb.
    pub overlap: f64,
    pub numeric: f64,
    pub analytic: f64,
    /// `(analytic − numeric)/numeric`.
    pub relative_error: f64,
}

/// Hermite-Gauss supermode `k` sampled across the physical window of `grid`.
pub fn hermite_gauss_samples(grid: &ModeGrid, k: usize, n_s: f64) -> Vec<Complex64> {
    let p = grid.physical_half_width();
    let table = HermiteTable::new(k);
    let mut s: Vec<Complex64> =
        (-p..=p).into_par_iter().map(|m| Complex64::new(table.eval(m as f64 / n_s), 0.0)).collect();
    let norm = s
        .par_chunks(1 << 14)
        .map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>())
        .collect::<Vec<_>>()
        .iter()
        .sum::<f64>()
        .sqrt();
    if norm > 0.0 {
        s.par_iter_mut().for_each(|z| *z /= norm);
    }
    s
}

pub fn compare_bases(
    numeric: &SupermodeBasis,
    analytic: &AnalyticEigensystem,
    k_max: usize,
) -> Result<Vec<ModeComparison>, SpectralError> {
    let p = numeric.grid.physical_half_width();
    (0..k_max.min(numeric.eigenvalues.len()))
        .map(|k| {
            let samples = hermite_gauss_samples(&numeric.grid, k, analytic.n_signal);
            let d = numeric.project(-p, &samples)?;
            let num = numeric.eigenvalues[k];
            let ana = analytic.eigenvalue(k);
            Ok(ModeComparison { k, overlap: d[k].norm(), numeric: num, analytic: ana, relative_error: (ana - num) / num })
        })
        .collect()
}

/// Eigenvalues predicted after multiplying the cavity length by `ratio`.
pub fn cavity_length_rescale(basis: &SupermodeBasis, ratio: f64) -> Vec<f64> {
    let s = ratio.sqrt();
    basis.eigenvalues.iter().map(|l| l * s).collect()
}
