mod common;

use common::{check_invariants, small_problem, SmallProblem, SMALL_OMEGA};
use num_complex::Complex64;
use proptest::prelude::*;

use supermode_lab::coupling::{build_coupling_matrix, ModeGrid};
use supermode_lab::dispersion::BetaCoefficients;
use supermode_lab::spectral::{diagonalize, hermite_gauss_samples};
use supermode_lab::squeezing::{
    homodyne_from_projections, homodyne_spectrum, lo_projections, quadrature_variance, LocalOscillator, Quadrature,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn invariants_hold(p in small_problem(), r in 0.05..0.99f64) {
        if let Err(e) = check_invariants(&p, r) {
            return Err(TestCaseError::fail(format!("{p:?}: {e}")));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn supermode_lo_selects_one_mode(p in small_problem(), k in 0usize..4, phase in 0.0..6.3f64, r in 0.1..0.95f64, w in 0.0..3.0f64) {
        let basis = p.basis(1.0, p.half_width());
        let lo = LocalOscillator::supermode(&basis, k, phase).unwrap();
        let d = lo_projections(&basis, &lo).unwrap();
        let want = Complex64::from_polar(1.0, phase);
        for (j, dj) in d.iter().enumerate() {
            let expected = if j == k { want } else { Complex64::new(0.0, 0.0) };
            prop_assert!((dj - expected).norm() < 1e-9, "d[{}] = {}", j, dj);
        }
        let lo = LocalOscillator::supermode(&basis, k, std::f64::consts::FRAC_PI_2).unwrap();
        let h = homodyne_spectrum(&basis, &lo, r, w).unwrap();
        let v = quadrature_variance(basis.ratios()[k], r, w, Quadrature::Minus).unwrap();
        prop_assert!((h.variance - v).abs() < 1e-9);
    }

    #[test]
    fn homodyne_is_even_in_frequency(p in small_problem(), re in proptest::collection::vec(-1.0..1.0f64, 8), im in proptest::collection::vec(-1.0..1.0f64, 8), w in 0.0..4.0f64) {
        let basis = p.basis(1.0, p.half_width());
        let d: Vec<Complex64> = re.iter().zip(&im).map(|(a, b)| Complex64::new(*a, *b)).collect();
        let norm = d.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let d: Vec<Complex64> = d.iter().map(|z| z / norm).collect();
        let ratios = &basis.ratios()[..8];
        let a = homodyne_from_projections(ratios, &d, 0.8, w).unwrap().variance;
        let b = homodyne_from_projections(ratios, &d, 0.8, -w).unwrap().variance;
        prop_assert!((a - b).abs() < 1e-12 * a.max(1.0));
        prop_assert!(a > 0.0);
    }
}

/// Without walk-off the coupling is even under `(m, q) → (−m, −q)`, so
/// supermodes have definite parity alternating with their order.
fn parity_problem() -> SmallProblem {
    SmallProblem { n_p: 20.0, n1: 1.0, n2: 60.0, pump_gvd_ratio: 1.7, walk_off_sign: 1.0, gvd_sign: 1.0 }
}

#[test]
fn zero_walk_off_gives_definite_parity() {
    let p = parity_problem();
    let beta = BetaCoefficients { beta1: 0.0, ..p.beta() };
    let like = supermode_lab::dispersion::bibo();
    let crystal = supermode_lab::dispersion::crystal_with_coefficients(beta, SMALL_OMEGA, like.ks_prime, &like);
    let grid = ModeGrid::new(1.0, 200, SMALL_OMEGA).unwrap();
    let basis = diagonalize(&build_coupling_matrix(&crystal, &p.spopo(), grid).unwrap()).unwrap();
    let n = basis.dim();
    for k in 0..6 {
        let v = basis.scaled_mode(k);
        let even = (0..n).map(|i| (v[i] - v[n - 1 - i]).abs()).fold(0.0, f64::max);
        let odd = (0..n).map(|i| (v[i] + v[n - 1 - i]).abs()).fold(0.0, f64::max);
        assert!(even.min(odd) < 1e-10, "mode {k}: even defect {even:e}, odd defect {odd:e}");
        assert_eq!(even < odd, basis.node_count(k) % 2 == 0, "mode {k}");
    }

    // an even LO of the wrong width only reaches even supermodes
    let samples = hermite_gauss_samples(&basis.grid, 0, 27.0);
    let first = -basis.grid.physical_half_width();
    let d = basis.project(first, &samples).unwrap();
    let weight_odd: f64 = (0..20).filter(|&k| basis.node_count(k) % 2 == 1).map(|k| d[k].norm()).fold(0.0, f64::max);
    let weight_even: f64 = (0..20).filter(|&k| basis.node_count(k) % 2 == 0).map(|k| d[k].norm_sqr()).sum();
    assert!(weight_odd < 1e-10, "odd projection {weight_odd:e}");
    assert!(weight_even > 0.5 && (0..20).filter(|&k| basis.node_count(k) % 2 == 0).filter(|&k| d[k].norm() > 1e-3).count() > 1);
}
