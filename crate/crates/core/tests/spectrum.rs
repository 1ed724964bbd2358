mod oracles;

use std::f64::consts::PI;

use mincurv_core::periodic::find_two_solutions;
use mincurv_core::spectrum::{
    higher_eigenvalues, linearize_around, principal_eigenvalue, pruefer_flow, rotation_gap, SturmLiouvilleCoeffs, TrigPoly,
};
use mincurv_core::{Nonlinearity, Problem, SearchWindow, ShootingConfig, Weight};
use oracles::{galerkin_hill, trig};
use proptest::prelude::*;

const T: f64 = 2.0 * PI;

#[test]
fn constant_potential_shifts_the_spectrum() {
    for c in [-2.0, 0.0, 3.0] {
        let e = principal_eigenvalue(&SturmLiouvilleCoeffs::constant(T, c).unwrap()).unwrap();
        assert!((e.mu0 + c).abs() <= 1e-8, "{c}: {}", e.mu0);
        assert_eq!(e.zeros, 0);
    }
}

#[test]
fn mathieu_matches_galerkin() {
    let coeffs = SturmLiouvilleCoeffs::analytic(TrigPoly::constant(T, 1.0).unwrap(), TrigPoly::new(T, 0.0, vec![1.0], vec![]).unwrap()).unwrap();
    let h = higher_eigenvalues(&coeffs, 1).unwrap();
    let ev = galerkin_hill(T, 32, &|_| 1.0, &|t| t.cos());
    assert!((h.mu0 - ev[0]).abs() <= 1e-6, "{} vs {}", h.mu0, ev[0]);
    assert!((h.pairs[0].mu_prime - ev[1]).abs() <= 1e-6, "{} vs {}", h.pairs[0].mu_prime, ev[1]);
    assert!((h.pairs[0].mu_second - ev[2]).abs() <= 1e-6, "{} vs {}", h.pairs[0].mu_second, ev[2]);
    // frozen
    assert!((h.mu0 + 0.378489221271593).abs() < 1e-9);
    assert!((h.pairs[0].mu_prime - 0.918058176583145).abs() < 1e-9);
    assert!((h.pairs[0].mu_second - 1.293166283343453).abs() < 1e-9);
    assert!(h.interlaced(1e-8));
    assert_eq!((h.pairs[0].zeros_prime, h.pairs[0].zeros_second), (2, 2));
}

#[test]
fn variable_coefficients_match_galerkin() {
    let p = TrigPoly::new(T, 1.2, vec![0.3], vec![0.1, -0.2]).unwrap();
    let q = TrigPoly::new(T, -0.4, vec![0.8, 0.0, 0.5], vec![-0.6]).unwrap();
    let (pf, qf) = (trig(T, 1.2, vec![0.3], vec![0.1, -0.2]), trig(T, -0.4, vec![0.8, 0.0, 0.5], vec![-0.6]));
    let h = higher_eigenvalues(&SturmLiouvilleCoeffs::analytic(p, q).unwrap(), 2).unwrap();
    let ev = galerkin_hill(T, 32, &pf, &qf);
    let ours = [h.mu0, h.pairs[0].mu_prime, h.pairs[0].mu_second, h.pairs[1].mu_prime, h.pairs[1].mu_second];
    for (a, b) in ours.iter().zip(&ev) {
        assert!((a - b).abs() <= 1e-6, "{a} vs {b}");
    }
}

#[test]
fn small_orbit_has_negative_principal_eigenvalue() {
    // frozen; the sign is what the twist argument needs
    let frozen = [(20.0, -0.7988811812829226), (50.0, -0.8053182680159807), (100.0, -0.8073996147140861)];
    for (lambda, mu) in frozen {
        let p = Problem::new(Weight::fig1(), Nonlinearity::power(3.0).unwrap(), lambda).unwrap();
        let os = find_two_solutions(&p, &SearchWindow::default(), &ShootingConfig::default()).unwrap();
        let e = principal_eigenvalue(&linearize_around(&os[0], &p).unwrap()).unwrap();
        assert!(e.mu0 < 0.0);
        assert!((e.mu0 - mu).abs() < 1e-7, "{lambda}: {}", e.mu0);
        assert!(e.residual < 1e-6);
    }
}

fn coeff_strategy() -> impl Strategy<Value = (TrigPoly, TrigPoly)> {
    (
        0.6..1.5f64,
        prop::collection::vec(-0.15..0.15f64, 2),
        -2.0..2.0f64,
        prop::collection::vec(-1.0..1.0f64, 2),
        prop::collection::vec(-1.0..1.0f64, 2),
    )
        .prop_map(|(p0, ps, q0, qc, qs)| (TrigPoly::new(T, p0, ps.clone(), ps).unwrap(), TrigPoly::new(T, q0, qc, qs).unwrap()))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 5, ..ProptestConfig::default() })]

    #[test]
    fn rotation_gap_is_strictly_increasing((p, q) in coeff_strategy()) {
        let c = SturmLiouvilleCoeffs::analytic(p, q).unwrap();
        let f: Vec<f64> = (0..20).map(|i| rotation_gap(&c, -6.0 + 0.6 * i as f64).unwrap()).collect();
        prop_assert!(f.windows(2).all(|w| w[1] > w[0]), "{f:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    #[test]
    fn angle_derivative_is_inverse_square_radius((p, q) in coeff_strategy(), mu in -3.0..3.0f64, th in 0.0..(2.0 * PI)) {
        let c = SturmLiouvilleCoeffs::analytic(p, q).unwrap();
        let d = 1e-5;
        let plus = pruefer_flow(&c, mu, th + d, 1).unwrap().theta;
        let minus = pruefer_flow(&c, mu, th - d, 1).unwrap().theta;
        let ell = pruefer_flow(&c, mu, th, 1).unwrap().ell;
        let fd = (plus - minus) / (2.0 * d);
        prop_assert!((fd - ell.powi(-2)).abs() <= 1e-4, "{fd} vs {}", ell.powi(-2));
    }
}
