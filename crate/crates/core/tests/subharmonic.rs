use std::f64::consts::PI;

use mincurv_core::periodic::{find_two_solutions, verify_orbit};
use mincurv_core::subharmonic::{
    find_subharmonic, orbit_winding, shifted_flow, smallest_twist_order, twist_check, SubharmonicConfig, TwistFailure,
};
use mincurv_core::{Nonlinearity, PeriodicOrbit, Problem, SearchWindow, ShootingConfig, Weight};

fn setup(lambda: f64) -> (Problem, PeriodicOrbit) {
    let p = Problem::new(Weight::fig1(), Nonlinearity::power(3.0).unwrap(), lambda).unwrap();
    let os = find_two_solutions(&p, &SearchWindow::default(), &ShootingConfig::default()).unwrap();
    (p, os[0].clone())
}

fn sign_changes(v: &[f64]) -> usize {
    (0..v.len()).filter(|&i| (v[i] > 0.0) != (v[(i + 1) % v.len()] > 0.0)).count()
}

#[test]
fn shifted_system_rests_at_the_origin() {
    let (p, s) = setup(20.0);
    let cfg = ShootingConfig::default();
    let w = shifted_flow(&p, &s, 2, [0.0, 0.0], &cfg).unwrap();
    // the small orbit restarts from its nodes, whose defects sit at the Newton tolerance
    let bound = 10.0 * cfg.newton_tol;
    assert!(w.end[0].abs() < bound && w.end[1].abs() < bound, "{:?}", w.end);
}

#[test]
fn twist_order_and_subharmonic_pair() {
    let (p, s) = setup(20.0);
    let cfg = ShootingConfig::default();
    assert_eq!(twist_check(&p, &s, 1, &cfg).unwrap().reason, Some(TwistFailure::InnerRotationTooSmall));
    let t = smallest_twist_order(&p, &s, 1, 8, &cfg).unwrap().unwrap();
    // derived by scanning k upward at λ = 20
    assert_eq!((t.k, t.m_k), (3, 1));
    assert!(t.verdict && t.mu0 < 0.0);
    assert!(t.outer_rotations.iter().all(|r| *r < 2.0 * PI));

    let r = find_subharmonic(&p, &s, &t, 1, &SubharmonicConfig::default()).unwrap();
    assert_eq!(r.solutions.len(), 2);
    assert!(r.class_separation > SubharmonicConfig::default().class_delta);
    for (o, z) in r.solutions.iter().zip(&r.zero_reports) {
        assert_eq!(o.k, 3);
        assert!(o.residual <= 1e-8);
        assert_eq!(z.count(), 2);
        assert!(z.minimal_period);
        verify_orbit(o, &p, 1e-6).unwrap();
        // independent zero count on the sample grid
        let d: Vec<f64> = o.samples.iter().map(|q| q.x1 - s.u_at(q.t)).collect();
        assert_eq!(sign_changes(&d), 2);
        // not T-periodic: shifting by one period moves the profile
        let shift = o.samples.iter().map(|q| (q.x1 - o.u_at(q.t + p.period())).abs()).fold(0.0, f64::max);
        assert!(shift > 1e-3, "{shift}");
        let wind = orbit_winding(&p, &s, o, &cfg).unwrap();
        assert!((wind - 2.0 * PI).abs() < 1e-6, "{wind}");
    }
}

#[test]
fn rejects_j_not_coprime_or_uncovered() {
    let (p, s) = setup(20.0);
    let t = twist_check(&p, &s, 4, &ShootingConfig::default()).unwrap();
    assert!(find_subharmonic(&p, &s, &t, 2, &SubharmonicConfig::default()).is_err());
    assert!(find_subharmonic(&p, &s, &t, 0, &SubharmonicConfig::default()).is_err());
}
