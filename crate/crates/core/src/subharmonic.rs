//! Subharmonic orbits winding around the small orbit.
//!
//! Everything is measured in the shifted plane `y = x − x_s`, with `x_s` the
//! planar state of the small orbit, and the clockwise angle
//! `(y₁, y₂) = ℓ (cos θ, −sin θ)`. The angle is integrated as an ODE next to
//! both planar states, never unwrapped from samples. The small orbit is
//! restarted from its converged nodes at every node time.
//!
//! The search for `kT`-periodic solutions with winding `2jπ` follows the
//! twist: for each initial angle the radius at which the `kT`-rotation drops
//! to exactly `2jπ` is bracketed and bisected, which gives a closed curve whose
//! image under the period map has the same angles. Fixed points are the
//! sign changes of the radial mismatch along that curve; each one seeds a
//! multiple-shooting Newton solve.

use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)] // inherent when a dependent links std
use num_traits::Float;

use crate::error::{Error, Result};
use crate::model::{phi_inv, Problem};
use crate::ode::{self, lambda_cap, Field};
use crate::periodic::{nodes_from_state, node_times, shoot_nodes, OrbitClass, PeriodicOrbit, ShootingConfig};
use crate::spectrum::{linearize_around, principal_eigenvalue, rotation_extremum, Extremum};

/// Planar states of the small orbit and of a second solution, plus the
/// clockwise angle of their difference: `[s1, s2, x1, x2, θ]`.
pub struct ShiftedSystem<'a> {
    pub problem: &'a Problem,
}

impl ShiftedSystem<'_> {
    /// `y'` of the shifted system at `(t, x_s, y)`.
    pub fn rhs(&self, t: f64, s: [f64; 2], y: [f64; 2]) -> [f64; 2] {
        let p = self.problem;
        [
            phi_inv(y[1] + s[1]) - phi_inv(s[1]),
            -p.force(t, t, y[0] + s[0]) + p.force(t, t, s[0]),
        ]
    }
}

impl Field<5> for ShiftedSystem<'_> {
    #[inline]
    fn eval(&self, t: f64, anchor: f64, z: &[f64; 5]) -> [f64; 5] {
        let p = self.problem;
        let ds = [phi_inv(z[1]), -p.force(t, anchor, z[0])];
        let dx = [phi_inv(z[3]), -p.force(t, anchor, z[2])];
        let y = [z[2] - z[0], z[3] - z[1]];
        let dy = [dx[0] - ds[0], dx[1] - ds[1]];
        let l2 = y[0] * y[0] + y[1] * y[1];
        let dth = if l2 > 0.0 { (y[1] * dy[0] - y[0] * dy[1]) / l2 } else { 0.0 };
        [ds[0], ds[1], dx[0], dx[1], dth]
    }
    fn breaks_between(&self, t0: f64, t1: f64, out: &mut Vec<f64>) {
        self.problem.weight.breaks_between(t0, t1, out);
    }
    fn step_cap(&self, t: f64, anchor: f64) -> f64 {
        lambda_cap(self.problem, t, anchor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Winding {
    /// `y` at `kT`.
    pub end: [f64; 2],
    /// `θ(kT) − θ(0)`.
    pub rotation: f64,
}

impl Winding {
    pub fn radius(&self) -> f64 {
        self.end[0].hypot(self.end[1])
    }
}

/// Restart times of the small orbit repeated over `k` periods.
fn small_breaks(small: &PeriodicOrbit, k: usize) -> Vec<f64> {
    let span = small.span();
    let reps = (k * small.k).div_ceil(small.k);
    let mut out = Vec::new();
    for r in 0..reps {
        for &t in &small.node_times {
            out.push(r as f64 * span + t);
        }
    }
    out.push(reps as f64 * span);
    out
}

fn small_node_at(small: &PeriodicOrbit, t: f64) -> [f64; 2] {
    let span = small.span();
    let r = t - span * (t / span).floor();
    for (i, &tn) in small.node_times.iter().enumerate() {
        if (r - tn).abs() <= 1e-12 * span.max(1.0) {
            return small.nodes[i];
        }
    }
    small.state_at(t)
}

/// Rotation of the shifted system over `[0, kT]` from `y0`.
pub fn shifted_flow(problem: &Problem, small: &PeriodicOrbit, k: usize, y0: [f64; 2], cfg: &ShootingConfig) -> Result<Winding> {
    let t_end = k as f64 * problem.period();
    let field = ShiftedSystem { problem };
    let breaks = small_breaks(small, k);
    let s0 = small.nodes[0];
    let mut x = [s0[0] + y0[0], s0[1] + y0[1]];
    let mut th = (-y0[1]).atan2(y0[0]);
    let th0 = th;
    let mut s = s0;
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1].min(t_end));
        if a >= t_end {
            break;
        }
        s = small_node_at(small, a);
        let z = ode::solve(&field, a, b, [s[0], s[1], x[0], x[1], th], &cfg.integrator)?;
        s = [z[0], z[1]];
        x = [z[2], z[3]];
        th = z[4];
    }
    Ok(Winding { end: [x[0] - s[0], x[1] - s[1]], rotation: th - th0 })
}

/// Rotation of a `kT`-periodic orbit around the small orbit, integrated
/// piecewise from both orbits' nodes.
pub fn orbit_winding(problem: &Problem, small: &PeriodicOrbit, orbit: &PeriodicOrbit, cfg: &ShootingConfig) -> Result<f64> {
    let t_end = orbit.span();
    let mut cuts = small_breaks(small, orbit.k);
    cuts.extend(orbit.node_times.iter().copied());
    cuts.push(t_end);
    cuts.retain(|t| *t <= t_end);
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * t_end);
    let field = ShiftedSystem { problem };
    let y0 = [orbit.nodes[0][0] - small.nodes[0][0], orbit.nodes[0][1] - small.nodes[0][1]];
    let th0 = (-y0[1]).atan2(y0[0]);
    let mut th = th0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let s = small_node_at(small, a);
        let x = orbit_node_at(orbit, a);
        th = ode::solve(&field, a, b, [s[0], s[1], x[0], x[1], th], &cfg.integrator)?[4];
    }
    Ok(th - th0)
}

fn orbit_node_at(orbit: &PeriodicOrbit, t: f64) -> [f64; 2] {
    let span = orbit.span();
    for (i, &tn) in orbit.node_times.iter().enumerate() {
        if (t - tn).abs() <= 1e-12 * span {
            return orbit.nodes[i];
        }
    }
    orbit.state_at(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TwistFailure {
    NonNegativePrincipalEigenvalue,
    InnerRotationTooSmall,
    OuterRotationTooLarge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwistReport {
    pub k: usize,
    pub lambda: f64,
    pub mu0: f64,
    /// Minimum over `θ₀` of the `kT`-rotation of the linearized flow at
    /// `μ = 0`; a linearized bound, not transferred to a nonlinear radius.
    pub inner_rotation: f64,
    pub m_k: usize,
    pub outer_radius: f64,
    pub outer_angles: Vec<f64>,
    pub outer_rotations: Vec<f64>,
    pub verdict: bool,
    pub reason: Option<TwistFailure>,
}

pub const OUTER_MARGIN: f64 = 0.1;
pub const OUTER_ANGLES: usize = 16;

/// Numerical twist certificate on `[0, kT]` around the small orbit.
pub fn twist_check(problem: &Problem, small: &PeriodicOrbit, k: usize, cfg: &ShootingConfig) -> Result<TwistReport> {
    if k == 0 {
        return Err(Error::invalid("k must be >= 1"));
    }
    if small.k != 1 || small.lambda != problem.lambda {
        return Err(Error::invalid("twist needs the harmonic small orbit at the same lambda"));
    }
    let coeffs = linearize_around(small, problem)?;
    let mu0 = principal_eigenvalue(&coeffs)?.mu0;
    let (inner_rotation, _) = rotation_extremum(&coeffs, 0.0, k, Extremum::Min)?;
    let m_k = if inner_rotation > 0.0 { (inner_rotation / (2.0 * PI)).floor() as usize } else { 0 };
    let kt = k as f64 * problem.period();
    let outer_radius = kt * (1.0 + OUTER_MARGIN);
    let outer_angles: Vec<f64> = (0..OUTER_ANGLES).map(|i| 2.0 * PI * i as f64 / OUTER_ANGLES as f64).collect();
    let mut outer_rotations = Vec::with_capacity(OUTER_ANGLES);
    for &a in &outer_angles {
        let y0 = [outer_radius * a.cos(), -outer_radius * a.sin()];
        outer_rotations.push(shifted_flow(problem, small, k, y0, cfg)?.rotation);
    }
    let reason = if !(mu0 < 0.0) {
        Some(TwistFailure::NonNegativePrincipalEigenvalue)
    } else if m_k < 1 {
        Some(TwistFailure::InnerRotationTooSmall)
    } else if outer_rotations.iter().any(|r| !(*r < 2.0 * PI)) {
        Some(TwistFailure::OuterRotationTooLarge)
    } else {
        None
    };
    Ok(TwistReport {
        k,
        lambda: problem.lambda,
        mu0,
        inner_rotation,
        m_k,
        outer_radius,
        outer_angles,
        outer_rotations,
        verdict: reason.is_none(),
        reason,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubharmonicConfig {
    pub shooting: ShootingConfig,
    /// Newton solves allowed per `(k, j)`.
    pub seed_budget: usize,
    /// Initial angles on the matching curve; doubled while classes are
    /// missing.
    pub angle_grid: usize,
    pub radius_grid: usize,
    /// Inner radius relative to the small orbit's sup norm.
    pub inner_radius: f64,
    /// Orbits closer than this (after any `lT` shift) share a class.
    pub class_delta: f64,
}

impl Default for SubharmonicConfig {
    fn default() -> Self {
        SubharmonicConfig {
            shooting: ShootingConfig::default(),
            seed_budget: 512,
            angle_grid: 32,
            radius_grid: 24,
            inner_radius: 1e-3,
            class_delta: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZeroReport {
    pub zeros: Vec<f64>,
    /// `(l, lT-return residual)` for every proper divisor `l` of `k`.
    pub return_residuals: Vec<(usize, f64)>,
    pub minimal_period: bool,
}

impl ZeroReport {
    pub fn count(&self) -> usize {
        self.zeros.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubharmonicOrbit {
    pub k: usize,
    pub j: usize,
    pub solutions: Vec<PeriodicOrbit>,
    pub zero_reports: Vec<ZeroReport>,
    pub windings: Vec<f64>,
    /// Min over `l = 0..k−1` of the sup distance between the first solution
    /// and the second shifted by `lT`.
    pub class_separation: f64,
    pub seeds_used: usize,
}

pub fn gcd(a: usize, b: usize) -> usize {
    if b == 0 { a } else { gcd(b, a % b) }
}

/// `min_l sup_t |u₁(t) − u₂(t + lT)|` over `l = 0..k−1`.
pub fn class_distance(a: &PeriodicOrbit, b: &PeriodicOrbit) -> f64 {
    (0..a.k).map(|l| a.sup_distance(b, l as f64 * a.period)).fold(f64::INFINITY, f64::min)
}

/// Transversal zeros of `u − u_s` on `[0, kT)` and the minimal-period
/// certificate.
pub fn count_zeros_and_class(candidate: &PeriodicOrbit, small: &PeriodicOrbit, newton_tol: f64) -> Result<ZeroReport> {
    let span = candidate.span();
    let d = |t: f64| candidate.u_at(t) - small.u_at(t);
    let vals: Vec<(f64, f64)> = candidate.samples.iter().map(|s| (s.t, s.x1 - small.u_at(s.t))).collect();
    let n = vals.len();
    let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.1.abs()));
    if scale < 1e-8 {
        return Err(Error::invalid("candidate coincides with the small orbit"));
    }
    let tang = 1e-7 * scale;
    let mut zeros = Vec::new();
    for i in 0..n {
        let (t0, v0) = vals[i];
        let (t1, v1) = if i + 1 < n { vals[i + 1] } else { (span, vals[0].1) };
        if (v0 > 0.0) != (v1 > 0.0) {
            let (mut lo, mut hi) = (t0, t1);
            let pos_lo = v0 > 0.0;
            while hi - lo > 1e-10 {
                let m = 0.5 * (lo + hi);
                if (d(m) > 0.0) == pos_lo {
                    lo = m;
                } else {
                    hi = m;
                }
            }
            let tz = 0.5 * (lo + hi);
            let slope = phi_inv(candidate.state_at(tz)[1]) - phi_inv(small.state_at(tz)[1]);
            if slope.abs() < tang {
                return Err(Error::TangentialZero(tz));
            }
            zeros.push(tz);
        } else {
            // a dip to ~0 without crossing
            let (_, vp) = vals[(i + n - 1) % n];
            if v0.abs() < tang && v0.abs() <= vp.abs() && v0.abs() <= v1.abs() {
                return Err(Error::TangentialZero(t0));
            }
        }
    }
    let k = candidate.k;
    let mut return_residuals = Vec::new();
    for l in 1..k {
        if !k.is_multiple_of(l) {
            continue;
        }
        let shift = l as f64 * candidate.period;
        let r = candidate
            .node_times
            .iter()
            .zip(&candidate.nodes)
            .map(|(&t, x)| {
                let y = candidate.state_at(t + shift);
                (y[0] - x[0]).abs().max((y[1] - x[1]).abs())
            })
            .fold(0.0, f64::max);
        return_residuals.push((l, r));
    }
    let minimal_period = return_residuals.iter().all(|(_, r)| *r > 100.0 * newton_tol);
    Ok(ZeroReport { zeros, return_residuals, minimal_period })
}

/// Radius on the ray at angle `theta0` where the `kT`-rotation crosses
/// `target`, with the rotation's end state there.
fn matching_radius(
    problem: &Problem,
    small: &PeriodicOrbit,
    k: usize,
    theta0: f64,
    target: f64,
    radii: &[f64],
    cfg: &ShootingConfig,
) -> Result<Option<(f64, Winding)>> {
    let ray = |r: f64| [r * theta0.cos(), -r * theta0.sin()];
    let mut prev: Option<(f64, Winding)> = None;
    for &r in radii {
        let w = shifted_flow(problem, small, k, ray(r), cfg)?;
        if w.rotation < target {
            let Some((mut lo, _)) = prev else { return Ok(None) };
            let mut hi = r;
            let mut best = w;
            for _ in 0..60 {
                if hi / lo - 1.0 <= 1e-12 {
                    break;
                }
                let m = (lo * hi).sqrt();
                let wm = shifted_flow(problem, small, k, ray(m), cfg)?;
                if wm.rotation < target {
                    hi = m;
                    best = wm;
                } else {
                    lo = m;
                }
            }
            return Ok(Some((hi, best)));
        }
        prev = Some((r, w));
    }
    Ok(None)
}

/// Two `kT`-periodic solutions with `2j` transversal crossings of `u_s`, in
/// distinct periodicity classes.
pub fn find_subharmonic(
    problem: &Problem,
    small: &PeriodicOrbit,
    twist: &TwistReport,
    j: usize,
    cfg: &SubharmonicConfig,
) -> Result<SubharmonicOrbit> {
    let k = twist.k;
    if j == 0 || gcd(k, j) != 1 {
        return Err(Error::invalid("need j >= 1 with gcd(k, j) = 1"));
    }
    if !twist.verdict || twist.m_k < j {
        return Err(Error::invalid("twist certificate does not cover this j"));
    }
    if small.class == OrbitClass::Trivial || small.k != 1 {
        return Err(Error::invalid("need the harmonic small orbit"));
    }
    let sc = &cfg.shooting;
    let target = 2.0 * PI * j as f64;
    let r_in = cfg.inner_radius * small.sup_norm;
    let r_out = twist.outer_radius;
    let nr = cfg.radius_grid.max(2);
    let radii: Vec<f64> = (0..nr).map(|i| r_in * (r_out / r_in).powf(i as f64 / (nr - 1) as f64)).collect();
    let m = sc.segments(problem);
    let times = node_times(problem.period(), k, m);
    let s0 = small.nodes[0];

    let mut found: Vec<(f64, f64, PeriodicOrbit, ZeroReport)> = Vec::new();
    let mut seeds_used = 0;
    let mut n_ang = cfg.angle_grid.max(4);
    let mut tried: Vec<f64> = Vec::new();
    loop {
        let angles: Vec<f64> = (0..n_ang).map(|i| 2.0 * PI * i as f64 / n_ang as f64).collect();
        let mut curve = Vec::with_capacity(n_ang);
        for &a in &angles {
            curve.push(matching_radius(problem, small, k, a, target, &radii, sc)?.map(|(r, w)| (r, w.radius() - r)));
        }
        for i in 0..n_ang {
            let (Some((r0, m0)), Some((r1, m1))) = (curve[i], curve[(i + 1) % n_ang]) else { continue };
            if (m0 > 0.0) == (m1 > 0.0) {
                continue;
            }
            let a0 = angles[i];
            let a1 = if i + 1 < n_ang { angles[i + 1] } else { 2.0 * PI };
            let s = m0 / (m0 - m1);
            let a = a0 + s * (a1 - a0);
            if tried.iter().any(|t| (t - a).abs() < 1e-9) {
                continue;
            }
            tried.push(a);
            if seeds_used >= cfg.seed_budget {
                break;
            }
            seeds_used += 1;
            let r = (r0.ln() + s * (r1.ln() - r0.ln())).exp();
            let x0 = [s0[0] + r * a.cos(), s0[1] - r * a.sin()];
            let nodes = nodes_from_state(problem, &times, x0, &sc.integrator);
            let Ok(orbit) = shoot_nodes(problem, k, nodes, sc) else { continue };
            if orbit.class == OrbitClass::Trivial || orbit.sup_distance(small, 0.0) < cfg.class_delta {
                continue;
            }
            let Ok(wind) = orbit_winding(problem, small, &orbit, sc) else { continue };
            if (wind - target).abs() > 0.5 {
                continue;
            }
            let Ok(zr) = count_zeros_and_class(&orbit, small, sc.newton_tol) else { continue };
            if zr.count() != 2 * j || !zr.minimal_period {
                continue;
            }
            if found.iter().any(|f| class_distance(&f.2, &orbit) < cfg.class_delta) {
                continue;
            }
            let th = {
                let y = [orbit.nodes[0][0] - s0[0], orbit.nodes[0][1] - s0[1]];
                let v = (-y[1]).atan2(y[0]);
                v - 2.0 * PI * (v / (2.0 * PI)).floor()
            };
            found.push((wind, th, orbit, zr));
            if found.len() >= 2 {
                break;
            }
        }
        if found.len() >= 2 || seeds_used >= cfg.seed_budget || n_ang >= 1024 {
            break;
        }
        n_ang *= 2;
    }
    if found.len() < 2 {
        return Err(Error::NotFound);
    }
    found.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.partial_cmp(&b.1).unwrap()));
    let class_separation = class_distance(&found[0].2, &found[1].2);
    let windings = found.iter().map(|f| f.0).collect();
    let (solutions, zero_reports): (Vec<_>, Vec<_>) = found.into_iter().map(|f| (f.2, f.3)).unzip();
    Ok(SubharmonicOrbit { k, j, solutions, zero_reports, windings, class_separation, seeds_used })
}

/// First report in `k_min..=k_max` with a positive verdict; a report with a
/// non-negative `μ₀` is returned as is.
pub fn smallest_twist_order(
    problem: &Problem,
    small: &PeriodicOrbit,
    k_min: usize,
    k_max: usize,
    cfg: &ShootingConfig,
) -> Result<Option<TwistReport>> {
    for k in k_min.max(1)..=k_max {
        let r = twist_check(problem, small, k, cfg)?;
        // a non-negative μ₀ rules out every k
        if r.verdict || r.reason == Some(TwistFailure::NonNegativePrincipalEigenvalue) {
            return Ok(Some(r));
        }
    }
    Ok(None)
}
