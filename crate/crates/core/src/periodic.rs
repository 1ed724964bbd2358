//! Periodic solutions as fixed points of the Poincaré map.
//!
//! Newton runs on a multiple-shooting chain: `[0, kT]` is cut at node times
//! `t_0 = 0 < t_1 < … < t_M = kT` and the unknowns are the node states. With
//! `M = 1` this is plain shooting on `x ↦ Φᵏ(x) − x`; more nodes keep the
//! Jacobian well conditioned once λ is large and the flow stretches by many
//! orders of magnitude over a period.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent when a dependent links std
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{det2, mul2, Lu, Matrix};
use crate::model::{phi, phi_inv, Problem, SignDecomposition, ThresholdConstants};
use crate::ode::{self, IntegratorConfig, PlanarState, Trajectory};
use crate::quad::{GL5_NODES, GL5_WEIGHTS};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JacobianMode {
    Variational,
    FiniteDifference { h: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootingConfig {
    pub newton_tol: f64,
    pub max_newton_iter: usize,
    pub jacobian: JacobianMode,
    /// Orbits closer than this in sup norm are treated as one.
    pub dedup_distance: f64,
    /// Shooting segments per period; `None` picks from `λ` and `‖a‖∞`.
    pub segments_per_period: Option<usize>,
    pub samples_per_period: usize,
    pub singular_condition: f64,
    pub integrator: IntegratorConfig,
}

impl Default for ShootingConfig {
    fn default() -> Self {
        ShootingConfig {
            newton_tol: 1e-9,
            max_newton_iter: 50,
            jacobian: JacobianMode::Variational,
            dedup_distance: 1e-5,
            segments_per_period: None,
            samples_per_period: 2048,
            singular_condition: 1e12,
            integrator: IntegratorConfig::default(),
        }
    }
}

impl ShootingConfig {
    pub fn validate(&self) -> Result<()> {
        self.integrator.validate()?;
        if !(self.newton_tol > 0.0 && self.dedup_distance > 0.0) || self.max_newton_iter == 0 {
            return Err(Error::invalid("newton_tol, dedup_distance and max_newton_iter must be positive"));
        }
        if let JacobianMode::FiniteDifference { h } = self.jacobian {
            if !(h > 0.0) {
                return Err(Error::invalid("finite-difference step must be > 0"));
            }
        }
        if self.samples_per_period < 16 {
            return Err(Error::invalid("need at least 16 samples per period"));
        }
        Ok(())
    }

    pub fn segments(&self, problem: &Problem) -> usize {
        self.segments_per_period.unwrap_or_else(|| auto_segments(problem)).max(1)
    }
}

pub const VERIFY_TOL: f64 = 1e-6;

/// Segments per period so that `T·√(λ‖a‖∞)/M` stays near 12.
pub fn auto_segments(problem: &Problem) -> usize {
    let rate = (problem.lambda * problem.weight.sup_abs()).sqrt() * problem.period();
    ((rate / 12.0).ceil() as usize).clamp(1, 512)
}

/// Seeding bounds in sup norm; stand-in for the a-priori radii.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchWindow {
    pub r_min: f64,
    pub r_max: f64,
    pub small_seeds: usize,
    pub large_seeds: usize,
}

impl Default for SearchWindow {
    fn default() -> Self {
        SearchWindow { r_min: 1e-2, r_max: 6.0, small_seeds: 12, large_seeds: 12 }
    }
}

impl SearchWindow {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_min > 0.0 && self.r_max > self.r_min) {
            return Err(Error::invalid("search window needs 0 < r_min < r_max"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OrbitClass {
    Trivial,
    Small,
    Large,
}

impl OrbitClass {
    pub fn as_str(self) -> &'static str {
        match self {
            OrbitClass::Trivial => "trivial",
            OrbitClass::Small => "small",
            OrbitClass::Large => "large",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitSample {
    pub t: f64,
    pub x1: f64,
    pub x2: f64,
}

impl OrbitSample {
    pub fn u(&self) -> f64 {
        self.x1
    }
    pub fn u_prime(&self) -> f64 {
        phi_inv(self.x2)
    }
}

/// A `kT`-periodic solution.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicOrbit {
    pub lambda: f64,
    pub k: usize,
    pub period: f64,
    pub initial: PlanarState,
    /// Shooting node times in `[0, kT)` and the converged states there.
    pub node_times: Vec<f64>,
    pub nodes: Vec<[f64; 2]>,
    pub trajectory: Trajectory<2>,
    pub samples: Vec<OrbitSample>,
    /// Largest defect `‖Φ_{tᵢ→tᵢ₊₁}(xᵢ) − xᵢ₊₁‖∞` of the shooting chain; with
    /// a single node this is `‖Φᵏ(x₀) − x₀‖∞`.
    pub residual: f64,
    pub sup_norm: f64,
    pub min_value: f64,
    pub max_abs_u_prime: f64,
    pub class: OrbitClass,
    pub rho_star: Option<f64>,
    /// Small orbit within 5% of ρ*.
    pub near_threshold: bool,
    pub iterations: usize,
    /// A-posteriori checks at [`VERIFY_TOL`], recorded for every converged orbit.
    pub verification: Verification,
}

impl PeriodicOrbit {
    pub fn span(&self) -> f64 {
        self.k as f64 * self.period
    }

    /// State at time `t`, wrapped into `[0, kT)`.
    pub fn state_at(&self, t: f64) -> [f64; 2] {
        let s = self.span();
        let mut r = t - s * (t / s).floor();
        if r >= s {
            r -= s;
        }
        self.trajectory.eval(r)
    }

    pub fn u_at(&self, t: f64) -> f64 {
        self.state_at(t)[0]
    }

    /// Max over the sample grid of `|u − v|` where `v` comes from `other`.
    pub fn sup_distance(&self, other: &PeriodicOrbit, shift: f64) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max((s.x1 - other.u_at(s.t + shift)).abs()))
    }
}

/// Node times for `k` periods with `m` segments each.
pub fn node_times(period: f64, k: usize, m: usize) -> Vec<f64> {
    let total = k * m;
    (0..=total)
        .map(|i| {
            let per = i / m;
            let j = i % m;
            per as f64 * period + period * j as f64 / m as f64
        })
        .collect()
}

fn segment_map(
    problem: &Problem,
    t0: f64,
    t1: f64,
    x: [f64; 2],
    cfg: &ShootingConfig,
    with_jac: bool,
) -> Result<([f64; 2], Option<[[f64; 2]; 2]>)> {
    if !with_jac {
        return Ok((ode::flow(problem, t0, t1, x, &cfg.integrator)?, None));
    }
    match cfg.jacobian {
        JacobianMode::Variational => {
            let (y, m) = ode::flow_with_jacobian(problem, t0, t1, x, &cfg.integrator)?;
            Ok((y, Some(m)))
        }
        JacobianMode::FiniteDifference { h } => {
            let y = ode::flow(problem, t0, t1, x, &cfg.integrator)?;
            let mut jac = [[0.0; 2]; 2];
            for j in 0..2 {
                let step = h * x[j].abs().max(1.0);
                let mut xp = x;
                let mut xm = x;
                xp[j] += step;
                xm[j] -= step;
                let yp = ode::flow(problem, t0, t1, xp, &cfg.integrator)?;
                let ym = ode::flow(problem, t0, t1, xm, &cfg.integrator)?;
                for i in 0..2 {
                    jac[i][j] = (yp[i] - ym[i]) / (2.0 * step);
                }
            }
            Ok((y, Some(jac)))
        }
    }
}

/// Defects of a closed shooting chain and, optionally, the segment Jacobians.
pub(crate) fn chain_residual(
    problem: &Problem,
    times: &[f64],
    nodes: &[[f64; 2]],
    cfg: &ShootingConfig,
    with_jac: bool,
) -> Result<(Vec<f64>, Vec<[[f64; 2]; 2]>)> {
    let m = nodes.len();
    let mut r = vec![0.0; 2 * m];
    let mut jacs = Vec::with_capacity(if with_jac { m } else { 0 });
    for i in 0..m {
        let (y, jac) = segment_map(problem, times[i], times[i + 1], nodes[i], cfg, with_jac)?;
        let next = nodes[(i + 1) % m];
        r[2 * i] = y[0] - next[0];
        r[2 * i + 1] = y[1] - next[1];
        if let Some(j) = jac {
            jacs.push(j);
        }
    }
    Ok((r, jacs))
}

/// Block-cyclic Jacobian of the chain residual with respect to the nodes.
pub(crate) fn chain_matrix(jacs: &[[[f64; 2]; 2]], extra: usize) -> Matrix {
    let m = jacs.len();
    let n = 2 * m + extra;
    let mut a = Matrix::zeros(n);
    for (i, j) in jacs.iter().enumerate() {
        let next = (i + 1) % m;
        for r in 0..2 {
            for c in 0..2 {
                a.add(2 * i + r, 2 * i + c, j[r][c]);
            }
            a.add(2 * i + r, 2 * next + r, -1.0);
        }
    }
    a
}

const COARSE_FACTOR: f64 = 1e4;
const COARSE_SWITCH: f64 = 1e-5;

/// Newton tolerance capped relative to the size of the force along the
/// chain. Near the resonant trivial state `Φᵏ(x) − x` is tiny for any small
/// constant `x`, so an absolute tolerance alone accepts spurious orbits.
fn effective_tol(problem: &Problem, nodes: &[[f64; 2]], newton_tol: f64) -> f64 {
    let umax = nodes.iter().fold(0.0f64, |m, x| m.max(x[0].abs()));
    if umax < 1e-8 {
        return newton_tol;
    }
    let scale = problem.lambda * problem.weight.sup_abs() * problem.g.g(umax) * problem.period();
    newton_tol.min(1e-6 * scale)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Node states obtained by integrating from `x0`. Falls back to `x0` at
/// nodes the flow cannot reach.
pub fn nodes_from_state(problem: &Problem, times: &[f64], x0: [f64; 2], cfg: &IntegratorConfig) -> Vec<[f64; 2]> {
    let m = times.len() - 1;
    let mut nodes = Vec::with_capacity(m);
    let mut x = x0;
    let mut ok = true;
    for i in 0..m {
        nodes.push(if ok { x } else { x0 });
        if ok {
            match ode::flow(problem, times[i], times[i + 1], x, cfg) {
                Ok(y) if y.iter().all(|v| v.is_finite() && v.abs() < 1e8) => x = y,
                _ => ok = false,
            }
        }
    }
    nodes
}

/// Newton on the shooting chain for a `kT`-periodic orbit starting from the
/// given node states (one per segment, `k·M` in total).
pub fn shoot_nodes(problem: &Problem, k: usize, mut nodes: Vec<[f64; 2]>, cfg: &ShootingConfig) -> Result<PeriodicOrbit> {
    cfg.validate()?;
    if k == 0 {
        return Err(Error::invalid("k must be >= 1"));
    }
    let m_total = nodes.len();
    if m_total == 0 || !m_total.is_multiple_of(k) {
        return Err(Error::invalid("node count must be a positive multiple of k"));
    }
    if nodes.iter().any(|x| !(x[0].is_finite() && x[1].is_finite())) {
        return Err(Error::invalid("guess must be finite"));
    }
    let times = node_times(problem.period(), k, m_total / k);
    // loose integration until the chain is nearly closed
    let coarse = ShootingConfig { integrator: cfg.integrator.scaled(COARSE_FACTOR), ..*cfg };
    let mut fine = false;
    let mut active = &coarse;
    let (mut r, mut jacs) = chain_residual(problem, &times, &nodes, active, true)?;
    let mut norm = max_abs(&r);
    let mut iterations = 0;
    loop {
        if !fine && norm <= COARSE_SWITCH {
            fine = true;
            active = cfg;
            (r, jacs) = chain_residual(problem, &times, &nodes, active, true)?;
            norm = max_abs(&r);
        }
        if fine && norm <= effective_tol(problem, &nodes, cfg.newton_tol) {
            break;
        }
        if iterations >= cfg.max_newton_iter {
            return Err(Error::NoConvergence { iterations, residual: norm });
        }
        iterations += 1;
        let a = chain_matrix(&jacs, 0);
        let lu = Lu::new(&a).ok_or(Error::SingularJacobian(f64::INFINITY))?;
        let cond = lu.condition_estimate();
        if !(cond <= cfg.singular_condition) {
            return Err(Error::SingularJacobian(cond));
        }
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        let dx = lu.solve(&neg);
        let mut alpha: f64 = 1.0;
        for (i, x) in nodes.iter().enumerate() {
            let c1 = 0.5 * x[0].abs().max(1.0);
            let c2 = x[1].abs().max(2.0);
            alpha = alpha.min(c1 / dx[2 * i].abs().max(1e-300)).min(c2 / dx[2 * i + 1].abs().max(1e-300));
        }
        let mut accepted = false;
        for _ in 0..12 {
            let trial: Vec<[f64; 2]> = nodes
                .iter()
                .enumerate()
                .map(|(i, x)| [x[0] + alpha * dx[2 * i], x[1] + alpha * dx[2 * i + 1]])
                .collect();
            if let Ok((rt, jt)) = chain_residual(problem, &times, &trial, active, true) {
                let nt = max_abs(&rt);
                if nt.is_finite() && (nt < norm || nt <= cfg.newton_tol) {
                    nodes = trial;
                    r = rt;
                    jacs = jt;
                    norm = nt;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Err(Error::NoConvergence { iterations, residual: norm });
        }
    }
    build_orbit(problem, k, &times, nodes, norm, iterations, cfg)
}

/// Newton shooting from a single initial state.
pub fn newton_shoot(problem: &Problem, k: usize, guess: PlanarState, cfg: &ShootingConfig) -> Result<PeriodicOrbit> {
    if !(guess.x1.is_finite() && guess.x2.is_finite()) {
        return Err(Error::invalid("guess must be finite"));
    }
    let m = cfg.segments(problem);
    let times = node_times(problem.period(), k.max(1), m);
    let nodes = nodes_from_state(problem, &times, guess.to_array(), &cfg.integrator);
    shoot_nodes(problem, k, nodes, cfg)
}

/// Newton shooting seeded by sampling a profile `t ↦ (x1, x2)` at the nodes.
pub fn shoot_profile<F: Fn(f64) -> [f64; 2]>(problem: &Problem, k: usize, profile: F, cfg: &ShootingConfig) -> Result<PeriodicOrbit> {
    let m = cfg.segments(problem);
    let times = node_times(problem.period(), k.max(1), m);
    let nodes = times[..times.len() - 1].iter().map(|&t| profile(t)).collect();
    shoot_nodes(problem, k, nodes, cfg)
}

/// Re-converges an orbit at a different λ (or node count), seeded from its
/// dense output.
pub fn continue_orbit(problem: &Problem, orbit: &PeriodicOrbit, cfg: &ShootingConfig) -> Result<PeriodicOrbit> {
    shoot_profile(problem, orbit.k, |t| orbit.state_at(t), cfg)
}

pub(crate) fn build_orbit(
    problem: &Problem,
    k: usize,
    times: &[f64],
    nodes: Vec<[f64; 2]>,
    residual: f64,
    iterations: usize,
    cfg: &ShootingConfig,
) -> Result<PeriodicOrbit> {
    let mut trajectory = Trajectory { steps: Vec::new() };
    for i in 0..nodes.len() {
        let seg = ode::integrate(problem, times[i], times[i + 1], nodes[i], &cfg.integrator)?;
        trajectory.append(seg);
    }
    let span = k as f64 * problem.period();
    let n = cfg.samples_per_period * k;
    let samples: Vec<OrbitSample> = (0..n)
        .map(|i| {
            let t = span * i as f64 / n as f64;
            let x = trajectory.eval(t);
            OrbitSample { t, x1: x[0], x2: x[1] }
        })
        .collect();
    let mut sup = f64::NEG_INFINITY;
    let mut min = f64::INFINITY;
    let mut max_x2: f64 = 0.0;
    for s in &samples {
        sup = sup.max(s.x1);
        min = min.min(s.x1);
        max_x2 = max_x2.max(s.x2.abs());
    }
    for s in &trajectory.steps {
        let y = s.start();
        sup = sup.max(y[0]);
        min = min.min(y[0]);
        max_x2 = max_x2.max(y[1].abs());
    }
    let sup_norm = sup.max(-min).max(0.0);
    let rho_star = problem.thresholds().ok().map(|c| c.rho_star);
    let class = if sup_norm < 1e-8 {
        OrbitClass::Trivial
    } else if rho_star.is_none_or(|r| sup_norm < r) {
        OrbitClass::Small
    } else {
        OrbitClass::Large
    };
    if min < -cfg.newton_tol.max(1e-12) || (class != OrbitClass::Trivial && !(min > 0.0)) {
        return Err(Error::MaximumPrinciple { min_u: min });
    }
    let verification = check_trajectory(&trajectory, problem, k, VERIFY_TOL);
    let near_threshold = class == OrbitClass::Small && rho_star.is_some_and(|r| sup_norm >= 0.95 * r);
    Ok(PeriodicOrbit {
        lambda: problem.lambda,
        k,
        period: problem.period(),
        initial: PlanarState::from(nodes[0]),
        node_times: times[..times.len() - 1].to_vec(),
        nodes,
        trajectory,
        samples,
        residual,
        sup_norm,
        min_value: min,
        max_abs_u_prime: phi_inv(max_x2),
        class,
        rho_star,
        near_threshold,
        iterations,
        verification,
    })
}

/// Time-`kT` map and optionally its Jacobian.
pub fn poincare(
    problem: &Problem,
    k: usize,
    x0: PlanarState,
    with_jacobian: bool,
    cfg: &ShootingConfig,
) -> Result<(PlanarState, Option<[[f64; 2]; 2]>)> {
    let span = k as f64 * problem.period();
    let (y, jac) = segment_map(problem, 0.0, span, x0.to_array(), cfg, with_jacobian)?;
    Ok((PlanarState::from(y), jac))
}

/// Product of the segment Jacobians around the orbit, `DΦᵏ(x₀)`.
pub fn monodromy(problem: &Problem, orbit: &PeriodicOrbit, cfg: &ShootingConfig) -> Result<[[f64; 2]; 2]> {
    let times = node_times(problem.period(), orbit.k, orbit.nodes.len() / orbit.k);
    let (_, jacs) = chain_residual(problem, &times, &orbit.nodes, &ShootingConfig { jacobian: JacobianMode::Variational, ..*cfg }, true)?;
    let mut m = [[1.0, 0.0], [0.0, 1.0]];
    for j in &jacs {
        m = mul2(*j, m);
    }
    Ok(m)
}

/// `det` of every segment Jacobian; area preservation makes all of them 1.
pub fn segment_determinants(problem: &Problem, orbit: &PeriodicOrbit, cfg: &ShootingConfig) -> Result<Vec<f64>> {
    let times = node_times(problem.period(), orbit.k, orbit.nodes.len() / orbit.k);
    let (_, jacs) = chain_residual(problem, &times, &orbit.nodes, &ShootingConfig { jacobian: JacobianMode::Variational, ..*cfg }, true)?;
    Ok(jacs.iter().map(|j| det2(*j)).collect())
}

// ---------------------------------------------------------------------------
// verification

/// Outcome of the a-posteriori checks on an orbit; relative quantities are
/// normalized as documented per field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verification {
    /// `|∫ a g(u)| / ∫ |a| g(u)`.
    pub integral_ag: f64,
    /// `|λk∫₀ᵀa + ∫ φ(u')u'g'(u)/g(u)²| / (λk∫₀ᵀ|a|)`.
    pub identity: f64,
    pub min_u: f64,
    pub max_abs_u_prime: f64,
    /// Second-derivative residual over `λ‖a‖∞ max g(u)`.
    pub second_derivative: f64,
    pub tolerance: f64,
}

impl Verification {
    /// First failing item (1–5), if any.
    pub fn failure(&self) -> Option<(u8, f64, f64)> {
        let tol = self.tolerance;
        if !(self.integral_ag <= tol) {
            return Some((1, self.integral_ag, tol));
        }
        if !(self.identity <= tol) {
            return Some((2, self.identity, tol));
        }
        if !(self.min_u > 0.0) {
            return Some((3, self.min_u, 0.0));
        }
        if !(self.max_abs_u_prime < 1.0) {
            return Some((4, self.max_abs_u_prime, 1.0));
        }
        if !(self.second_derivative <= tol) {
            return Some((5, self.second_derivative, tol));
        }
        None
    }

    pub fn passed(&self) -> bool {
        self.failure().is_none()
    }
}

/// Quadrature of the necessary identities over the dense output of a
/// trajectory covering `[0, kT]`, without judging the result.
pub fn check_trajectory(traj: &Trajectory<2>, problem: &Problem, k: usize, tol: f64) -> Verification {
    let lambda = problem.lambda;
    let g = &problem.g;
    let mut i_ag = 0.0;
    let mut i_abs = 0.0;
    let mut i_id = 0.0;
    let mut min_u = f64::INFINITY;
    let mut max_u = f64::NEG_INFINITY;
    let mut max_x2: f64 = 0.0;
    for s in &traj.steps {
        for (x, w) in GL5_NODES.iter().zip(GL5_WEIGHTS.iter()) {
            let t = s.t0 + x * s.h;
            let y = s.eval(t);
            let at = problem.weight.eval_on_piece(t, s.anchor);
            let gu = g.g(y[0]);
            i_ag += w * s.h * at * gu;
            i_abs += w * s.h * at.abs() * gu;
            if y[0] > 0.0 {
                i_id += w * s.h * y[1] * phi_inv(y[1]) * g.g_prime(y[0]) / (gu * gu);
            }
            min_u = min_u.min(y[0]);
            max_u = max_u.max(y[0]);
            max_x2 = max_x2.max(y[1].abs());
        }
        let y = s.start();
        min_u = min_u.min(y[0]);
        max_u = max_u.max(y[0]);
        max_x2 = max_x2.max(y[1].abs());
    }
    let t_per = problem.period();
    let abs_a = crate::quad::gauss_legendre(|t| problem.weight.eval(t).abs(), 0.0, t_per, 512);
    let int_a = problem.weight.integral(0.0, t_per);
    let kk = k as f64;
    let identity = (lambda * kk * int_a + i_id).abs() / (lambda * kk * abs_a);
    let scale = lambda * problem.weight.sup_abs() * g.g(max_u.max(0.0));
    let sdr = ode::second_derivative_residual(traj, problem);
    Verification {
        integral_ag: if i_abs > 0.0 { i_ag.abs() / i_abs } else { 0.0 },
        identity,
        min_u,
        max_abs_u_prime: phi_inv(max_x2),
        second_derivative: if scale > 0.0 { sdr / scale } else { sdr },
        tolerance: tol,
    }
}

/// Runs the five checks; `VerificationFailed` names the first violated one.
pub fn verify_orbit(orbit: &PeriodicOrbit, problem: &Problem, tol: f64) -> Result<Verification> {
    if orbit.class == OrbitClass::Trivial || !(orbit.min_value > 0.0) {
        return Err(Error::invalid("verification needs a nontrivial positive orbit"));
    }
    let v = check_trajectory(&orbit.trajectory, problem, orbit.k, tol);
    match v.failure() {
        None => Ok(v),
        Some((item, value, bound)) => Err(Error::VerificationFailed { item, value, bound }),
    }
}

/// Lemma-type inequality for orbits that stay below ρ* on every positivity
/// interval: `λ min_{[2c ρ*/|I|, c]} g · ∫_{σ+2ρ*}^{τ−2ρ*} a ≤ 2φ(c/(2ρ*))`
/// with `c = max_{I⁺} u`. `None` when the hypothesis `c ≤ ρ*` fails.
pub fn small_amplitude_inequality(
    orbit: &PeriodicOrbit,
    problem: &Problem,
    decomp: &SignDecomposition,
    consts: &ThresholdConstants,
) -> Option<bool> {
    let rho = consts.rho_star;
    let mut c: f64 = 0.0;
    for s in &orbit.samples {
        if decomp.contains(s.t) {
            c = c.max(s.x1);
        }
    }
    if !(c <= rho) || c <= 0.0 {
        return None;
    }
    let rhs = 2.0 * phi(c / (2.0 * rho)).ok()?;
    Some(decomp.intervals.iter().zip(&consts.interval_integrals).all(|(&(s, t), &int)| {
        let lhs = problem.lambda * problem.g.min_on(2.0 * c * rho / (t - s), c) * int;
        lhs <= rhs * (1.0 + 1e-12)
    }))
}

// ---------------------------------------------------------------------------
// multi-start search

/// Seed profiles: constant states across the whole window and tents peaked
/// on each positivity interval with heights above ρ*.
pub fn seed_profiles(problem: &Problem, window: &SearchWindow) -> Vec<SeedProfile> {
    let t_per = problem.period();
    let rho = problem.thresholds().map(|c| c.rho_star).unwrap_or(window.r_min);
    let mut seeds = Vec::new();
    let n = window.small_seeds;
    for i in 0..n {
        let frac = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
        let h = window.r_min * (window.r_max / window.r_min).powf(frac);
        seeds.push(SeedProfile::Constant { height: h });
    }
    if let Ok(dec) = problem.weight.sign_decomposition() {
        let lo = rho.max(window.r_min).min(window.r_max);
        let n = window.large_seeds;
        for &(s, e) in &dec.intervals {
            let center = 0.5 * (s + e);
            for i in 0..n {
                let h = lo * (window.r_max / lo).powf((i + 1) as f64 / n as f64);
                for &slope in &TENT_SLOPES {
                    seeds.push(SeedProfile::Tent { center, height: h, slope, period: t_per });
                }
            }
        }
    }
    seeds
}

const TENT_SLOPES: [f64; 3] = [0.5, 0.9, 0.995];
const TENT_FLOOR: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SeedProfile {
    Constant { height: f64 },
    /// `u(t) = max(height − slope·d(t, center), 0.3·height)` with `d` the
    /// periodic distance.
    Tent { center: f64, height: f64, slope: f64, period: f64 },
}

impl SeedProfile {
    pub fn state(&self, t: f64) -> [f64; 2] {
        match *self {
            SeedProfile::Constant { height } => [height, 0.0],
            SeedProfile::Tent { center, height, slope, period } => {
                let mut d = t - center;
                d -= period * (d / period).round();
                let floor = TENT_FLOOR * height;
                let u = height - slope * d.abs();
                if u <= floor {
                    [floor, 0.0]
                } else {
                    let up = -slope * d.signum();
                    [u, phi(up).unwrap_or(0.0)]
                }
            }
        }
    }
}

fn insert_distinct(found: &mut Vec<PeriodicOrbit>, orbit: PeriodicOrbit, delta: f64) {
    if orbit.class == OrbitClass::Trivial {
        return;
    }
    if found.iter().any(|o| o.sup_distance(&orbit, 0.0) < delta) {
        return;
    }
    found.push(orbit);
}

/// Canonical order: by sup norm, ties by initial `x1`.
pub fn sort_orbits(orbits: &mut [PeriodicOrbit]) {
    orbits.sort_by(|a, b| {
        a.sup_norm
            .partial_cmp(&b.sup_norm)
            .unwrap()
            .then(a.initial.x1.partial_cmp(&b.initial.x1).unwrap())
    });
}

/// All distinct nontrivial harmonic orbits reached from the seed set.
pub fn find_two_solutions(problem: &Problem, window: &SearchWindow, cfg: &ShootingConfig) -> Result<Vec<PeriodicOrbit>> {
    window.validate()?;
    cfg.validate()?;
    let mut found: Vec<PeriodicOrbit> = Vec::new();
    for seed in seed_profiles(problem, window) {
        if let Ok(orbit) = shoot_profile(problem, 1, |t| seed.state(t), cfg) {
            insert_distinct(&mut found, orbit, cfg.dedup_distance);
        }
    }
    sort_orbits(&mut found);
    Ok(found)
}

/// Orbits reached by shooting from each orbit of a neighbouring problem.
pub fn warm_starts(problem: &Problem, previous: &[PeriodicOrbit], cfg: &ShootingConfig) -> Vec<PeriodicOrbit> {
    previous
        .iter()
        .filter_map(|o| continue_orbit(problem, o, cfg).ok())
        .filter(|o| o.class != OrbitClass::Trivial)
        .collect()
}

/// Deduplicates and orders orbits gathered elsewhere (e.g. in parallel).
pub fn merge_orbits(orbits: Vec<PeriodicOrbit>, delta: f64) -> Vec<PeriodicOrbit> {
    let mut found = Vec::new();
    for o in orbits {
        insert_distinct(&mut found, o, delta);
    }
    sort_orbits(&mut found);
    found
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub lambda: f64,
    pub sup_norms: Vec<f64>,
    pub classes: Vec<OrbitClass>,
}

impl ScanRow {
    pub fn count(&self) -> usize {
        self.sup_norms.len()
    }

    pub fn from_orbits(lambda: f64, orbits: &[PeriodicOrbit]) -> Self {
        ScanRow {
            lambda,
            sup_norms: orbits.iter().map(|o| o.sup_norm).collect(),
            classes: orbits.iter().map(|o| o.class).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanReport {
    pub rows: Vec<ScanRow>,
    /// Largest grid λ with no orbit found.
    pub largest_empty: Option<f64>,
    /// Smallest grid λ with at least two orbits.
    pub onset: Option<f64>,
    /// Grid cell `(λᵢ₋₁, λᵢ]` ending at the onset.
    pub onset_bracket: Option<(f64, f64)>,
}

impl ScanReport {
    pub fn from_rows(mut rows: Vec<ScanRow>) -> Self {
        rows.sort_by(|a, b| a.lambda.partial_cmp(&b.lambda).unwrap());
        let largest_empty = rows.iter().filter(|r| r.count() == 0).map(|r| r.lambda).next_back();
        let idx = rows.iter().position(|r| r.count() >= 2);
        let onset = idx.map(|i| rows[i].lambda);
        let onset_bracket = idx.map(|i| (if i > 0 { rows[i - 1].lambda } else { 0.0 }, rows[i].lambda));
        ScanReport { rows, largest_empty, onset, onset_bracket }
    }
}

/// Multi-start search at every grid point.
pub fn scan_lambda(problem: &Problem, grid: &[f64], window: &SearchWindow, cfg: &ShootingConfig) -> Result<ScanReport> {
    if grid.iter().any(|l| !(*l > 0.0)) || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("lambda grid must be positive and increasing"));
    }
    let mut seeded = Vec::with_capacity(grid.len());
    for &lambda in grid {
        seeded.push(find_two_solutions(&problem.with_lambda(lambda), window, cfg)?);
    }
    scan_with_seeds(problem, grid, seeded, cfg)
}

/// The warm-start passes of [`scan_lambda`] given the multi-start results at
/// every grid point, so callers can compute those in any order.
pub fn scan_with_seeds(
    problem: &Problem,
    grid: &[f64],
    seeded: Vec<Vec<PeriodicOrbit>>,
    cfg: &ShootingConfig,
) -> Result<ScanReport> {
    if seeded.len() != grid.len() {
        return Err(Error::invalid("one seed set per grid point"));
    }
    // Forward pass with seeds plus warm starts from the previous grid point,
    // then a backward pass of warm starts only.
    let mut found: Vec<Vec<PeriodicOrbit>> = Vec::with_capacity(grid.len());
    for (i, (&lambda, mut orbits)) in grid.iter().zip(seeded).enumerate() {
        let p = problem.with_lambda(lambda);
        if i > 0 {
            orbits.extend(warm_starts(&p, &found[i - 1], cfg));
        }
        found.push(merge_orbits(orbits, cfg.dedup_distance));
    }
    for i in (0..grid.len().saturating_sub(1)).rev() {
        let p = problem.with_lambda(grid[i]);
        let extra = warm_starts(&p, &found[i + 1], cfg);
        if !extra.is_empty() {
            let mut orbits = core::mem::take(&mut found[i]);
            orbits.extend(extra);
            found[i] = merge_orbits(orbits, cfg.dedup_distance);
        }
    }
    let rows = grid.iter().zip(&found).map(|(&l, o)| ScanRow::from_orbits(l, o)).collect();
    Ok(ScanReport::from_rows(rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Nonlinearity, Weight};

    fn fig1(lambda: f64) -> Problem {
        Problem::new(Weight::fig1(), Nonlinearity::power(3.0).unwrap(), lambda).unwrap()
    }

    #[test]
    fn node_times_cover_periods() {
        let t = node_times(2.0, 3, 2);
        assert_eq!(t, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn free_motion_poincare() {
        let w = Weight::trig(1.0, 0.0, 0.0, 0.0).unwrap();
        let p = Problem::new(w, Nonlinearity::power(2.0).unwrap(), 1.0).unwrap();
        let (y, _) = poincare(&p, 1, PlanarState::new(1.0, 0.75), false, &ShootingConfig::default()).unwrap();
        assert!((y.x1 - 1.6).abs() < 1e-12 && y.x2 == 0.75);
    }

    #[test]
    fn origin_is_trivial_fixed_point() {
        let p = fig1(2.0);
        let cfg = ShootingConfig::default();
        let (y, _) = poincare(&p, 3, PlanarState::ORIGIN, false, &cfg).unwrap();
        assert_eq!(y, PlanarState::ORIGIN);
        let o = newton_shoot(&p, 1, PlanarState::ORIGIN, &cfg).unwrap();
        assert_eq!(o.class, OrbitClass::Trivial);
        assert_eq!(o.residual, 0.0);
    }

    #[test]
    fn seeds_are_inside_the_derivative_bound() {
        let p = fig1(2.0);
        for s in seed_profiles(&p, &SearchWindow::default()) {
            for i in 0..64 {
                let x = s.state(i as f64 * 0.1);
                assert!(x[0] > 0.0 && phi_inv(x[1]).abs() < 1.0);
            }
        }
    }

    #[test]
    fn scan_report_bracket() {
        let rows = vec![
            ScanRow { lambda: 1.0, sup_norms: vec![], classes: vec![] },
            ScanRow { lambda: 2.0, sup_norms: vec![1.0], classes: vec![OrbitClass::Large] },
            ScanRow { lambda: 3.0, sup_norms: vec![1.0, 2.0], classes: vec![OrbitClass::Large; 2] },
        ];
        let r = ScanReport::from_rows(rows);
        assert_eq!(r.largest_empty, Some(1.0));
        assert_eq!(r.onset, Some(3.0));
        assert_eq!(r.onset_bracket, Some((2.0, 3.0)));
    }
}
