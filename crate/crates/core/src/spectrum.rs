//! Periodic Sturm–Liouville problems `(p w')' + (μ + q) w = 0` through the
//! Prüfer angle.
//!
//! With `(w, p w') = ℓ (cos θ, −sin θ)` the angle obeys
//! `θ' = sin²θ / p + (μ + q) cos²θ` and the radius
//! `(ln ℓ)' = −(1/p − (μ + q)) sin θ cos θ`.
//! `f(μ) = min_{θ₀} (θ(T; θ₀) − θ₀)` is increasing in μ and its zero is the
//! principal eigenvalue.
//!
//! Coefficients linearized around an orbit are never tabulated: the orbit's
//! planar state is carried along in the same integration, restarted from the
//! converged shooting node at every node time.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)] // inherent when a dependent links std
use num_traits::Float;

use crate::error::{Error, Result};
use crate::model::{phi_inv, phi_inv_prime, Problem};
use crate::ode::{self, lambda_cap, Field, IntegratorConfig, Trajectory};
use crate::periodic::{OrbitClass, PeriodicOrbit};
use crate::quad::{bisect_increasing, golden_min};

/// `c₀ + Σ aₖ cos(2πkt/T) + bₖ sin(2πkt/T)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPoly {
    pub period: f64,
    pub c0: f64,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl TrigPoly {
    pub fn new(period: f64, c0: f64, cos: Vec<f64>, sin: Vec<f64>) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::invalid("period must be positive"));
        }
        if !c0.is_finite() || cos.iter().chain(&sin).any(|v| !v.is_finite()) {
            return Err(Error::invalid("trigonometric coefficients must be finite"));
        }
        Ok(TrigPoly { period, c0, cos, sin })
    }

    pub fn constant(period: f64, c: f64) -> Result<Self> {
        Self::new(period, c, Vec::new(), Vec::new())
    }

    pub fn eval(&self, t: f64) -> f64 {
        let w = 2.0 * PI * t / self.period;
        let mut s = self.c0;
        for (k, a) in self.cos.iter().enumerate() {
            s += a * ((k + 1) as f64 * w).cos();
        }
        for (k, b) in self.sin.iter().enumerate() {
            s += b * ((k + 1) as f64 * w).sin();
        }
        s
    }

    pub fn is_constant(&self) -> bool {
        self.cos.iter().chain(&self.sin).all(|v| *v == 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Coefficients {
    Analytic { p: TrigPoly, q: TrigPoly },
    /// `p = φ'(u')`, `q = λ a g'(u)` along a converged orbit.
    Linearized { problem: Problem, node_times: Vec<f64>, nodes: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SturmLiouvilleCoeffs {
    pub period: f64,
    pub source: Coefficients,
    /// Smallest `p` seen on the validation mesh.
    pub p_min: f64,
    pub integrator: IntegratorConfig,
}

const CHECK_MESH: usize = 4096;

impl SturmLiouvilleCoeffs {
    pub fn analytic(p: TrigPoly, q: TrigPoly) -> Result<Self> {
        if p.period != q.period {
            return Err(Error::invalid("p and q must share the period"));
        }
        let period = p.period;
        let p_min = (0..CHECK_MESH).map(|i| p.eval(period * i as f64 / CHECK_MESH as f64)).fold(f64::INFINITY, f64::min);
        if !(p_min > 0.0) {
            return Err(Error::invalid("p must be positive"));
        }
        Ok(SturmLiouvilleCoeffs { period, source: Coefficients::Analytic { p, q }, p_min, integrator: IntegratorConfig::default() })
    }

    /// `p ≡ 1`, `q ≡ c`.
    pub fn constant(period: f64, c: f64) -> Result<Self> {
        Self::analytic(TrigPoly::constant(period, 1.0)?, TrigPoly::constant(period, c)?)
    }

    pub fn with_integrator(mut self, cfg: IntegratorConfig) -> Self {
        self.integrator = cfg;
        self
    }

    pub fn is_linearized(&self) -> bool {
        matches!(self.source, Coefficients::Linearized { .. })
    }

    /// `(t, p(t), q(t))` on `n` uniform points of `[0, T)`.
    pub fn sample(&self, n: usize) -> Result<Vec<(f64, f64, f64)>> {
        let ts: Vec<f64> = (0..n).map(|i| self.period * i as f64 / n as f64).collect();
        match &self.source {
            Coefficients::Analytic { p, q } => Ok(ts.iter().map(|&t| (t, p.eval(t), q.eval(t))).collect()),
            Coefficients::Linearized { problem, node_times, nodes } => {
                let mut out = Vec::with_capacity(n);
                let mut i = 0;
                for seg in 0..nodes.len() {
                    let (a, b) = (node_times[seg], node_times[seg + 1]);
                    if i >= n || ts[i] >= b {
                        continue;
                    }
                    let traj = ode::integrate(problem, a, b, nodes[seg], &self.integrator)?;
                    while i < n && ts[i] < b {
                        let t = ts[i];
                        let x = traj.eval(t);
                        let up = phi_inv(x[1]);
                        let p = (1.0 - up * up).powf(-1.5);
                        out.push((t, p, problem.dforce(t, t, x[0])));
                        i += 1;
                    }
                }
                Ok(out)
            }
        }
    }
}

/// Linearization of the equation around a positive orbit. A trivial orbit
/// gives `p ≡ 1` and `q ≡ λ a g'(0)`, which vanishes for the supported `g`.
pub fn linearize_around(orbit: &PeriodicOrbit, problem: &Problem) -> Result<SturmLiouvilleCoeffs> {
    if orbit.lambda != problem.lambda {
        return Err(Error::invalid("orbit and problem disagree on lambda"));
    }
    let span = orbit.span();
    if orbit.class == OrbitClass::Trivial {
        if problem.g.g_prime(0.0) != 0.0 {
            return Err(Error::TrivialOrbit);
        }
        return SturmLiouvilleCoeffs::constant(span, 0.0);
    }
    if !(orbit.min_value > 0.0) {
        return Err(Error::invalid("linearization needs a positive orbit"));
    }
    let mut node_times = orbit.node_times.clone();
    node_times.push(span);
    Ok(SturmLiouvilleCoeffs {
        period: span,
        source: Coefficients::Linearized { problem: problem.clone(), node_times, nodes: orbit.nodes.clone() },
        p_min: 1.0,
        integrator: IntegratorConfig::default(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    /// `(θ, ln ℓ)`
    Pruefer,
    /// `(w, p w')`
    Planar,
}

/// State `[x1, x2, a, b]`; the orbit part is frozen for analytic
/// coefficients.
struct AngleField<'a> {
    coeffs: &'a SturmLiouvilleCoeffs,
    mu: f64,
    mode: Mode,
}

impl Field<4> for AngleField<'_> {
    #[inline]
    fn eval(&self, t: f64, anchor: f64, y: &[f64; 4]) -> [f64; 4] {
        let (inv_p, q, dx) = match &self.coeffs.source {
            Coefficients::Analytic { p, q } => (1.0 / p.eval(t), q.eval(t), [0.0, 0.0]),
            Coefficients::Linearized { problem, .. } => (
                phi_inv_prime(y[1]),
                problem.dforce(t, anchor, y[0]),
                [phi_inv(y[1]), -problem.force(t, anchor, y[0])],
            ),
        };
        let k = self.mu + q;
        match self.mode {
            Mode::Pruefer => {
                let (s, c) = y[2].sin_cos();
                [dx[0], dx[1], s * s * inv_p + k * c * c, -(inv_p - k) * s * c]
            }
            Mode::Planar => [dx[0], dx[1], y[3] * inv_p, -k * y[2]],
        }
    }
    fn breaks_between(&self, t0: f64, t1: f64, out: &mut Vec<f64>) {
        match &self.coeffs.source {
            Coefficients::Analytic { .. } => out.clear(),
            Coefficients::Linearized { problem, .. } => problem.weight.breaks_between(t0, t1, out),
        }
    }
    fn step_cap(&self, t: f64, anchor: f64) -> f64 {
        match &self.coeffs.source {
            Coefficients::Analytic { .. } => f64::INFINITY,
            Coefficients::Linearized { problem, .. } => lambda_cap(problem, t, anchor),
        }
    }
}

/// Pieces of `[0, t1]` between consecutive (periodically repeated) node
/// times, with the orbit state at each piece start.
fn pieces(coeffs: &SturmLiouvilleCoeffs, t1: f64) -> Vec<(f64, f64, [f64; 2])> {
    match &coeffs.source {
        Coefficients::Analytic { .. } => vec![(0.0, t1, [0.0, 0.0])],
        Coefficients::Linearized { node_times, nodes, .. } => {
            let span = coeffs.period;
            let mut out = Vec::new();
            let mut shift = 0.0;
            'outer: loop {
                for i in 0..nodes.len() {
                    let a = shift + node_times[i];
                    let b = (shift + node_times[i + 1]).min(t1);
                    if a >= t1 {
                        break 'outer;
                    }
                    out.push((a, b, nodes[i]));
                }
                shift += span;
            }
            out
        }
    }
}

fn run(coeffs: &SturmLiouvilleCoeffs, mu: f64, mode: Mode, t1: f64, ab: [f64; 2]) -> Result<[f64; 2]> {
    let field = AngleField { coeffs, mu, mode };
    let mut ab = ab;
    for (a, b, x) in pieces(coeffs, t1) {
        let y = ode::solve(&field, a, b, [x[0], x[1], ab[0], ab[1]], &coeffs.integrator)?;
        ab = [y[2], y[3]];
    }
    Ok(ab)
}

fn run_dense(coeffs: &SturmLiouvilleCoeffs, mu: f64, mode: Mode, t1: f64, ab: [f64; 2]) -> Result<Trajectory<4>> {
    let field = AngleField { coeffs, mu, mode };
    let mut ab = ab;
    let mut traj = Trajectory { steps: Vec::new() };
    for (a, b, x) in pieces(coeffs, t1) {
        let seg = ode::solve_dense(&field, a, b, [x[0], x[1], ab[0], ab[1]], &coeffs.integrator)?;
        let y = seg.end_state();
        ab = [y[2], y[3]];
        traj.append(seg);
    }
    Ok(traj)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrueferResult {
    /// Continuous lift, never wrapped.
    pub theta: f64,
    pub ell: f64,
}

/// Angle and radius after `n_periods` periods from `(θ₀, ℓ = 1)`.
pub fn pruefer_flow(coeffs: &SturmLiouvilleCoeffs, mu: f64, theta0: f64, n_periods: usize) -> Result<PrueferResult> {
    let y = run(coeffs, mu, Mode::Pruefer, n_periods as f64 * coeffs.period, [theta0, 0.0])?;
    Ok(PrueferResult { theta: y[0], ell: y[1].exp() })
}

/// `θ(kT; θ₀) − θ₀`.
pub fn rotation_over(coeffs: &SturmLiouvilleCoeffs, mu: f64, k: usize, theta0: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("k must be >= 1"));
    }
    Ok(pruefer_flow(coeffs, mu, theta0, k)?.theta - theta0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extremum {
    Min,
    Max,
}

pub const THETA_GRID: usize = 256;
pub const THETA_TOL: f64 = 1e-10;

/// Extremum over `θ₀ ∈ [0, 2π)` of the rotation over `k` periods and the
/// angle attaining it: grid search, then golden section around the best
/// grid point.
pub fn rotation_extremum(coeffs: &SturmLiouvilleCoeffs, mu: f64, k: usize, kind: Extremum) -> Result<(f64, f64)> {
    let sign = if kind == Extremum::Min { 1.0 } else { -1.0 };
    let h = 2.0 * PI / THETA_GRID as f64;
    let mut best = (0.0, f64::INFINITY);
    for i in 0..THETA_GRID {
        let th = h * i as f64;
        let v = sign * rotation_over(coeffs, mu, k, th)?;
        if v < best.1 {
            best = (th, v);
        }
    }
    let mut err = None;
    let (x, v) = golden_min(
        |th| match rotation_over(coeffs, mu, k, th) {
            Ok(r) => sign * r,
            Err(e) => {
                err = Some(e);
                f64::INFINITY
            }
        },
        best.0 - h,
        best.0 + h,
        THETA_TOL,
    );
    if let Some(e) = err {
        return Err(e);
    }
    let (x, v) = if v <= best.1 { (x, v) } else { best };
    Ok((sign * v, x - 2.0 * PI * (x / (2.0 * PI)).floor()))
}

/// `f(μ)`.
pub fn rotation_gap(coeffs: &SturmLiouvilleCoeffs, mu: f64) -> Result<f64> {
    Ok(rotation_extremum(coeffs, mu, 1, Extremum::Min)?.0)
}

pub const MU_CAP: f64 = 1e6;
pub const GAP_TOL: f64 = 1e-10;

/// Zero of the increasing function `h`, bracketed by doubling away from
/// `start` and then bisected.
fn bracket_and_bisect<H: FnMut(f64) -> Result<f64>>(mut h: H, start: f64, step0: f64) -> Result<(f64, [f64; 2])> {
    let h0 = h(start)?;
    if h0.abs() < GAP_TOL {
        return Ok((start, [start, start]));
    }
    let dir = if h0 > 0.0 { -1.0 } else { 1.0 };
    let mut step = step0;
    let (mut lo, mut hi) = (start, start);
    loop {
        let x = start + dir * step;
        if x.abs() > MU_CAP {
            return Err(Error::BracketFailure);
        }
        let v = h(x)?;
        if v.abs() < GAP_TOL {
            return Ok((x, [x, x]));
        }
        if (v > 0.0) != (h0 > 0.0) {
            if dir > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            break;
        }
        if dir > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        step *= 2.0;
    }
    let mut err = None;
    let (root, _, bracket) = bisect_increasing(
        |m| match h(m) {
            Ok(v) => v,
            Err(e) => {
                err = Some(e);
                f64::NAN
            }
        },
        lo,
        hi,
        GAP_TOL,
        200,
    );
    if let Some(e) = err {
        return Err(e);
    }
    Ok((root, bracket))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenvalueResult {
    pub mu0: f64,
    pub bracket: [f64; 2],
    /// Minimizing initial angle at `μ₀`.
    pub theta0: f64,
    pub t: Vec<f64>,
    /// Eigenfunction samples, `max |w| = 1`, sign chosen positive.
    pub w: Vec<f64>,
    /// Largest defect of `(p w')' + (μ₀ + q) w = 0` at step midpoints, relative
    /// to `max |(μ₀ + q) w| + max |w|`.
    pub residual: f64,
    /// `|(w, p w')(T) − (w, p w')(0)|∞` for the normalized eigenfunction.
    pub periodicity_defect: f64,
    pub zeros: usize,
}

/// Eigenfunction from the angle `theta0` at `mu`, sampled on `n` points.
fn eigenfunction(coeffs: &SturmLiouvilleCoeffs, mu: f64, theta0: f64, n: usize) -> Result<(Vec<f64>, Vec<f64>, f64, f64)> {
    let t_end = coeffs.period;
    let traj = run_dense(coeffs, mu, Mode::Planar, t_end, [theta0.cos(), -theta0.sin()])?;
    let t: Vec<f64> = (0..n).map(|i| t_end * i as f64 / n as f64).collect();
    let mut w: Vec<f64> = t.iter().map(|&s| traj.eval(s)[2]).collect();
    let (imax, _) = w.iter().enumerate().fold((0, 0.0), |(bi, bv), (i, v)| if v.abs() > bv { (i, v.abs()) } else { (bi, bv) });
    let scale = w[imax];
    w.iter_mut().for_each(|v| *v /= scale);
    let end = traj.end_state();
    let start = traj.steps[0].start();
    let periodicity = ((end[2] - start[2]).abs()).max((end[3] - start[3]).abs()) / scale.abs();
    // ODE defect of the second component, from the dense derivative
    let field = AngleField { coeffs, mu, mode: Mode::Planar };
    let (mut defect, mut size): (f64, f64) = (0.0, 0.0);
    for s in &traj.steps {
        let tm = s.t0 + 0.5 * s.h;
        let y = s.eval(tm);
        let dy = s.deriv(tm);
        let rhs = field.eval(tm, s.anchor, &y);
        defect = defect.max((dy[3] - rhs[3]).abs());
        size = size.max(rhs[3].abs()).max(y[2].abs());
    }
    Ok((t, w, if size > 0.0 { defect / size } else { defect }, periodicity))
}

fn sign_changes(w: &[f64]) -> usize {
    let n = w.len();
    (0..n).filter(|&i| (w[i] > 0.0) != (w[(i + 1) % n] > 0.0)).count()
}

/// Principal eigenvalue: the zero of `f`.
pub fn principal_eigenvalue(coeffs: &SturmLiouvilleCoeffs) -> Result<EigenvalueResult> {
    let (mu0, bracket) = bracket_and_bisect(|m| rotation_gap(coeffs, m), 0.0, 1.0)?;
    let (_, theta0) = rotation_extremum(coeffs, mu0, 1, Extremum::Min)?;
    let (t, w, residual, periodicity_defect) = eigenfunction(coeffs, mu0, theta0, 2048)?;
    let zeros = sign_changes(&w);
    Ok(EigenvalueResult { mu0, bracket, theta0, t, w, residual, periodicity_defect, zeros })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenPair {
    pub k: usize,
    pub mu_prime: f64,
    pub mu_second: f64,
    /// Sign changes of the eigenfunctions belonging to `μ'ₖ` and `μ''ₖ`.
    pub zeros_prime: usize,
    pub zeros_second: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HigherEigenvalues {
    pub mu0: f64,
    pub pairs: Vec<EigenPair>,
}

impl HigherEigenvalues {
    /// `μ₀ < μ'₁ ≤ μ''₁ < μ'₂ ≤ …`, the non-strict steps up to `tol`.
    pub fn interlaced(&self, tol: f64) -> bool {
        let mut prev = self.mu0;
        for p in &self.pairs {
            if !(p.mu_prime > prev && p.mu_second >= p.mu_prime - tol) {
                return false;
            }
            prev = p.mu_second;
        }
        true
    }
}

/// `μ'ₖ` and `μ''ₖ` for `k = 1..=k_max`: zeros of the max and min rotation
/// minus `2kπ`.
pub fn higher_eigenvalues(coeffs: &SturmLiouvilleCoeffs, k_max: usize) -> Result<HigherEigenvalues> {
    if k_max == 0 {
        return Err(Error::invalid("k_max must be >= 1"));
    }
    let mu0 = principal_eigenvalue(coeffs)?.mu0;
    let mut pairs = Vec::with_capacity(k_max);
    let mut start = mu0;
    let step0 = (2.0 * PI / coeffs.period).powi(2);
    for k in 1..=k_max {
        let target = 2.0 * PI * k as f64;
        let (mp, _) = bracket_and_bisect(|m| Ok(rotation_extremum(coeffs, m, 1, Extremum::Max)?.0 - target), start, step0)?;
        let (ms, _) = bracket_and_bisect(|m| Ok(rotation_extremum(coeffs, m, 1, Extremum::Min)?.0 - target), mp, step0)?;
        let (_, th_p) = rotation_extremum(coeffs, mp, 1, Extremum::Max)?;
        let (_, th_s) = rotation_extremum(coeffs, ms, 1, Extremum::Min)?;
        let zp = sign_changes(&eigenfunction(coeffs, mp, th_p, 2048)?.1);
        let zs = sign_changes(&eigenfunction(coeffs, ms, th_s, 2048)?.1);
        pairs.push(EigenPair { k, mu_prime: mp, mu_second: ms, zeros_prime: zp, zeros_second: zs });
        start = ms;
    }
    Ok(HigherEigenvalues { mu0, pairs })
}

/// Zeros of `w = ℓ cos θ` on `[0, kT)` along the Prüfer solution from `θ₀`:
/// crossings of `θ = π/2 + jπ`, all upward since `θ' = 1/p > 0` there.
pub fn pruefer_zero_count(coeffs: &SturmLiouvilleCoeffs, mu: f64, theta0: f64, k: usize) -> Result<usize> {
    let th = pruefer_flow(coeffs, mu, theta0, k)?.theta;
    let idx = |x: f64| ((x - PI / 2.0) / PI).floor() as i64;
    Ok((idx(th) - idx(theta0)).max(0) as usize)
}

/// Sign changes of `w` along the planar solution from `θ₀` over `k` periods,
/// counted on `n` samples per period.
pub fn planar_zero_count(coeffs: &SturmLiouvilleCoeffs, mu: f64, theta0: f64, k: usize, n: usize) -> Result<usize> {
    let t_end = k as f64 * coeffs.period;
    let traj = run_dense(coeffs, mu, Mode::Planar, t_end, [theta0.cos(), -theta0.sin()])?;
    let total = n * k;
    let mut prev = traj.eval(0.0)[2];
    let mut count = 0;
    for i in 1..=total {
        let v = traj.eval(t_end * i as f64 / total as f64)[2];
        if (v > 0.0) != (prev > 0.0) {
            count += 1;
        }
        prev = v;
    }
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_rotation() {
        let c = SturmLiouvilleCoeffs::constant(2.0 * PI, 0.0).unwrap();
        let r = pruefer_flow(&c, 1.0, 0.3, 1).unwrap();
        assert!((r.theta - 0.3 - 2.0 * PI).abs() < 1e-9);
        assert!((r.ell - 1.0).abs() < 1e-9);
        assert_eq!(pruefer_flow(&c, 0.0, 0.0, 1).unwrap().theta, 0.0);
    }

    #[test]
    fn gap_examples() {
        let c = SturmLiouvilleCoeffs::constant(2.0 * PI, 0.0).unwrap();
        assert!(rotation_gap(&c, 0.0).unwrap().abs() < 1e-12);
        assert!((rotation_gap(&c, 1.0).unwrap() - 2.0 * PI).abs() < 1e-9);
    }

    #[test]
    fn constant_shift() {
        for q in [-2.0, 0.0, 3.0] {
            let c = SturmLiouvilleCoeffs::constant(2.0 * PI, q).unwrap();
            let r = principal_eigenvalue(&c).unwrap();
            assert!((r.mu0 + q).abs() < 1e-8, "{q} {}", r.mu0);
            assert_eq!(r.zeros, 0);
            assert!(r.w.iter().all(|v| *v > 0.0));
        }
    }

    #[test]
    fn rotation_stays_zero_for_critical_free_case() {
        let c = SturmLiouvilleCoeffs::constant(1.0, 0.0).unwrap();
        for k in 1..4 {
            assert_eq!(rotation_over(&c, 0.0, k, 0.0).unwrap(), 0.0);
        }
    }
}
