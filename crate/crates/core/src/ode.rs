//! Dormand–Prince 5(4) with Hairer's quartic dense output, forced step
//! endpoints at weight discontinuities, and the planar system with its
//! variational equations.

use alloc::vec::Vec;

#[allow(unused_imports)] // inherent when a dependent links std
use num_traits::Float;

use crate::error::{Error, Result};
use crate::model::{phi_inv, phi_inv_prime, Problem};

/// `(x1, x2) = (u, φ(u'))`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlanarState {
    pub x1: f64,
    pub x2: f64,
}

impl PlanarState {
    pub const ORIGIN: PlanarState = PlanarState { x1: 0.0, x2: 0.0 };

    pub fn new(x1: f64, x2: f64) -> Self {
        PlanarState { x1, x2 }
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.x1, self.x2]
    }

    /// `u' = φ⁻¹(x2)`.
    pub fn u_prime(self) -> f64 {
        phi_inv(self.x2)
    }
}

impl From<[f64; 2]> for PlanarState {
    fn from(a: [f64; 2]) -> Self {
        PlanarState { x1: a[0], x2: a[1] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    /// For λ > 10³ cap steps at `T/(50√λ)` where `a > 0`.
    pub lambda_aware_cap: bool,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rel_tol: 1e-11,
            abs_tol: 1e-12,
            max_step: f64::INFINITY,
            lambda_aware_cap: true,
            max_steps: 5_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0 && self.max_step > 0.0) {
            return Err(Error::invalid("integrator tolerances and max_step must be > 0"));
        }
        Ok(())
    }

    /// Both tolerances multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        IntegratorConfig { rel_tol: self.rel_tol * factor, abs_tol: self.abs_tol * factor, ..*self }
    }
}

/// A vector field that is smooth between forced mesh points.
pub trait Field<const N: usize> {
    /// Right-hand side on the smooth piece containing `anchor`.
    fn eval(&self, t: f64, anchor: f64, y: &[f64; N]) -> [f64; N];

    /// Discontinuity times strictly between `t0` and `t1`, ordered along the
    /// direction of integration.
    fn breaks_between(&self, _t0: f64, _t1: f64, out: &mut Vec<f64>) {
        out.clear();
    }

    /// Additional step-size cap at `t`; consulted only when the config asks
    /// for the λ-aware cap.
    fn step_cap(&self, _t: f64, _anchor: f64) -> f64 {
        f64::INFINITY
    }
}

// Dormand–Prince coefficients
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// One accepted step with its interpolation polynomial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenseStep<const N: usize> {
    pub t0: f64,
    pub h: f64,
    pub anchor: f64,
    r: [[f64; N]; 5],
}

impl<const N: usize> DenseStep<N> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn start(&self) -> [f64; N] {
        self.r[0]
    }

    pub fn end(&self) -> [f64; N] {
        let mut y = self.r[0];
        for i in 0..N {
            y[i] += self.r[1][i];
        }
        y
    }

    pub fn eval(&self, t: f64) -> [f64; N] {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let mut y = [0.0; N];
        for i in 0..N {
            let r = &self.r;
            y[i] = r[0][i] + th * (r[1][i] + th1 * (r[2][i] + th * (r[3][i] + th1 * r[4][i])));
        }
        y
    }

    pub fn deriv(&self, t: f64) -> [f64; N] {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let mut d = [0.0; N];
        for i in 0..N {
            let r = &self.r;
            let a = r[3][i] + th1 * r[4][i];
            let da = -r[4][i];
            let b = r[2][i] + th * a;
            let db = a + th * da;
            let c = r[1][i] + th1 * b;
            let dc = -b + th1 * db;
            d[i] = (c + th * dc) / self.h;
        }
        d
    }
}

/// Dense solution over `[t_start, t_end]` (forward in time).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<const N: usize> {
    pub steps: Vec<DenseStep<N>>,
}

impl<const N: usize> Trajectory<N> {
    pub fn t_start(&self) -> f64 {
        self.steps.first().map_or(0.0, |s| s.t0)
    }

    pub fn t_end(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.t1())
    }

    pub fn end_state(&self) -> [f64; N] {
        self.steps.last().map(|s| s.end()).unwrap_or([0.0; N])
    }

    /// Step endpoint times, strictly increasing.
    pub fn times(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.steps.iter().map(|s| s.t0).collect();
        if let Some(s) = self.steps.last() {
            v.push(s.t1());
        }
        v
    }

    fn locate(&self, t: f64) -> usize {
        let n = self.steps.len();
        let i = self.steps.partition_point(|s| s.t0 <= t);
        i.saturating_sub(1).min(n - 1)
    }

    pub fn step_at(&self, t: f64) -> &DenseStep<N> {
        &self.steps[self.locate(t)]
    }

    pub fn eval(&self, t: f64) -> [f64; N] {
        self.step_at(t).eval(t)
    }

    pub fn deriv(&self, t: f64) -> [f64; N] {
        self.step_at(t).deriv(t)
    }

    /// Appends another trajectory that starts where this one ends.
    pub fn append(&mut self, other: Trajectory<N>) {
        self.steps.extend(other.steps);
    }
}

fn err_norm<const N: usize>(e: &[f64; N], y0: &[f64; N], y1: &[f64; N], cfg: &IntegratorConfig) -> f64 {
    let mut s = 0.0;
    for i in 0..N {
        let sc = cfg.abs_tol + cfg.rel_tol * y0[i].abs().max(y1[i].abs());
        let r = e[i] / sc;
        s += r * r;
    }
    (s / N as f64).sqrt()
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for i in 0..N {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        out[i] += h * acc;
    }
    out
}

fn initial_step<F: Field<N>, const N: usize>(
    field: &F,
    t0: f64,
    y0: &[f64; N],
    f0: &[f64; N],
    anchor: f64,
    span: f64,
    cap: f64,
    cfg: &IntegratorConfig,
) -> f64 {
    let dir = span.signum();
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for i in 0..N {
        let sc = cfg.abs_tol + cfg.rel_tol * y0[i].abs();
        d0 += (y0[i] / sc) * (y0[i] / sc);
        d1 += (f0[i] / sc) * (f0[i] / sc);
    }
    d0 = (d0 / N as f64).sqrt();
    d1 = (d1 / N as f64).sqrt();
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(span.abs()).min(cap);
    let y1 = axpy(y0, dir * h0, &[(1.0, f0)]);
    let f1 = field.eval(t0 + dir * h0, anchor, &y1);
    let mut d2 = 0.0;
    for i in 0..N {
        let sc = cfg.abs_tol + cfg.rel_tol * y0[i].abs();
        let r = (f1[i] - f0[i]) / sc;
        d2 += r * r;
    }
    d2 = (d2 / N as f64).sqrt() / h0;
    let m = d1.max(d2);
    let h1 = if m <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / m).powf(0.2) };
    (100.0 * h0).min(h1).min(span.abs()).min(cap)
}

/// Integrates one smooth piece `[ta, tb]`.
fn integrate_piece<F: Field<N>, const N: usize>(
    field: &F,
    ta: f64,
    tb: f64,
    mut y: [f64; N],
    cfg: &IntegratorConfig,
    steps_taken: &mut usize,
    mut rec: Option<&mut Vec<DenseStep<N>>>,
) -> Result<[f64; N]> {
    if ta == tb {
        return Ok(y);
    }
    let anchor = 0.5 * (ta + tb);
    let dir = (tb - ta).signum();
    let cap_at = |t: f64| {
        let c = if cfg.lambda_aware_cap { field.step_cap(t, anchor) } else { f64::INFINITY };
        c.min(cfg.max_step)
    };
    let mut t = ta;
    let mut k1 = field.eval(t, anchor, &y);
    let mut h = dir * initial_step(field, t, &y, &k1, anchor, tb - ta, cap_at(t), cfg);
    let mut rejected_last = false;
    loop {
        *steps_taken += 1;
        if *steps_taken > cfg.max_steps {
            return Err(Error::StepSizeUnderflow { t });
        }
        let cap = cap_at(t);
        if h.abs() > cap {
            h = dir * cap;
        }
        let remaining = tb - t;
        let mut last = false;
        if (h - remaining) * dir >= 0.0 || (remaining - h).abs() < 1e-2 * h.abs() {
            h = remaining;
            last = true;
        }
        if h.abs() < 1e-14 * t.abs().max(1.0) && !last {
            return Err(Error::StepSizeUnderflow { t });
        }
        let k2 = field.eval(t + C2 * h, anchor, &axpy(&y, h, &[(A21, &k1)]));
        let k3 = field.eval(t + C3 * h, anchor, &axpy(&y, h, &[(A31, &k1), (A32, &k2)]));
        let k4 = field.eval(t + C4 * h, anchor, &axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = field.eval(
            t + C5 * h,
            anchor,
            &axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let t_new = if last { tb } else { t + h };
        let k6 = field.eval(
            t_new,
            anchor,
            &axpy(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
        );
        let y_new = axpy(&y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let k7 = field.eval(t_new, anchor, &y_new);
        let mut e = [0.0; N];
        for i in 0..N {
            e[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let mut err = err_norm(&e, &y, &y_new, cfg);
        if !err.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
            err = f64::INFINITY;
        }
        if err <= 1.0 {
            if let Some(steps) = rec.as_deref_mut() {
                let mut r = [[0.0; N]; 5];
                for i in 0..N {
                    let ydiff = y_new[i] - y[i];
                    let bspl = h * k1[i] - ydiff;
                    r[0][i] = y[i];
                    r[1][i] = ydiff;
                    r[2][i] = bspl;
                    r[3][i] = ydiff - h * k7[i] - bspl;
                    r[4][i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
                }
                steps.push(DenseStep { t0: t, h: t_new - t, anchor, r });
            }
            y = y_new;
            k1 = k7;
            t = t_new;
            if last {
                return Ok(y);
            }
            let mut fac = 0.9 * err.max(1e-10).powf(-0.2);
            fac = fac.clamp(0.2, 5.0);
            if rejected_last {
                fac = fac.min(1.0);
            }
            h *= fac;
            rejected_last = false;
        } else {
            let fac = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.1, 0.9) } else { 0.1 };
            h *= fac;
            rejected_last = true;
        }
    }
}

fn run<F: Field<N>, const N: usize>(
    field: &F,
    t0: f64,
    t1: f64,
    y0: [f64; N],
    cfg: &IntegratorConfig,
    mut rec: Option<&mut Vec<DenseStep<N>>>,
) -> Result<[f64; N]> {
    cfg.validate()?;
    let mut breaks = Vec::new();
    field.breaks_between(t0, t1, &mut breaks);
    let mut y = y0;
    let mut ta = t0;
    let mut steps = 0usize;
    for &b in breaks.iter().chain(core::iter::once(&t1)) {
        y = integrate_piece(field, ta, b, y, cfg, &mut steps, rec.as_deref_mut())?;
        ta = b;
    }
    Ok(y)
}

/// Flow from `t0` to `t1` (either direction).
pub fn solve<F: Field<N>, const N: usize>(field: &F, t0: f64, t1: f64, y0: [f64; N], cfg: &IntegratorConfig) -> Result<[f64; N]> {
    run(field, t0, t1, y0, cfg, None)
}

/// Flow with dense output; requires `t1 > t0`.
pub fn solve_dense<F: Field<N>, const N: usize>(
    field: &F,
    t0: f64,
    t1: f64,
    y0: [f64; N],
    cfg: &IntegratorConfig,
) -> Result<Trajectory<N>> {
    if !(t1 > t0) {
        return Err(Error::invalid("dense integration needs t1 > t0"));
    }
    let mut steps = Vec::new();
    run(field, t0, t1, y0, cfg, Some(&mut steps))?;
    Ok(Trajectory { steps })
}

// ---------------------------------------------------------------------------
// the planar system

/// `x1' = φ⁻¹(x2)`, `x2' = −f_λ(t, x1)`.
#[derive(Debug, Clone, Copy)]
pub struct Planar<'a> {
    pub problem: &'a Problem,
}

/// λ-aware step cap shared by all fields built on a problem.
pub fn lambda_cap(problem: &Problem, t: f64, anchor: f64) -> f64 {
    if problem.lambda > 1e3 && problem.weight.eval_on_piece(t, anchor) > 0.0 {
        problem.period() / (50.0 * problem.lambda.sqrt())
    } else {
        f64::INFINITY
    }
}

impl Field<2> for Planar<'_> {
    #[inline]
    fn eval(&self, t: f64, anchor: f64, y: &[f64; 2]) -> [f64; 2] {
        [phi_inv(y[1]), -self.problem.force(t, anchor, y[0])]
    }
    fn breaks_between(&self, t0: f64, t1: f64, out: &mut Vec<f64>) {
        self.problem.weight.breaks_between(t0, t1, out);
    }
    fn step_cap(&self, t: f64, anchor: f64) -> f64 {
        lambda_cap(self.problem, t, anchor)
    }
}

/// Planar system plus the fundamental matrix `M' = A(t) M`, stored row-major
/// after the state.
#[derive(Debug, Clone, Copy)]
pub struct PlanarVariational<'a> {
    pub problem: &'a Problem,
}

impl Field<6> for PlanarVariational<'_> {
    #[inline]
    fn eval(&self, t: f64, anchor: f64, y: &[f64; 6]) -> [f64; 6] {
        let b = phi_inv_prime(y[1]);
        let c = self.problem.dforce(t, anchor, y[0]);
        [
            phi_inv(y[1]),
            -self.problem.force(t, anchor, y[0]),
            b * y[4],
            b * y[5],
            -c * y[2],
            -c * y[3],
        ]
    }
    fn breaks_between(&self, t0: f64, t1: f64, out: &mut Vec<f64>) {
        self.problem.weight.breaks_between(t0, t1, out);
    }
    fn step_cap(&self, t: f64, anchor: f64) -> f64 {
        lambda_cap(self.problem, t, anchor)
    }
}

/// Planar flow map over `[t0, t1]`.
pub fn flow(problem: &Problem, t0: f64, t1: f64, x: [f64; 2], cfg: &IntegratorConfig) -> Result<[f64; 2]> {
    solve(&Planar { problem }, t0, t1, x, cfg)
}

/// Planar flow map with its Jacobian `[[m11, m12], [m21, m22]]`.
pub fn flow_with_jacobian(
    problem: &Problem,
    t0: f64,
    t1: f64,
    x: [f64; 2],
    cfg: &IntegratorConfig,
) -> Result<([f64; 2], [[f64; 2]; 2])> {
    let y = solve(&PlanarVariational { problem }, t0, t1, [x[0], x[1], 1.0, 0.0, 0.0, 1.0], cfg)?;
    Ok(([y[0], y[1]], [[y[2], y[3]], [y[4], y[5]]]))
}

/// Dense planar trajectory.
pub fn integrate(problem: &Problem, t0: f64, t1: f64, x: [f64; 2], cfg: &IntegratorConfig) -> Result<Trajectory<2>> {
    solve_dense(&Planar { problem }, t0, t1, x, cfg)
}

/// `max |u'' + λ a(t) g(u) (1 − u'²)^{3/2}|` over step midpoints, with `u''`
/// taken from the derivative of the dense output.
pub fn second_derivative_residual(traj: &Trajectory<2>, problem: &Problem) -> f64 {
    let mut worst: f64 = 0.0;
    for s in &traj.steps {
        let tm = s.t0 + 0.5 * s.h;
        let x = s.eval(tm);
        let dx = s.deriv(tm);
        let w = phi_inv_prime(x[1]);
        let upp = w * dx[1];
        let rhs = w * problem.force(tm, s.anchor, x[0]);
        worst = worst.max((upp + rhs).abs());
    }
    worst
}
