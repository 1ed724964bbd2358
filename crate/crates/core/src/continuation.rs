//! Branches of harmonic orbits in λ and the λ → ∞ diagnostics.
//!
//! `trace_branch` runs pseudo-arclength continuation on the shooting chain
//! with the node states and λ as unknowns. The node count is fixed for the
//! whole trace (chosen for the largest λ in range) so the unknown vector keeps
//! its meaning from step to step.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent when a dependent links std
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{Lu, Matrix};
use crate::model::{phi_inv, phi_inv_prime, Problem};
use crate::periodic::{
    self, build_orbit, chain_matrix, chain_residual, find_two_solutions, node_times, shoot_nodes, OrbitClass,
    PeriodicOrbit, SearchWindow, ShootingConfig,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchConfig {
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// `+1` to start towards larger λ, `-1` towards smaller.
    pub direction: f64,
    pub initial_step: f64,
    pub min_step: f64,
    pub max_step: f64,
    pub max_steps: usize,
    pub max_corrector_iter: usize,
    /// Fold λ is refined until the bracket is this small relative to λ.
    pub fold_tol: f64,
    pub reverify_every: usize,
    pub shooting: ShootingConfig,
}

impl Default for BranchConfig {
    fn default() -> Self {
        BranchConfig {
            lambda_min: 1e-3,
            lambda_max: 30.0,
            direction: -1.0,
            initial_step: 0.05,
            min_step: 1e-7,
            max_step: 0.5,
            max_steps: 5000,
            max_corrector_iter: 8,
            fold_tol: 1e-6,
            reverify_every: 10,
            shooting: ShootingConfig::default(),
        }
    }
}

impl BranchConfig {
    pub fn validate(&self) -> Result<()> {
        self.shooting.validate()?;
        if !(self.lambda_min > 0.0 && self.lambda_max > self.lambda_min) {
            return Err(Error::invalid("branch needs 0 < lambda_min < lambda_max"));
        }
        if !(self.direction == 1.0 || self.direction == -1.0) {
            return Err(Error::invalid("direction must be +1 or -1"));
        }
        if !(self.min_step > 0.0 && self.initial_step >= self.min_step && self.max_step >= self.initial_step) {
            return Err(Error::invalid("need 0 < min_step <= initial_step <= max_step"));
        }
        if !(self.fold_tol > 0.0) || self.max_steps == 0 || self.max_corrector_iter == 0 || self.reverify_every == 0 {
            return Err(Error::invalid("fold_tol, max_steps, max_corrector_iter and reverify_every must be positive"));
        }
        Ok(())
    }

    /// Largest admissible distance between consecutive points in
    /// `(λ, nodes)` space.
    pub fn step_bound(&self) -> f64 {
        1.5 * self.max_step
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchPoint {
    pub lambda: f64,
    pub x0: [f64; 2],
    pub nodes: Vec<[f64; 2]>,
    pub sup_norm: f64,
    pub class: OrbitClass,
    pub residual: f64,
    /// Folds passed before this point; `0` on the starting arm.
    pub arm: usize,
    pub fold: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fold {
    pub lambda: f64,
    pub x0: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    LambdaBound,
    MaxSteps,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub points: Vec<BranchPoint>,
    pub folds: Vec<Fold>,
    pub steps: Vec<f64>,
    pub node_times: Vec<f64>,
    pub step_bound: f64,
    pub reverified: usize,
    pub termination: Termination,
}

impl Branch {
    /// Sup norm on the given arm at `lambda`, interpolated linearly between
    /// neighbouring points; `None` outside the arm's λ range.
    pub fn sup_at(&self, lambda: f64, arm: usize) -> Option<f64> {
        let pts: Vec<&BranchPoint> = self.points.iter().filter(|p| p.arm == arm).collect();
        for w in pts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let (lo, hi) = if a.lambda <= b.lambda { (a, b) } else { (b, a) };
            if lambda >= lo.lambda && lambda <= hi.lambda {
                if hi.lambda == lo.lambda {
                    return Some(lo.sup_norm);
                }
                let s = (lambda - lo.lambda) / (hi.lambda - lo.lambda);
                return Some(lo.sup_norm + s * (hi.sup_norm - lo.sup_norm));
            }
        }
        None
    }

    /// Largest distance between consecutive points in `(λ, x₀)`.
    pub fn max_gap(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| {
                let d = [w[1].lambda - w[0].lambda, w[1].x0[0] - w[0].x0[0], w[1].x0[1] - w[0].x0[1]];
                d.iter().map(|v| v * v).sum::<f64>().sqrt()
            })
            .fold(0.0, f64::max)
    }
}

fn to_vec(nodes: &[[f64; 2]], lambda: f64) -> Vec<f64> {
    let mut z = Vec::with_capacity(2 * nodes.len() + 1);
    for x in nodes {
        z.push(x[0]);
        z.push(x[1]);
    }
    z.push(lambda);
    z
}

fn nodes_of(z: &[f64]) -> Vec<[f64; 2]> {
    z[..z.len() - 1].chunks(2).map(|c| [c[0], c[1]]).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

struct Chain<'a> {
    problem: &'a Problem,
    times: Vec<f64>,
    cfg: ShootingConfig,
}

impl Chain<'_> {
    fn residual(&self, z: &[f64]) -> Result<Vec<f64>> {
        let lambda = z[z.len() - 1];
        if !(lambda > 0.0) {
            return Err(Error::invalid("lambda left the positive axis"));
        }
        let p = self.problem.with_lambda(lambda);
        Ok(chain_residual(&p, &self.times, &nodes_of(z), &self.cfg, false)?.0)
    }

    /// Residual and the `(n+1)×(n+1)` matrix whose first `n` rows are the
    /// Jacobian in `(nodes, λ)`; the last row is left for the caller.
    fn linearize(&self, z: &[f64]) -> Result<(Vec<f64>, Matrix)> {
        let n = z.len() - 1;
        let lambda = z[n];
        if !(lambda > 0.0) {
            return Err(Error::invalid("lambda left the positive axis"));
        }
        let nodes = nodes_of(z);
        let p = self.problem.with_lambda(lambda);
        let (r, jacs) = chain_residual(&p, &self.times, &nodes, &self.cfg, true)?;
        let mut a = chain_matrix(&jacs, 1);
        let d = 1e-5 * lambda.max(1e-3);
        let rp = chain_residual(&self.problem.with_lambda(lambda + d), &self.times, &nodes, &self.cfg, false)?.0;
        let rm = chain_residual(&self.problem.with_lambda(lambda - d), &self.times, &nodes, &self.cfg, false)?.0;
        for i in 0..n {
            a.set(i, n, (rp[i] - rm[i]) / (2.0 * d));
        }
        Ok((r, a))
    }

    fn tangent(&self, z: &[f64], prev: &[f64]) -> Result<Vec<f64>> {
        let n = z.len() - 1;
        let (_, mut a) = self.linearize(z)?;
        for j in 0..=n {
            a.set(n, j, prev[j]);
        }
        let lu = Lu::new(&a).ok_or(Error::SingularJacobian(f64::INFINITY))?;
        let mut rhs = vec![0.0; n + 1];
        rhs[n] = 1.0;
        let mut t = lu.solve(&rhs);
        let nt = norm2(&t);
        if !nt.is_finite() || nt == 0.0 {
            return Err(Error::SingularJacobian(f64::INFINITY));
        }
        let s = if dot(&t, prev) < 0.0 { -1.0 } else { 1.0 };
        for v in &mut t {
            *v *= s / nt;
        }
        Ok(t)
    }

    /// Newton on `[G(z); τ·(z − z_pred)] = 0`.
    fn correct(&self, pred: &[f64], tau: &[f64], max_iter: usize) -> Result<(Vec<f64>, f64, usize)> {
        let n = pred.len() - 1;
        let mut z = pred.to_vec();
        let mut prev_dz = f64::INFINITY;
        for it in 0..max_iter {
            let (r, mut a) = self.linearize(&z)?;
            let rn = max_abs(&r);
            if it > 0 && rn <= self.cfg.newton_tol {
                return Ok((z, rn, it));
            }
            for j in 0..=n {
                a.set(n, j, tau[j]);
            }
            let lu = Lu::new(&a).ok_or(Error::SingularJacobian(f64::INFINITY))?;
            let mut rhs: Vec<f64> = r.iter().map(|v| -v).collect();
            let off: Vec<f64> = z.iter().zip(pred).map(|(a, b)| a - b).collect();
            rhs.push(-dot(tau, &off));
            let dz = lu.solve(&rhs);
            let ndz = max_abs(&dz);
            if !ndz.is_finite() || (it > 1 && ndz > prev_dz) {
                break;
            }
            prev_dz = ndz;
            for (zi, d) in z.iter_mut().zip(&dz) {
                *zi += d;
            }
        }
        let r = self.residual(&z)?;
        let rn = max_abs(&r);
        if rn <= self.cfg.newton_tol {
            return Ok((z, rn, max_iter));
        }
        Err(Error::NoConvergence { iterations: max_iter, residual: rn })
    }
}

fn make_point(chain: &Chain, z: &[f64], residual: f64, arm: usize, fold: bool) -> Result<BranchPoint> {
    let lambda = z[z.len() - 1];
    let p = chain.problem.with_lambda(lambda);
    let nodes = nodes_of(z);
    let orbit = build_orbit(&p, 1, &chain.times, nodes.clone(), residual, 0, &chain.cfg)?;
    Ok(BranchPoint {
        lambda,
        x0: nodes[0],
        nodes,
        sup_norm: orbit.sup_norm,
        class: orbit.class,
        residual,
        arm,
        fold,
    })
}

/// Pseudo-arclength continuation of a harmonic orbit in λ.
pub fn trace_branch(problem: &Problem, start: &PeriodicOrbit, cfg: &BranchConfig) -> Result<Branch> {
    cfg.validate()?;
    if start.k != 1 {
        return Err(Error::invalid("branches are traced for harmonic (k = 1) orbits"));
    }
    if !(start.lambda >= cfg.lambda_min && start.lambda <= cfg.lambda_max) {
        return Err(Error::invalid("start lambda outside the branch range"));
    }
    if start.class == OrbitClass::Trivial {
        return trivial_branch(problem, start, cfg);
    }
    let m = cfg.shooting.segments(&problem.with_lambda(cfg.lambda_max));
    let times = node_times(problem.period(), 1, m);
    let chain = Chain { problem, times: times.clone(), cfg: cfg.shooting };

    let nodes0: Vec<[f64; 2]> = times[..m].iter().map(|&t| start.state_at(t)).collect();
    let p0 = problem.with_lambda(start.lambda);
    let first = shoot_nodes(&p0, 1, nodes0, &cfg.shooting)?;
    let mut z = to_vec(&first.nodes, start.lambda);
    let mut e = vec![0.0; z.len()];
    *e.last_mut().unwrap() = cfg.direction;
    let mut tau = chain.tangent(&z, &e)?;
    if tau.last().unwrap() * cfg.direction < 0.0 {
        tau.iter_mut().for_each(|v| *v = -*v);
    }

    let mut arm = 0;
    let mut points = vec![make_point(&chain, &z, first.residual, arm, false)?];
    let mut folds = Vec::new();
    let mut steps = Vec::new();
    let mut reverified = 0;
    let mut h = cfg.initial_step;
    let lam_idx = z.len() - 1;
    let mut termination = Termination::MaxSteps;

    'outer: for step in 1..=cfg.max_steps {
        let (z_new, res, iters, tau_new) = loop {
            if h < cfg.min_step {
                return Err(Error::CorrectorDivergence { lambda: z[lam_idx], x0: [z[0], z[1]] });
            }
            let pred: Vec<f64> = z.iter().zip(&tau).map(|(a, b)| a + h * b).collect();
            let attempt = chain.correct(&pred, &tau, cfg.max_corrector_iter).and_then(|(zn, res, it)| {
                let t = chain.tangent(&zn, &tau)?;
                Ok((zn, res, it, t))
            });
            match attempt {
                Ok((zn, res, it, t)) => {
                    let dist = norm2(&zn.iter().zip(&z).map(|(a, b)| a - b).collect::<Vec<_>>());
                    if dist <= 1.25 * h && dot(&t, &tau) > 0.9 {
                        break (zn, res, it, t);
                    }
                    h *= 0.5;
                }
                Err(_) => h *= 0.5,
            }
        };
        let lam_new = z_new[lam_idx];
        if lam_new > cfg.lambda_max || lam_new < cfg.lambda_min {
            let bound = if lam_new > cfg.lambda_max { cfg.lambda_max } else { cfg.lambda_min };
            let s = (bound - z[lam_idx]) / (lam_new - z[lam_idx]);
            let guess: Vec<f64> = z.iter().zip(&z_new).map(|(a, b)| a + s * (b - a)).collect();
            let orbit = shoot_nodes(&problem.with_lambda(bound), 1, nodes_of(&guess), &cfg.shooting)?;
            let zb = to_vec(&orbit.nodes, bound);
            points.push(make_point(&chain, &zb, orbit.residual, arm, false)?);
            steps.push(s * h);
            termination = Termination::LambdaBound;
            break 'outer;
        }
        if tau_new[lam_idx] * tau[lam_idx] < 0.0 {
            let (zf, rf) = refine_fold(&chain, &z, &tau, h, cfg)?;
            folds.push(Fold { lambda: zf[lam_idx], x0: [zf[0], zf[1]] });
            points.push(make_point(&chain, &zf, rf, arm, true)?);
            arm += 1;
        }
        z = z_new;
        tau = tau_new;
        steps.push(h);
        points.push(make_point(&chain, &z, res, arm, false)?);
        if step % cfg.reverify_every == 0 {
            let p = problem.with_lambda(z[lam_idx]);
            let nodes = nodes_of(&z);
            let check = shoot_nodes(&p, 1, nodes.clone(), &cfg.shooting)
                .map_err(|_| Error::CorrectorDivergence { lambda: z[lam_idx], x0: [z[0], z[1]] })?;
            let drift = check
                .nodes
                .iter()
                .zip(&nodes)
                .fold(0.0f64, |m, (a, b)| m.max((a[0] - b[0]).abs()).max((a[1] - b[1]).abs()));
            if drift > 1e-6 {
                return Err(Error::CorrectorDivergence { lambda: z[lam_idx], x0: [z[0], z[1]] });
            }
            reverified += 1;
        }
        if iters <= 3 {
            h = (1.3 * h).min(cfg.max_step);
        } else if iters >= 6 {
            h *= 0.7;
        }
    }
    Ok(Branch { points, folds, steps, node_times: times[..m].to_vec(), step_bound: cfg.step_bound(), reverified, termination })
}

/// Bisection in arclength for the point where the λ-component of the
/// tangent vanishes, starting from the last point before the fold.
fn refine_fold(chain: &Chain, z: &[f64], tau: &[f64], h: f64, cfg: &BranchConfig) -> Result<(Vec<f64>, f64)> {
    let li = z.len() - 1;
    let sign0 = tau[li].signum();
    let (mut lo, mut hi) = (0.0, h);
    let mut lam_lo = z[li];
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut lam_hi = f64::NAN;
    for _ in 0..60 {
        let s = 0.5 * (lo + hi);
        let pred: Vec<f64> = z.iter().zip(tau).map(|(a, b)| a + s * b).collect();
        let (zs, rs, _) = chain.correct(&pred, tau, cfg.max_corrector_iter)?;
        let ts = chain.tangent(&zs, tau)?;
        let lam = zs[li];
        if ts[li].signum() == sign0 {
            lo = s;
            lam_lo = lam;
        } else {
            hi = s;
            lam_hi = lam;
        }
        best = Some((zs, rs));
        if (lam_hi - lam_lo).abs() <= cfg.fold_tol * lam.abs() * 0.1 && hi - lo <= 1e-4 {
            break;
        }
    }
    best.ok_or(Error::BracketFailure)
}

fn trivial_branch(problem: &Problem, start: &PeriodicOrbit, cfg: &BranchConfig) -> Result<Branch> {
    let m = start.nodes.len();
    let times = node_times(problem.period(), 1, m);
    let nodes = vec![[0.0, 0.0]; m];
    let mut points = Vec::new();
    let mut steps = Vec::new();
    let mut lambda = start.lambda;
    let mut termination = Termination::MaxSteps;
    for _ in 0..=cfg.max_steps {
        let p = problem.with_lambda(lambda);
        let (r, _) = chain_residual(&p, &times, &nodes, &cfg.shooting, false)?;
        let residual = max_abs(&r);
        if residual > cfg.shooting.newton_tol {
            return Err(Error::CorrectorDivergence { lambda, x0: [0.0, 0.0] });
        }
        points.push(BranchPoint {
            lambda,
            x0: [0.0, 0.0],
            nodes: nodes.clone(),
            sup_norm: 0.0,
            class: OrbitClass::Trivial,
            residual,
            arm: 0,
            fold: false,
        });
        let next = lambda + cfg.direction * cfg.max_step;
        if next > cfg.lambda_max || next < cfg.lambda_min {
            let bound = if next > cfg.lambda_max { cfg.lambda_max } else { cfg.lambda_min };
            if bound != lambda {
                steps.push((bound - lambda).abs());
                points.push(BranchPoint { lambda: bound, ..points.last().unwrap().clone() });
            }
            termination = Termination::LambdaBound;
            break;
        }
        steps.push(cfg.max_step);
        lambda = next;
    }
    Ok(Branch {
        points,
        folds: Vec::new(),
        steps,
        node_times: times[..m].to_vec(),
        step_bound: cfg.step_bound(),
        reverified: 0,
        termination,
    })
}

/// Traces the branch through `start` both ways inside
/// `[lambda_min, lambda_max]` and joins the two halves, so a branch that
/// folds back comes out as one connected curve ordered by arclength.
pub fn wishbone(problem: &Problem, start: &PeriodicOrbit, cfg: &BranchConfig) -> Result<Branch> {
    let up = trace_branch(problem, start, &BranchConfig { direction: 1.0, ..*cfg })?;
    let down = trace_branch(problem, start, &BranchConfig { direction: -1.0, ..*cfg })?;
    let up_folds = up.folds.len();
    let mut points: Vec<BranchPoint> = up
        .points
        .iter()
        .rev()
        .map(|p| BranchPoint { arm: up_folds - p.arm, ..p.clone() })
        .collect();
    points.extend(down.points.into_iter().skip(1).map(|p| BranchPoint { arm: p.arm + up_folds, ..p }));
    let mut folds: Vec<Fold> = up.folds.iter().rev().copied().collect();
    folds.extend(down.folds);
    let mut steps: Vec<f64> = up.steps.iter().rev().copied().collect();
    steps.extend(down.steps);
    Ok(Branch {
        points,
        folds,
        steps,
        node_times: down.node_times,
        step_bound: cfg.step_bound(),
        reverified: up.reverified + down.reverified,
        termination: down.termination,
    })
}

// ---------------------------------------------------------------------------
// asymptotics

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticConfig {
    pub shooting: ShootingConfig,
    pub window: SearchWindow,
    /// Largest ratio between consecutive warm-start λ values.
    pub max_ratio: f64,
    pub band_half_width: f64,
    pub histogram_bins: usize,
    /// Flat segments count as "at positive height" when their minimum
    /// exceeds this fraction of the profile's sup.
    pub flat_height_fraction: f64,
}

impl Default for AsymptoticConfig {
    fn default() -> Self {
        AsymptoticConfig {
            shooting: ShootingConfig::default(),
            window: SearchWindow::default(),
            max_ratio: 2.0,
            band_half_width: 0.05,
            histogram_bins: 40,
            flat_height_fraction: 0.1,
        }
    }
}

impl AsymptoticConfig {
    pub fn validate(&self) -> Result<()> {
        self.shooting.validate()?;
        self.window.validate()?;
        if !(self.max_ratio > 1.0) {
            return Err(Error::invalid("max_ratio must exceed 1"));
        }
        if !(self.band_half_width > 0.0 && self.band_half_width < 0.25) {
            return Err(Error::invalid("band half-width must lie in (0, 0.25)"));
        }
        if self.histogram_bins == 0 || !(self.flat_height_fraction > 0.0 && self.flat_height_fraction < 1.0) {
            return Err(Error::invalid("histogram_bins must be positive and flat_height_fraction in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Band {
    Down,
    Flat,
    Up,
}

impl Band {
    pub fn slope(self) -> f64 {
        match self {
            Band::Down => -1.0,
            Band::Flat => 0.0,
            Band::Up => 1.0,
        }
    }

    pub fn classify(up: f64, half_width: f64) -> Option<Band> {
        if up.abs() <= half_width {
            Some(Band::Flat)
        } else if (up - 1.0).abs() <= half_width {
            Some(Band::Up)
        } else if (up + 1.0).abs() <= half_width {
            Some(Band::Down)
        } else {
            None
        }
    }
}

/// Maximal run of samples sharing a band; `band = None` marks a transition
/// layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub t_start: f64,
    pub t_end: f64,
    pub band: Option<Band>,
    pub min_u: f64,
    pub max_u: f64,
}

impl Segment {
    pub fn length(&self) -> f64 {
        self.t_end - self.t_start
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticEntry {
    pub lambda: f64,
    pub sup_norm: f64,
    /// `λ^{1/p}‖u‖∞`.
    pub scaled_norm: f64,
    /// `max |u''|/|a|` over samples with `a ≠ 0`.
    pub curvature_ratio: f64,
    pub histogram: Vec<f64>,
    pub band_fraction_0: f64,
    pub band_fraction_pm1: f64,
    /// `W^{1,1}` distance to the previous entry's profile, divided by `T`.
    pub w11_distance: Option<f64>,
}

impl AsymptoticEntry {
    pub fn band_fraction(&self) -> f64 {
        self.band_fraction_0 + self.band_fraction_pm1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitProfile {
    pub lambda: f64,
    pub t: Vec<f64>,
    pub u: Vec<f64>,
    pub u_prime: Vec<f64>,
    pub segments: Vec<Segment>,
    /// Fraction of samples inside one of the three bands.
    pub coverage: f64,
}

impl LimitProfile {
    /// Segments with slope band 0 whose minimum is above
    /// `height_fraction · sup u`.
    pub fn flat_segments(&self, height_fraction: f64) -> Vec<Segment> {
        let sup = self.u.iter().fold(0.0f64, |m, v| m.max(*v));
        self.segments
            .iter()
            .filter(|s| s.band == Some(Band::Flat) && s.min_u > height_fraction * sup)
            .copied()
            .collect()
    }

    /// Measure of `[a, b]` covered by the given segments.
    pub fn covered(segments: &[Segment], a: f64, b: f64) -> f64 {
        segments.iter().map(|s| (s.t_end.min(b) - s.t_start.max(a)).max(0.0)).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticReport {
    pub schedule: Vec<f64>,
    pub entries: Vec<AsymptoticEntry>,
    /// Running sup of the scaled norm over schedule prefixes.
    pub s_p: Vec<f64>,
    pub limit: LimitProfile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Small,
    Large,
}

/// Re-converges `orbit` at `target` through geometric λ substeps.
pub fn warm_start(problem: &Problem, orbit: &PeriodicOrbit, target: f64, cfg: &AsymptoticConfig) -> Result<PeriodicOrbit> {
    let mut cur = orbit.clone();
    let mut ratio = cfg.max_ratio;
    while cur.lambda != target {
        let up = target > cur.lambda;
        let next = if up { (cur.lambda * ratio).min(target) } else { (cur.lambda / ratio).max(target) };
        let attempt = periodic::continue_orbit(&problem.with_lambda(next), &cur, &cfg.shooting);
        match attempt {
            Ok(o) if o.class != OrbitClass::Trivial && (o.sup_norm - cur.sup_norm).abs() <= 0.5 * cur.sup_norm => {
                cur = o;
                ratio = (ratio * ratio).min(cfg.max_ratio);
            }
            _ => {
                ratio = ratio.sqrt();
                if ratio < 1.0 + 1e-4 {
                    return Err(Error::BranchLost(next));
                }
            }
        }
    }
    Ok(cur)
}

fn pick(orbits: Vec<PeriodicOrbit>, family: Family) -> Option<PeriodicOrbit> {
    match family {
        Family::Small => orbits.into_iter().next(),
        Family::Large => orbits.into_iter().last(),
    }
}

/// Follows one family along the schedule. The first orbit comes from the
/// multi-start search at the earliest schedule λ where it succeeds; earlier
/// entries are then reached by warm starts going down.
pub fn follow_family(problem: &Problem, schedule: &[f64], family: Family, cfg: &AsymptoticConfig) -> Result<Vec<PeriodicOrbit>> {
    cfg.validate()?;
    if schedule.is_empty() || schedule.iter().any(|l| !(*l > 0.0)) || schedule.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("schedule must be positive and increasing"));
    }
    let mut anchor = None;
    for (i, &l) in schedule.iter().enumerate() {
        let found = find_two_solutions(&problem.with_lambda(l), &cfg.window, &cfg.shooting)?;
        // a lone orbit is only trusted as the large one
        let usable = found.len() >= 2 || (family == Family::Large && !found.is_empty());
        if usable {
            anchor = Some((i, pick(found, family).unwrap()));
            break;
        }
    }
    let (i0, first) = anchor.ok_or(Error::BranchLost(schedule[0]))?;
    let mut out = vec![first.clone(); schedule.len()];
    let mut cur = first.clone();
    for i in (0..i0).rev() {
        cur = warm_start(problem, &cur, schedule[i], cfg)?;
        out[i] = cur.clone();
    }
    cur = first;
    for i in i0 + 1..schedule.len() {
        cur = warm_start(problem, &cur, schedule[i], cfg)?;
        out[i] = cur.clone();
    }
    Ok(out)
}

fn entry(problem: &Problem, orbit: &PeriodicOrbit, prev: Option<&PeriodicOrbit>, cfg: &AsymptoticConfig) -> AsymptoticEntry {
    let p = problem.with_lambda(orbit.lambda);
    let exponent = problem.g.exponent();
    let n = orbit.samples.len() as f64;
    let bins = cfg.histogram_bins;
    let mut histogram = vec![0.0; bins];
    let (mut f0, mut f1) = (0.0, 0.0);
    let mut ratio: f64 = 0.0;
    for s in &orbit.samples {
        let up = s.u_prime();
        let b = (((up + 1.0) * 0.5 * bins as f64).floor() as usize).min(bins - 1);
        histogram[b] += 1.0 / n;
        match Band::classify(up, cfg.band_half_width) {
            Some(Band::Flat) => f0 += 1.0 / n,
            Some(_) => f1 += 1.0 / n,
            None => {}
        }
        if p.weight.eval(s.t) != 0.0 && s.x1 > 0.0 {
            // u'' = −(φ⁻¹)'(x₂)·λ a g(u)
            ratio = ratio.max(phi_inv_prime(s.x2) * p.lambda * p.g.g(s.x1));
        }
    }
    AsymptoticEntry {
        lambda: orbit.lambda,
        sup_norm: orbit.sup_norm,
        scaled_norm: orbit.lambda.powf(1.0 / exponent) * orbit.sup_norm,
        curvature_ratio: ratio,
        histogram,
        band_fraction_0: f0,
        band_fraction_pm1: f1,
        w11_distance: prev.map(|q| w11_distance(orbit, q)),
    }
}

/// `(1/T)∫₀ᵀ |u − v| + |u' − v'|` on the first orbit's sample grid.
pub fn w11_distance(a: &PeriodicOrbit, b: &PeriodicOrbit) -> f64 {
    let n = a.samples.len() as f64;
    a.samples
        .iter()
        .map(|s| {
            let y = b.state_at(s.t);
            (s.x1 - y[0]).abs() + (s.u_prime() - phi_inv(y[1])).abs()
        })
        .sum::<f64>()
        / n
}

pub fn limit_profile(orbit: &PeriodicOrbit, half_width: f64) -> LimitProfile {
    let t: Vec<f64> = orbit.samples.iter().map(|s| s.t).collect();
    let u: Vec<f64> = orbit.samples.iter().map(|s| s.x1).collect();
    let u_prime: Vec<f64> = orbit.samples.iter().map(|s| s.u_prime()).collect();
    let n = t.len();
    let dt = orbit.span() / n as f64;
    let labels: Vec<Option<Band>> = u_prime.iter().map(|&v| Band::classify(v, half_width)).collect();
    let coverage = labels.iter().filter(|l| l.is_some()).count() as f64 / n as f64;
    let mut segments = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        let (mut lo, mut hi) = (u[i], u[i]);
        while j + 1 < n && labels[j + 1] == labels[i] {
            j += 1;
            lo = lo.min(u[j]);
            hi = hi.max(u[j]);
        }
        segments.push(Segment { t_start: t[i], t_end: t[j] + dt, band: labels[i], min_u: lo, max_u: hi });
        i = j + 1;
    }
    LimitProfile { lambda: orbit.lambda, t, u, u_prime, segments, coverage }
}

fn report(problem: &Problem, orbits: &[PeriodicOrbit], cfg: &AsymptoticConfig) -> AsymptoticReport {
    let mut entries = Vec::with_capacity(orbits.len());
    for (i, o) in orbits.iter().enumerate() {
        entries.push(entry(problem, o, if i > 0 { Some(&orbits[i - 1]) } else { None }, cfg));
    }
    let mut s_p = Vec::with_capacity(entries.len());
    let mut run: f64 = 0.0;
    for e in &entries {
        run = run.max(e.scaled_norm);
        s_p.push(run);
    }
    AsymptoticReport {
        schedule: orbits.iter().map(|o| o.lambda).collect(),
        entries,
        s_p,
        limit: limit_profile(orbits.last().unwrap(), cfg.band_half_width),
    }
}

/// Small-family diagnostics; the schedule has to span at least three decades.
pub fn asymptotic_small(problem: &Problem, schedule: &[f64], cfg: &AsymptoticConfig) -> Result<AsymptoticReport> {
    if let (Some(a), Some(b)) = (schedule.first(), schedule.last()) {
        if !(b / a >= 1e3) {
            return Err(Error::invalid("small-family schedule must span at least three decades"));
        }
    }
    let orbits = follow_family(problem, schedule, Family::Small, cfg)?;
    Ok(report(problem, &orbits, cfg))
}

pub fn asymptotic_large(problem: &Problem, schedule: &[f64], cfg: &AsymptoticConfig) -> Result<AsymptoticReport> {
    let orbits = follow_family(problem, schedule, Family::Large, cfg)?;
    Ok(report(problem, &orbits, cfg))
}
