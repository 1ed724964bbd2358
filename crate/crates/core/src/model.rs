//! Curvature operator, weights, nonlinearities, the extended force and the
//! a-priori constants that separate small from large solutions.

use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)] // inherent when a dependent links std
use num_traits::Float;

use crate::error::{Error, Result};

/// φ(ξ) = ξ / √(1 − ξ²) on ]−1, 1[.
pub fn phi(xi: f64) -> Result<f64> {
    if !(xi.abs() < 1.0) {
        return Err(Error::PhiDomain(xi));
    }
    Ok(xi / (1.0 - xi * xi).sqrt())
}

/// φ⁻¹(v) = v / √(1 + v²), defined on the whole line.
#[inline]
pub fn phi_inv(v: f64) -> f64 {
    v / (1.0 + v * v).sqrt()
}

/// φ'(ξ) = (1 − ξ²)^(−3/2).
pub fn phi_prime(xi: f64) -> Result<f64> {
    if !(xi.abs() < 1.0) {
        return Err(Error::PhiDomain(xi));
    }
    let s = 1.0 - xi * xi;
    Ok(1.0 / (s * s.sqrt()))
}

/// (φ⁻¹)'(v) = (1 + v²)^(−3/2).
#[inline]
pub fn phi_inv_prime(v: f64) -> f64 {
    let s = 1.0 + v * v;
    1.0 / (s * s.sqrt())
}

/// The Minkowski operator as a value, for callers that prefer method syntax.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CurvatureOperator;

impl CurvatureOperator {
    pub fn phi(&self, xi: f64) -> Result<f64> {
        phi(xi)
    }
    pub fn phi_inv(&self, v: f64) -> f64 {
        phi_inv(v)
    }
    pub fn phi_prime(&self, xi: f64) -> Result<f64> {
        phi_prime(xi)
    }
    pub fn phi_inv_prime(&self, v: f64) -> f64 {
        phi_inv_prime(v)
    }
}

// ---------------------------------------------------------------------------
// weights

#[derive(Debug, Clone, PartialEq)]
pub enum WeightForm {
    /// `amplitude · cos(2πt/T − phase) + offset`, which is
    /// `amplitude · cos(t − phase) + offset` when `T = 2π`.
    TrigShifted { amplitude: f64, phase: f64, offset: f64 },
    /// Right-continuous step function; `breakpoints` run from 0 to T and
    /// `values[i]` holds on `[breakpoints[i], breakpoints[i+1])`.
    PiecewiseConstant { breakpoints: Vec<f64>, values: Vec<f64> },
}

/// A `T`-periodic sign-changing weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Weight {
    period: f64,
    form: WeightForm,
    // cumulative integral at each breakpoint (piecewise form only)
    cumulative: Vec<f64>,
}

impl Weight {
    pub fn new(period: f64, form: WeightForm) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::invalid("weight period must be positive and finite"));
        }
        let (form, cumulative) = match form {
            WeightForm::TrigShifted { amplitude, phase, offset } => {
                if !(amplitude.is_finite() && phase.is_finite() && offset.is_finite()) {
                    return Err(Error::invalid("weight coefficients must be finite"));
                }
                (WeightForm::TrigShifted { amplitude, phase, offset }, Vec::new())
            }
            WeightForm::PiecewiseConstant { mut breakpoints, values } => {
                if breakpoints.first().is_none_or(|&b| b > 0.0) {
                    breakpoints.insert(0, 0.0);
                }
                if breakpoints.last().is_none_or(|&b| b < period) {
                    breakpoints.push(period);
                }
                if breakpoints[0] != 0.0 || *breakpoints.last().unwrap() != period {
                    return Err(Error::invalid("breakpoints must lie in [0, T]"));
                }
                if breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::invalid("breakpoints must be strictly increasing"));
                }
                if values.len() != breakpoints.len() - 1 {
                    return Err(Error::invalid("need exactly one value per weight segment"));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid("weight values must be finite"));
                }
                let mut cum = Vec::with_capacity(breakpoints.len());
                cum.push(0.0);
                for i in 0..values.len() {
                    let last = cum[i];
                    cum.push(last + values[i] * (breakpoints[i + 1] - breakpoints[i]));
                }
                (WeightForm::PiecewiseConstant { breakpoints, values }, cum)
            }
        };
        Ok(Weight { period, form, cumulative })
    }

    pub fn trig(period: f64, amplitude: f64, phase: f64, offset: f64) -> Result<Self> {
        Weight::new(period, WeightForm::TrigShifted { amplitude, phase, offset })
    }

    pub fn piecewise(period: f64, breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Weight::new(period, WeightForm::PiecewiseConstant { breakpoints, values })
    }

    /// The weight `cos(t − π/4) − √2/2` on `[0, 2π]`.
    pub fn fig1() -> Self {
        Weight::trig(2.0 * PI, 1.0, PI / 4.0, -core::f64::consts::FRAC_1_SQRT_2).unwrap()
    }

    /// `1` on `[0,1] ∪ [2,3]`, `0` on `[1,2]`, `−2` on `[3,10]`, period 10.
    pub fn fig4() -> Self {
        Weight::piecewise(10.0, alloc::vec![0.0, 1.0, 2.0, 3.0, 10.0], alloc::vec![1.0, 0.0, 1.0, -2.0])
            .unwrap()
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn form(&self) -> &WeightForm {
        &self.form
    }

    pub fn is_piecewise(&self) -> bool {
        matches!(self.form, WeightForm::PiecewiseConstant { .. })
    }

    fn omega(&self) -> f64 {
        2.0 * PI / self.period
    }

    fn reduce(&self, t: f64) -> f64 {
        let t_per = self.period;
        let mut s = t - t_per * (t / t_per).floor();
        if s >= t_per {
            s -= t_per;
        }
        if s < 0.0 {
            s = 0.0;
        }
        s
    }

    fn segment_of(&self, s: f64) -> usize {
        match &self.form {
            WeightForm::PiecewiseConstant { breakpoints, .. } => {
                let n = breakpoints.len() - 1;
                match breakpoints.binary_search_by(|b| b.partial_cmp(&s).unwrap()) {
                    Ok(i) => i.min(n - 1),
                    Err(i) => (i - 1).min(n - 1),
                }
            }
            WeightForm::TrigShifted { .. } => 0,
        }
    }

    /// Right-continuous value a(t).
    pub fn eval(&self, t: f64) -> f64 {
        match &self.form {
            WeightForm::TrigShifted { amplitude, phase, offset } => {
                amplitude * (self.omega() * t - phase).cos() + offset
            }
            WeightForm::PiecewiseConstant { values, .. } => values[self.segment_of(self.reduce(t))],
        }
    }

    /// a(t) on the smooth piece containing `anchor`. Integrators pass the
    /// midpoint of the current step so values at breakpoints are one-sided.
    #[inline]
    pub fn eval_on_piece(&self, t: f64, anchor: f64) -> f64 {
        match &self.form {
            WeightForm::TrigShifted { .. } => self.eval(t),
            WeightForm::PiecewiseConstant { .. } => self.eval(anchor),
        }
    }

    /// Breakpoints (all periodic copies) strictly between `t0` and `t1`, in
    /// the direction of travel.
    pub fn breaks_between(&self, t0: f64, t1: f64, out: &mut Vec<f64>) {
        out.clear();
        let WeightForm::PiecewiseConstant { breakpoints, .. } = &self.form else {
            return;
        };
        let (lo, hi) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
        let t_per = self.period;
        let n0 = (lo / t_per).floor() as i64 - 1;
        let n1 = (hi / t_per).ceil() as i64 + 1;
        let eps = 1e-13 * t_per.max(hi.abs());
        for n in n0..=n1 {
            let base = n as f64 * t_per;
            for &b in &breakpoints[..breakpoints.len() - 1] {
                let tb = base + b;
                if tb > lo + eps && tb < hi - eps {
                    out.push(tb);
                }
            }
        }
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out.dedup();
        if t0 > t1 {
            out.reverse();
        }
    }

    fn antiderivative(&self, t: f64) -> f64 {
        match &self.form {
            WeightForm::TrigShifted { amplitude, phase, offset } => {
                let w = self.omega();
                amplitude * (w * t - phase).sin() / w + offset * t
            }
            WeightForm::PiecewiseConstant { breakpoints, values } => {
                let t_per = self.period;
                let n = (t / t_per).floor();
                let s = self.reduce(t);
                let i = self.segment_of(s);
                let total = *self.cumulative.last().unwrap();
                n * total + self.cumulative[i] + values[i] * (s - breakpoints[i])
            }
        }
    }

    /// Exact ∫_{t0}^{t1} a.
    pub fn integral(&self, t0: f64, t1: f64) -> f64 {
        self.antiderivative(t1) - self.antiderivative(t0)
    }

    pub fn mean(&self) -> f64 {
        self.integral(0.0, self.period) / self.period
    }

    /// ‖a‖∞.
    pub fn sup_abs(&self) -> f64 {
        match &self.form {
            WeightForm::TrigShifted { amplitude, offset, .. } => amplitude.abs() + offset.abs(),
            WeightForm::PiecewiseConstant { values, .. } => {
                values.iter().fold(0.0, |m, v| m.max(v.abs()))
            }
        }
    }

    /// The pointwise multiple `c · a`.
    pub fn scaled(&self, c: f64) -> Weight {
        let form = match &self.form {
            WeightForm::TrigShifted { amplitude, phase, offset } => WeightForm::TrigShifted {
                amplitude: c * amplitude,
                phase: *phase,
                offset: c * offset,
            },
            WeightForm::PiecewiseConstant { breakpoints, values } => WeightForm::PiecewiseConstant {
                breakpoints: breakpoints.clone(),
                values: values.iter().map(|v| c * v).collect(),
            },
        };
        Weight::new(self.period, form).unwrap()
    }

    /// Sign structure: maximal closed intervals where `a ≥ 0` and `a ≢ 0`.
    pub fn sign_decomposition(&self) -> Result<SignDecomposition> {
        let t_per = self.period;
        match &self.form {
            WeightForm::TrigShifted { amplitude, phase, offset } => {
                let (amp, ph) = if *amplitude < 0.0 {
                    (-amplitude, phase + PI)
                } else {
                    (*amplitude, *phase)
                };
                let c = *offset;
                let mut intervals = Vec::new();
                if amp == 0.0 {
                    if c == 0.0 {
                        return Err(Error::DecompositionFailure);
                    }
                    if c > 0.0 {
                        intervals.push((0.0, t_per));
                    }
                    return Ok(SignDecomposition { period: t_per, intervals, vanishes_on_interval: false });
                }
                if c >= amp {
                    intervals.push((0.0, t_per));
                } else if c > -amp {
                    let r = (-c / amp).acos();
                    let w = self.omega();
                    let mut sigma = (ph - r) / w;
                    sigma -= t_per * (sigma / t_per).floor();
                    if sigma > t_per * (1.0 - 1e-12) || sigma < 1e-12 * t_per {
                        sigma = 0.0;
                    }
                    intervals.push((sigma, sigma + 2.0 * r / w));
                }
                Ok(SignDecomposition { period: t_per, intervals, vanishes_on_interval: false })
            }
            WeightForm::PiecewiseConstant { breakpoints, values } => {
                if values.iter().all(|&v| v == 0.0) {
                    return Err(Error::DecompositionFailure);
                }
                let n = values.len();
                let mut intervals: Vec<(f64, f64)> = Vec::new();
                let mut i = 0;
                while i < n {
                    if values[i] > 0.0 {
                        let start = breakpoints[i];
                        let mut j = i;
                        while j + 1 < n && values[j + 1] > 0.0 {
                            j += 1;
                        }
                        intervals.push((start, breakpoints[j + 1]));
                        i = j + 1;
                    } else {
                        i += 1;
                    }
                }
                // merge across t = T
                if intervals.len() >= 2 {
                    let first = intervals[0];
                    let last = *intervals.last().unwrap();
                    if first.0 == 0.0 && last.1 == t_per {
                        intervals.pop();
                        intervals[0] = (last.0, first.1 + t_per);
                    }
                }
                let vanishes = values.contains(&0.0);
                Ok(SignDecomposition { period: t_per, intervals, vanishes_on_interval: vanishes })
            }
        }
    }
}

/// Positivity intervals `I⁺ᵢ = [σᵢ, τᵢ]`, with `0 ≤ σᵢ < T` and `τᵢ ≤ σᵢ + T`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignDecomposition {
    pub period: f64,
    pub intervals: Vec<(f64, f64)>,
    /// `a` vanishes identically on some interval (relevant for flat limit
    /// profiles of large solutions).
    pub vanishes_on_interval: bool,
}

impl SignDecomposition {
    pub fn count(&self) -> usize {
        self.intervals.len()
    }

    pub fn lengths(&self) -> impl Iterator<Item = f64> + '_ {
        self.intervals.iter().map(|(s, t)| t - s)
    }

    /// Complement arcs `(τᵢ, σᵢ₊₁)` where `a ≤ 0`.
    pub fn complement(&self) -> Vec<(f64, f64)> {
        let m = self.intervals.len();
        let mut out = Vec::with_capacity(m);
        for i in 0..m {
            let tau = self.intervals[i].1;
            let next = if i + 1 < m { self.intervals[i + 1].0 } else { self.intervals[0].0 + self.period };
            if next > tau {
                out.push((tau, next));
            }
        }
        out
    }

    /// Whether `t` (mod T) lies in some positivity interval.
    pub fn contains(&self, t: f64) -> bool {
        let p = self.period;
        let s = t - p * (t / p).floor();
        self.intervals.iter().any(|&(a, b)| (s >= a && s <= b) || (s + p >= a && s + p <= b))
    }
}

// ---------------------------------------------------------------------------
// nonlinearities

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Nonlinearity {
    /// `g(u) = uᵖ`, `p > 1`.
    PowerLaw { p: f64 },
    /// `g(u) = uᵖ / (1 + u^(p−q))`, `0 ≤ q ≤ 1 < p`.
    SaturatedPower { p: f64, q: f64 },
}

#[inline]
fn upow(u: f64, e: f64) -> f64 {
    if e == 2.0 {
        u * u
    } else if e == 3.0 {
        u * u * u
    } else if e == 1.0 {
        u
    } else if e == 0.0 {
        1.0
    } else {
        u.powf(e)
    }
}

impl Nonlinearity {
    pub fn power(p: f64) -> Result<Self> {
        let g = Nonlinearity::PowerLaw { p };
        g.validate()?;
        Ok(g)
    }

    pub fn saturated(p: f64, q: f64) -> Result<Self> {
        let g = Nonlinearity::SaturatedPower { p, q };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Nonlinearity::PowerLaw { p } if p > 1.0 && p.is_finite() => Ok(()),
            Nonlinearity::PowerLaw { .. } => Err(Error::invalid("power-law exponent must satisfy p > 1")),
            Nonlinearity::SaturatedPower { p, q } if p > 1.0 && p.is_finite() && (0.0..=1.0).contains(&q) => {
                Ok(())
            }
            Nonlinearity::SaturatedPower { .. } => {
                Err(Error::invalid("saturated power needs 0 <= q <= 1 < p"))
            }
        }
    }

    /// Exponent `p` of the behaviour `g(u) ~ c_p uᵖ` at zero.
    pub fn exponent(&self) -> f64 {
        match *self {
            Nonlinearity::PowerLaw { p } | Nonlinearity::SaturatedPower { p, .. } => p,
        }
    }

    /// `lim g(u)/uᵖ` as `u → 0⁺`.
    pub fn c_p(&self) -> f64 {
        1.0
    }

    #[inline]
    pub fn g(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        match *self {
            Nonlinearity::PowerLaw { p } => upow(u, p),
            Nonlinearity::SaturatedPower { p, q } => upow(u, p) / (1.0 + upow(u, p - q)),
        }
    }

    #[inline]
    pub fn g_prime(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        match *self {
            Nonlinearity::PowerLaw { p } => p * upow(u, p - 1.0),
            Nonlinearity::SaturatedPower { p, q } => {
                let us = upow(u, p - q);
                let d = 1.0 + us;
                upow(u, p - 1.0) * (p + q * us) / (d * d)
            }
        }
    }

    pub fn g_second(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        match *self {
            Nonlinearity::PowerLaw { p } => p * (p - 1.0) * upow(u, p - 2.0),
            Nonlinearity::SaturatedPower { p, q } => {
                let s = p - q;
                let us = upow(u, s);
                let d = 1.0 + us;
                let num = p * upow(u, p - 1.0) + q * upow(u, 2.0 * p - q - 1.0);
                let dnum = p * (p - 1.0) * upow(u, p - 2.0) + q * (2.0 * p - q - 1.0) * upow(u, 2.0 * p - q - 2.0);
                dnum / (d * d) - 2.0 * num * s * upow(u, s - 1.0) / (d * d * d)
            }
        }
    }

    /// `G(u) = ∫₀ᵘ g`.
    pub fn primitive(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        match *self {
            Nonlinearity::PowerLaw { p } => upow(u, p + 1.0) / (p + 1.0),
            Nonlinearity::SaturatedPower { .. } => {
                crate::quad::gauss_legendre(|s| self.g(s), 0.0, u, 64)
            }
        }
    }

    /// `min g` on `[lo, hi]`; both families are strictly increasing on `u > 0`.
    pub fn min_on(&self, lo: f64, _hi: f64) -> f64 {
        self.g(lo)
    }

    /// Analytic hypothesis flags for the family and its parameters.
    pub fn conditions(&self) -> NonlinearityConditions {
        let ok = self.validate().is_ok();
        NonlinearityConditions {
            g_star: ok,
            g0: ok,
            g0_prime: ok,
            g0_second: ok,
            g_inf: ok,
            g_inf_prime: ok,
            g_inf_second: ok,
            convex_near_zero: ok,
        }
    }
}

/// Hypothesis flags on `g`: positivity, behaviour at zero and at infinity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NonlinearityConditions {
    pub g_star: bool,
    pub g0: bool,
    pub g0_prime: bool,
    pub g0_second: bool,
    pub g_inf: bool,
    pub g_inf_prime: bool,
    pub g_inf_second: bool,
    /// `g'' > 0` near zero and `g'/g'' → 0`, needed for subharmonics.
    pub convex_near_zero: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    /// Negative mean: `∫₀ᵀ a < 0`.
    pub a_sharp: bool,
    /// Finitely many positivity intervals with `a ≤ 0` in between.
    pub a_star: bool,
    pub g: NonlinearityConditions,
    pub mean: f64,
}

/// Mean-value and sign-structure conditions on `a` together with the
/// analytic flags of `g`.
pub fn weight_analysis(weight: &Weight, g: &Nonlinearity) -> Result<(ConditionReport, SignDecomposition)> {
    let decomp = weight.sign_decomposition()?;
    let mean = weight.mean();
    let a_sharp = mean < -1e-13 * weight.sup_abs();
    let covers_circle = decomp.intervals.len() == 1 && {
        let (s, t) = decomp.intervals[0];
        t - s >= weight.period() * (1.0 - 1e-14)
    };
    let a_star = decomp.count() >= 1 && !covers_circle;
    Ok((ConditionReport { a_sharp, a_star, g: g.conditions(), mean }, decomp))
}

// ---------------------------------------------------------------------------
// a-priori constants

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdConstants {
    pub rho_star: f64,
    pub lambda_star_upper: f64,
    /// `∫_{σᵢ+2ρ*}^{τᵢ−2ρ*} a` per positivity interval.
    pub interval_integrals: Vec<f64>,
    /// Dyadic level `J` of the grid `ρ = k·2^(−J)` that produced `rho_star`.
    pub dyadic_level: u32,
}

const RHO_MARGIN: f64 = 1.1;

/// `ρ*` as the largest dyadic value satisfying `ρ < |I⁺ᵢ|/4` and
/// `∫_{σᵢ+2ρ}^{τᵢ−2ρ} a > 0` with ρ inflated by 10%, and the matching `λ*`.
pub fn threshold_constants(decomp: &SignDecomposition, weight: &Weight, g: &Nonlinearity) -> Result<ThresholdConstants> {
    if decomp.intervals.is_empty() {
        return Err(Error::NoAdmissibleRho);
    }
    let min_len = decomp.lengths().fold(f64::INFINITY, f64::min);
    let admissible = |rho: f64| {
        let r = RHO_MARGIN * rho;
        decomp.intervals.iter().all(|&(s, t)| r < (t - s) / 4.0 && weight.integral(s + 2.0 * r, t - 2.0 * r) > 0.0)
    };
    for level in 10u32..=40 {
        let h = (2.0f64).powi(-(level as i32));
        let kmax = (min_len / (4.0 * RHO_MARGIN) / h).floor() as i64;
        let mut k = kmax;
        while k >= 1 {
            let rho = k as f64 * h;
            if admissible(rho) {
                let mut integrals = Vec::with_capacity(decomp.count());
                let mut lambda_star: f64 = 0.0;
                let two_phi_half = 2.0 * phi(0.5)?;
                for &(s, t) in &decomp.intervals {
                    let len = t - s;
                    let int = weight.integral(s + 2.0 * rho, t - 2.0 * rho);
                    let gmin = g.min_on(2.0 * rho * rho / len, rho);
                    lambda_star = lambda_star.max(two_phi_half / (gmin * int));
                    integrals.push(int);
                }
                return Ok(ThresholdConstants {
                    rho_star: rho,
                    lambda_star_upper: lambda_star,
                    interval_integrals: integrals,
                    dyadic_level: level,
                });
            }
            k -= 1;
        }
    }
    Err(Error::NoAdmissibleRho)
}

// ---------------------------------------------------------------------------
// average map

#[derive(Debug, Clone, PartialEq)]
pub struct DegreeDiagnostics {
    pub radius: f64,
    /// `(s, f#(s))` on a uniform grid of `[−d, d]`.
    pub samples: Vec<(f64, f64)>,
    pub at_minus_d: f64,
    pub at_plus_d: f64,
    pub degree: i32,
}

/// `f#(s) = (1/T)∫₀ᵀ f_λ(t, s) dt`: `−s` below zero, `λ·mean(a)·g(s)` above.
pub fn average_map(weight: &Weight, g: &Nonlinearity, lambda: f64, s: f64) -> f64 {
    if s <= 0.0 {
        -s
    } else {
        lambda * weight.mean() * g.g(s)
    }
}

/// Scalar Brouwer degree of `f#` on `]−d, d[`.
pub fn average_map_degree(
    weight: &Weight,
    g: &Nonlinearity,
    lambda: f64,
    d: f64,
    n_samples: usize,
) -> Result<DegreeDiagnostics> {
    if !(d > 0.0) || !(lambda > 0.0) {
        return Err(Error::invalid("average map needs d > 0 and lambda > 0"));
    }
    let n = n_samples.max(2);
    let samples: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let s = -d + 2.0 * d * i as f64 / (n - 1) as f64;
            (s, average_map(weight, g, lambda, s))
        })
        .collect();
    let lo = average_map(weight, g, lambda, -d);
    let hi = average_map(weight, g, lambda, d);
    if lo == 0.0 || hi == 0.0 {
        return Err(Error::DegreeUndefined(d));
    }
    let degree = if hi < 0.0 && lo > 0.0 {
        -1
    } else if lo < 0.0 && hi > 0.0 {
        1
    } else {
        0
    };
    Ok(DegreeDiagnostics { radius: d, samples, at_minus_d: lo, at_plus_d: hi, degree })
}

// ---------------------------------------------------------------------------
// the full problem

/// Weight, nonlinearity and the parameter λ.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub weight: Weight,
    pub g: Nonlinearity,
    pub lambda: f64,
}

impl Problem {
    pub fn new(weight: Weight, g: Nonlinearity, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::invalid("lambda must be > 0"));
        }
        g.validate()?;
        Ok(Problem { weight, g, lambda })
    }

    pub fn with_lambda(&self, lambda: f64) -> Problem {
        Problem { weight: self.weight.clone(), g: self.g, lambda }
    }

    pub fn period(&self) -> f64 {
        self.weight.period()
    }

    /// Extended force `f_λ(t, u)` on the piece containing `anchor`.
    #[inline]
    pub fn force(&self, t: f64, anchor: f64, u: f64) -> f64 {
        if u <= 0.0 {
            -u
        } else {
            self.lambda * self.weight.eval_on_piece(t, anchor) * self.g.g(u)
        }
    }

    /// `∂ᵤ f_λ`; the upper branch is used at `u = 0`.
    #[inline]
    pub fn dforce(&self, t: f64, anchor: f64, u: f64) -> f64 {
        if u < 0.0 {
            -1.0
        } else {
            self.lambda * self.weight.eval_on_piece(t, anchor) * self.g.g_prime(u)
        }
    }

    /// `∫₀^{x2} φ⁻¹ + ∫₀^{x1} f_λ(t, ·)`.
    pub fn hamiltonian(&self, t: f64, x: [f64; 2]) -> f64 {
        let kinetic = (1.0 + x[1] * x[1]).sqrt() - 1.0;
        let potential = if x[0] <= 0.0 {
            -0.5 * x[0] * x[0]
        } else {
            self.lambda * self.weight.eval(t) * self.g.primitive(x[0])
        };
        kinetic + potential
    }

    pub fn extended_force(&self, t: f64, u: f64) -> f64 {
        self.force(t, t, u)
    }

    pub fn analysis(&self) -> Result<(ConditionReport, SignDecomposition)> {
        weight_analysis(&self.weight, &self.g)
    }

    pub fn thresholds(&self) -> Result<ThresholdConstants> {
        let decomp = self.weight.sign_decomposition()?;
        threshold_constants(&decomp, &self.weight, &self.g)
    }
}

/// Free-function form of the extended force.
pub fn extended_force(t: f64, u: f64, lambda: f64, weight: &Weight, g: &Nonlinearity) -> f64 {
    if u <= 0.0 {
        -u
    } else {
        lambda * weight.eval(t) * g.g(u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn phi_closed_forms() {
        assert_eq!(phi(0.0).unwrap(), 0.0);
        assert_relative_eq!(phi(0.6).unwrap(), 0.75, epsilon = 1e-15);
        assert_relative_eq!(phi_inv(0.75), 0.6, epsilon = 1e-15);
        assert_relative_eq!(phi_prime(0.6).unwrap(), 1.953125, epsilon = 1e-14);
        assert!(matches!(phi(1.0), Err(Error::PhiDomain(_))));
        assert!(phi_prime(-1.5).is_err());
    }

    #[test]
    fn extended_force_examples() {
        let g2 = Nonlinearity::power(2.0).unwrap();
        let g3 = Nonlinearity::power(3.0).unwrap();
        let a1 = Weight::trig(1.0, 0.0, 0.0, 1.0).unwrap();
        assert_eq!(extended_force(0.3, -1.0, 7.0, &Weight::fig1(), &g3), 1.0);
        assert!(extended_force(0.0, 5.0, 2.0, &Weight::fig1(), &g3).abs() < 1e-13);
        assert_eq!(extended_force(0.4, 2.0, 3.0, &a1, &g2), 12.0);
    }

    #[test]
    fn fig1_weight_structure() {
        let w = Weight::fig1();
        let g = Nonlinearity::power(3.0).unwrap();
        let (rep, dec) = weight_analysis(&w, &g).unwrap();
        assert_relative_eq!(rep.mean * w.period(), -core::f64::consts::SQRT_2 * PI, epsilon = 1e-12);
        assert!(rep.a_sharp && rep.a_star);
        assert_eq!(dec.count(), 1);
        let (s, t) = dec.intervals[0];
        assert!(s.abs() < 1e-12);
        assert_relative_eq!(t, PI / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn fig4_weight_structure() {
        let w = Weight::fig4();
        let g = Nonlinearity::power(2.0).unwrap();
        let (rep, dec) = weight_analysis(&w, &g).unwrap();
        assert_relative_eq!(w.integral(0.0, 10.0), -12.0, epsilon = 1e-14);
        assert!(rep.a_sharp);
        assert_eq!(dec.intervals, alloc::vec![(0.0, 1.0), (2.0, 3.0)]);
        assert!(dec.vanishes_on_interval);
        assert_eq!(dec.complement(), alloc::vec![(1.0, 2.0), (3.0, 10.0)]);
    }

    #[test]
    fn positive_constant_weight_fails_mean_condition() {
        let w = Weight::trig(3.0, 0.0, 0.0, 1.0).unwrap();
        let (rep, _) = weight_analysis(&w, &Nonlinearity::power(2.0).unwrap()).unwrap();
        assert!(!rep.a_sharp);
        assert!(!rep.a_star);
    }

    #[test]
    fn zero_weight_is_not_decomposable() {
        let w = Weight::trig(1.0, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(w.sign_decomposition(), Err(Error::DecompositionFailure));
    }

    #[test]
    fn piecewise_periodic_integral_and_eval() {
        let w = Weight::fig4();
        assert_eq!(w.eval(1.0), 0.0);
        assert_eq!(w.eval(0.999), 1.0);
        assert_eq!(w.eval(-0.5), -2.0);
        assert_eq!(w.eval(12.5), 1.0);
        assert_relative_eq!(w.integral(-1.0, 2.5), -2.0 + 1.0 + 0.5, epsilon = 1e-14);
        assert_relative_eq!(w.integral(0.0, 30.0), -36.0, epsilon = 1e-12);
        let mut br = Vec::new();
        w.breaks_between(0.5, 12.0, &mut br);
        assert_eq!(br, alloc::vec![1.0, 2.0, 3.0, 10.0, 11.0]);
        w.breaks_between(3.0, 0.0, &mut br);
        assert_eq!(br, alloc::vec![2.0, 1.0]);
    }

    #[test]
    fn wrapping_positive_segments_merge() {
        let w = Weight::piecewise(4.0, alloc::vec![0.0, 1.0, 3.0, 4.0], alloc::vec![1.0, -1.0, 0.5]).unwrap();
        let dec = w.sign_decomposition().unwrap();
        assert_eq!(dec.intervals, alloc::vec![(3.0, 5.0)]);
        assert!(dec.contains(0.5) && dec.contains(3.5) && !dec.contains(2.0));
    }

    #[test]
    fn saturated_derivatives_match_differences() {
        let g = Nonlinearity::saturated(3.5, 0.4).unwrap();
        for &u in &[0.05, 0.3, 1.0, 2.7, 9.0] {
            let h = 1e-5 * u;
            let d1 = (g.g(u + h) - g.g(u - h)) / (2.0 * h);
            let d2 = (g.g_prime(u + h) - g.g_prime(u - h)) / (2.0 * h);
            assert_relative_eq!(g.g_prime(u), d1, max_relative = 1e-7);
            assert_relative_eq!(g.g_second(u), d2, max_relative = 1e-6);
        }
    }

    #[test]
    fn degree_examples() {
        let g = Nonlinearity::power(3.0).unwrap();
        let d = average_map_degree(&Weight::fig1(), &g, 2.0, 1.5, 33).unwrap();
        assert_eq!(d.degree, -1);
        assert_eq!(d.at_minus_d, 1.5);
        let pos = Weight::trig(2.0 * PI, 0.0, 0.0, 1.0).unwrap();
        let d = average_map_degree(&pos, &g, 2.0, 1.5, 33).unwrap();
        assert_eq!(d.degree, 0);
    }

    #[test]
    fn doubling_weight_halves_lambda_star() {
        let g = Nonlinearity::power(3.0).unwrap();
        let w = Weight::fig1();
        let w2 = w.scaled(2.0);
        let t1 = threshold_constants(&w.sign_decomposition().unwrap(), &w, &g).unwrap();
        let t2 = threshold_constants(&w2.sign_decomposition().unwrap(), &w2, &g).unwrap();
        assert_eq!(t1.rho_star, t2.rho_star);
        assert_relative_eq!(t1.lambda_star_upper, 2.0 * t2.lambda_star_upper, max_relative = 1e-12);
    }
}
