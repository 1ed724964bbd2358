//! Independent reference solvers. Nothing here calls into `mincurv_core`.
#![allow(dead_code)]

use nalgebra::{DMatrix, Matrix2, SymmetricEigen, Vector2};
use std::f64::consts::PI;

pub fn fig1_weight(t: f64) -> f64 {
    (t - PI / 4.0).cos() - std::f64::consts::FRAC_1_SQRT_2
}

/// `(φ(u'))' + λ a(t) uᵖ = 0` on a periodic Hermite–Simpson mesh, in the
/// variables `(u, φ(u'))`.
pub struct Collocation<'a> {
    pub lambda: f64,
    pub p: f64,
    pub period: f64,
    pub weight: &'a dyn Fn(f64) -> f64,
}

impl Collocation<'_> {
    fn f(&self, t: f64, x: Vector2<f64>) -> Vector2<f64> {
        let v = x[1];
        Vector2::new(v / (1.0 + v * v).sqrt(), -self.lambda * (self.weight)(t) * x[0].max(0.0).powf(self.p))
    }

    fn jac(&self, t: f64, x: Vector2<f64>) -> Matrix2<f64> {
        let v = x[1];
        let u = x[0].max(0.0);
        Matrix2::new(0.0, (1.0 + v * v).powf(-1.5), -self.lambda * (self.weight)(t) * self.p * u.powf(self.p - 1.0), 0.0)
    }

    /// Newton on the collocation equations from `guess` at the `n` mesh
    /// points `i·T/n`; returns the converged mesh values.
    pub fn solve(&self, n: usize, guess: &dyn Fn(f64) -> [f64; 2]) -> Result<Vec<[f64; 2]>, String> {
        let h = self.period / n as f64;
        let mut x: Vec<Vector2<f64>> = (0..n).map(|i| Vector2::from(guess(i as f64 * h))).collect();
        for _ in 0..40 {
            let mut r: Vec<Vector2<f64>> = Vec::with_capacity(n);
            let mut a: Vec<Matrix2<f64>> = Vec::with_capacity(n);
            let mut b: Vec<Matrix2<f64>> = Vec::with_capacity(n);
            for i in 0..n {
                let (t0, t1, tm) = (i as f64 * h, (i + 1) as f64 * h, (i as f64 + 0.5) * h);
                let (x0, x1) = (x[i], x[(i + 1) % n]);
                let (f0, f1) = (self.f(t0, x0), self.f(t1, x1));
                let xm = 0.5 * (x0 + x1) + h / 8.0 * (f0 - f1);
                let fm = self.f(tm, xm);
                r.push(x1 - x0 - h / 6.0 * (f0 + 4.0 * fm + f1));
                let (j0, j1, jm) = (self.jac(t0, x0), self.jac(t1, x1), self.jac(tm, xm));
                let id = Matrix2::identity();
                a.push(-id - h / 6.0 * (j0 + 4.0 * jm * (0.5 * id + h / 8.0 * j0)));
                b.push(id - h / 6.0 * (j1 + 4.0 * jm * (0.5 * id - h / 8.0 * j1)));
            }
            let res = r.iter().map(|v| v.amax()).fold(0.0, f64::max);
            // dX_{i+1} = P_{i+1} dX_0 + c_{i+1}, closed by dX_n = dX_0
            let mut pm = Matrix2::identity();
            let mut c = Vector2::zeros();
            let mut ps = Vec::with_capacity(n);
            let mut cs = Vec::with_capacity(n);
            for i in 0..n {
                ps.push(pm);
                cs.push(c);
                let binv = b[i].try_inverse().ok_or("singular block")?;
                pm = -binv * a[i] * pm;
                c = -binv * (r[i] + a[i] * c);
            }
            let dx0 = (pm - Matrix2::identity()).try_inverse().ok_or("singular closure")? * (-c);
            let mut step: f64 = 0.0;
            for i in 0..n {
                let d = ps[i] * dx0 + cs[i];
                step = step.max(d.amax());
                x[i] += d;
            }
            if res < 1e-12 && step < 1e-12 {
                return Ok(x.iter().map(|v| [v[0], v[1]]).collect());
            }
        }
        Err("collocation Newton did not converge".into())
    }
}

/// Periodic eigenvalues of `(p w')' + (μ + q) w = 0` by Rayleigh–Ritz on the
/// real Fourier basis with `modes` harmonics, ascending.
pub fn galerkin_hill(period: f64, modes: usize, p: &dyn Fn(f64) -> f64, q: &dyn Fn(f64) -> f64) -> Vec<f64> {
    let nb = 2 * modes + 1;
    let quad = 8 * nb;
    let w = 2.0 * PI / period;
    let basis = |k: usize, t: f64| -> (f64, f64) {
        if k == 0 {
            (1.0, 0.0)
        } else if k <= modes {
            let n = k as f64 * w;
            ((n * t).cos(), -n * (n * t).sin())
        } else {
            let n = (k - modes) as f64 * w;
            ((n * t).sin(), n * (n * t).cos())
        }
    };
    let mut k = DMatrix::<f64>::zeros(nb, nb);
    let mut m = DMatrix::<f64>::zeros(nb, nb);
    let dt = period / quad as f64;
    for s in 0..quad {
        let t = s as f64 * dt;
        let (pt, qt) = (p(t), q(t));
        let vals: Vec<(f64, f64)> = (0..nb).map(|i| basis(i, t)).collect();
        for i in 0..nb {
            for j in 0..nb {
                k[(i, j)] += dt * (pt * vals[i].1 * vals[j].1 - qt * vals[i].0 * vals[j].0);
                m[(i, j)] += dt * vals[i].0 * vals[j].0;
            }
        }
    }
    // the mass matrix is diagonal up to round-off
    let d: Vec<f64> = (0..nb).map(|i| 1.0 / m[(i, i)].sqrt()).collect();
    let s = DMatrix::from_fn(nb, nb, |i, j| d[i] * k[(i, j)] * d[j]);
    let s = 0.5 * (&s + s.transpose());
    let mut ev: Vec<f64> = SymmetricEigen::new(s).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

/// Trig polynomial `c0 + Σ aₖ cos(kωt) + bₖ sin(kωt)` as a closure.
pub fn trig(period: f64, c0: f64, cos: Vec<f64>, sin: Vec<f64>) -> impl Fn(f64) -> f64 {
    let w = 2.0 * PI / period;
    move |t| {
        let mut s = c0;
        for (k, a) in cos.iter().enumerate() {
            s += a * ((k + 1) as f64 * w * t).cos();
        }
        for (k, b) in sin.iter().enumerate() {
            s += b * ((k + 1) as f64 * w * t).sin();
        }
        s
    }
}

#[test]
fn galerkin_constant_coefficients() {
    // p ≡ 1, q ≡ 0, T = 2π: 0, 1, 1, 4, 4, …
    let ev = galerkin_hill(2.0 * PI, 8, &|_| 1.0, &|_| 0.0);
    for (v, e) in ev.iter().zip([0.0, 1.0, 1.0, 4.0, 4.0]) {
        assert!((v - e).abs() < 1e-12, "{v} vs {e}");
    }
}
