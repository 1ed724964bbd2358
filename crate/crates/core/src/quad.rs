//! Small scalar numerics shared across modules: Gauss–Legendre rules,
//! golden-section minimization and sign-change bisection.

/// 5-point Gauss–Legendre nodes on [0, 1] and matching weights.
pub const GL5_NODES: [f64; 5] = [
    0.046_910_077_030_668_004,
    0.230_765_344_947_158_45,
    0.5,
    0.769_234_655_052_841_6,
    0.953_089_922_969_332,
];
pub const GL5_WEIGHTS: [f64; 5] = [
    0.118_463_442_528_094_54,
    0.239_314_335_249_683_23,
    0.284_444_444_444_444_45,
    0.239_314_335_249_683_23,
    0.118_463_442_528_094_54,
];

/// ∫_a^b f by composite 5-point Gauss–Legendre on `n` equal panels.
pub fn gauss_legendre<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = n.max(1);
    let h = (b - a) / n as f64;
    let mut acc = 0.0;
    for i in 0..n {
        let t0 = a + h * i as f64;
        let mut s = 0.0;
        for (x, w) in GL5_NODES.iter().zip(GL5_WEIGHTS.iter()) {
            s += w * f(t0 + h * x);
        }
        acc += s * h;
    }
    acc
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section minimization of a unimodal `f` on `[a, b]` down to an
/// interval of width `tol`. Returns `(argmin, min)`.
pub fn golden_min<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut iter = 0;
    while (b - a).abs() > tol && iter < 200 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        iter += 1;
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Bisection for a sign change of `f` on `[lo, hi]` with `f(lo) < 0 < f(hi)`.
///
/// Stops once `|f| < ftol`, or the bracket has collapsed to neighbouring
/// floats. Returns `(root, f(root), final bracket)`.
pub fn bisect_increasing<F: FnMut(f64) -> f64>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    ftol: f64,
    max_iter: usize,
) -> (f64, f64, [f64; 2]) {
    let mut best = (0.5 * (lo + hi), f64::INFINITY);
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm.abs() < best.1.abs() {
            best = (mid, fm);
        }
        if fm.abs() < ftol {
            return (mid, fm, [lo, hi]);
        }
        if fm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if !best.1.is_finite() {
        let mid = 0.5 * (lo + hi);
        return (mid, f(mid), [lo, hi]);
    }
    (best.0, best.1, [lo, hi])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_is_exact_for_degree_nine() {
        let v = gauss_legendre(|x| x.powi(9) - 3.0 * x * x, 0.0, 2.0, 1);
        assert!((v - (102.4 - 8.0)).abs() < 1e-11);
    }

    #[test]
    fn golden_finds_kink_minimum() {
        // a parabola only pins x to √ε; a kink pins it to the tolerance
        let (x, fx) = golden_min(|x| (x - 0.3).abs() + 1.0, -2.0, 2.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-9);
        assert!((fx - 1.0).abs() < 1e-9);
    }

    #[test]
    fn bisection_reaches_float_resolution() {
        let (x, _, _) = bisect_increasing(|x| x - core::f64::consts::PI, 0.0, 4.0, 0.0, 200);
        assert!((x - core::f64::consts::PI).abs() < 1e-15);
    }
}
