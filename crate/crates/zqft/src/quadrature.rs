//! Gaussian quadrature (Legendre and Hermite) plus the panel schemes used
//! by heat-trace integrals: fixed panels, dyadic refinement toward an
//! integrable endpoint singularity at 0, and doubling panels toward ∞.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Legendre P_n(x) and P_{n-1}(x) by upward recurrence.
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    (p1, p0)
}

/// Gauss-Legendre nodes and weights on [-1, 1].
///
/// Roots of P_n by Newton iteration from the Tricomi cosine guess; weights
/// from w = 2 / ((1 - x^2) P_n'(x)^2).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "empty quadrature rule");
    let nf = n as f64;
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            let (p, pm1) = legendre_pair(n, x);
            let dp = nf * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        if n % 2 == 1 && i == n / 2 {
            x = 0.0; // center root is exact by symmetry
        }
        let (p, pm1) = legendre_pair(n, x);
        let dp = nf * (x * p - pm1) / (x * x - 1.0);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        xs[i] = -x;
        ws[i] = w;
        xs[n - 1 - i] = x;
        ws[n - 1 - i] = w;
    }
    (xs, ws)
}

fn gl_cache() -> &'static Mutex<HashMap<usize, Arc<(Vec<f64>, Vec<f64>)>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<(Vec<f64>, Vec<f64>)>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Cached Gauss-Legendre rule; rules are reused thousands of times inside
/// the heat-trace integrals, so they are computed once per size.
pub fn gauss_legendre_cached(n: usize) -> Arc<(Vec<f64>, Vec<f64>)> {
    let mut map = gl_cache().lock().unwrap();
    map.entry(n)
        .or_insert_with(|| Arc::new(gauss_legendre(n)))
        .clone()
}

/// ∫_a^b f on a single Gauss-Legendre panel with n nodes.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, n: usize) -> f64 {
    let rule = gauss_legendre_cached(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut s = 0.0;
    for (x, w) in rule.0.iter().zip(rule.1.iter()) {
        s += w * f(mid + half * x);
    }
    half * s
}

/// ∫ over the consecutive panels [b_0,b_1], [b_1,b_2], ...
pub fn integrate_panels<F: FnMut(f64) -> f64>(mut f: F, breaks: &[f64], n: usize) -> f64 {
    breaks
        .windows(2)
        .map(|w| integrate(&mut f, w[0], w[1], n))
        .sum()
}

/// ∫_0^a f for an integrand with an integrable singularity at 0.
///
/// Panels [a/2^{k+1}, a/2^k] are accumulated until two consecutive panels
/// fall below the relative tolerance (capped at 60 halvings).
pub fn integrate_to_zero<F: FnMut(f64) -> f64>(mut f: F, a: f64, n: usize, rel_tol: f64) -> f64 {
    let mut sum = 0.0;
    let mut quiet = 0;
    let mut hi = a;
    for _ in 0..60 {
        let lo = 0.5 * hi;
        let panel = integrate(&mut f, lo, hi, n);
        sum += panel;
        if panel.abs() <= rel_tol * sum.abs().max(1e-300) {
            quiet += 1;
            if quiet >= 2 {
                break;
            }
        } else {
            quiet = 0;
        }
        hi = lo;
    }
    sum
}

/// ∫_a^∞ f for an integrand decaying at least exponentially beyond `a`.
///
/// Panel widths start at `scale` and double; stops after two consecutive
/// negligible panels.
pub fn integrate_to_inf<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    scale: f64,
    n: usize,
    rel_tol: f64,
) -> f64 {
    let mut sum = 0.0;
    let mut quiet = 0;
    let mut lo = a;
    let mut width = scale;
    for _ in 0..60 {
        let hi = lo + width;
        let panel = integrate(&mut f, lo, hi, n);
        sum += panel;
        if panel.abs() <= rel_tol * sum.abs().max(1e-300) {
            quiet += 1;
            if quiet >= 2 {
                break;
            }
        } else {
            quiet = 0;
        }
        lo = hi;
        width *= 2.0;
    }
    sum
}

/// Captures the first error raised inside a quadrature closure, letting a
/// fallible integrand present an f64 face to the rules above.
pub(crate) struct ErrCell(std::cell::RefCell<Option<crate::Error>>);

impl ErrCell {
    pub fn new() -> Self {
        ErrCell(std::cell::RefCell::new(None))
    }

    pub fn absorb(&self, r: crate::Result<f64>) -> f64 {
        match r {
            Ok(v) => v,
            Err(e) => {
                self.0.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        }
    }

    pub fn finish(self, v: f64) -> crate::Result<f64> {
        match self.0.into_inner() {
            Some(e) => Err(e),
            None => Ok(v),
        }
    }
}

/// Orthonormal Hermite p_n(x) (weight e^{-x^2}) and p_{n-1}(x).
fn hermite_pair(n: usize, x: f64) -> (f64, f64) {
    let p_init = std::f64::consts::PI.powf(-0.25);
    if n == 0 {
        return (p_init, 0.0);
    }
    let mut p0 = p_init;
    let mut p1 = x * std::f64::consts::SQRT_2 * p_init;
    for k in 1..n {
        let kf = k as f64;
        let p2 = x * (2.0 / (kf + 1.0)).sqrt() * p1 - (kf / (kf + 1.0)).sqrt() * p0;
        p0 = p1;
        p1 = p2;
    }
    (p1, p0)
}

/// Gauss-Hermite weight at a root x of p_n: 1 / Σ_{k<n} p_k(x)^2.
fn hermite_weight(n: usize, x: f64) -> f64 {
    let p_init = std::f64::consts::PI.powf(-0.25);
    let mut p0 = p_init;
    let mut sum = p0 * p0;
    if n == 1 {
        return 1.0 / sum;
    }
    let mut p1 = x * std::f64::consts::SQRT_2 * p_init;
    sum += p1 * p1;
    for k in 1..n - 1 {
        let kf = k as f64;
        let p2 = x * (2.0 / (kf + 1.0)).sqrt() * p1 - (kf / (kf + 1.0)).sqrt() * p0;
        p0 = p1;
        p1 = p2;
        sum += p2 * p2;
    }
    1.0 / sum
}

/// Gauss-Hermite nodes/weights for ∫_{-∞}^{∞} e^{-x^2} f(x) dx.
///
/// All roots lie in (-√(2n+1), √(2n+1)); the positive ones are located by a
/// sign-change scan (grid finer than the minimal root spacing π/√(2n+1)),
/// then polished by bisection + Newton using p_n' = √(2n) p_{n-1}.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "empty quadrature rule");
    let nf = n as f64;
    let xmax = (2.0 * nf + 1.0).sqrt();
    let step = 1.0 / xmax;
    let mut pos = Vec::with_capacity(n / 2);
    let start = if n % 2 == 1 { 0.5 * step } else { 0.0 };
    let mut x_prev = start;
    let mut f_prev = hermite_pair(n, x_prev).0;
    let mut x = start;
    while pos.len() < n / 2 && x < xmax + 1.0 {
        x += step;
        let fx = hermite_pair(n, x).0;
        if f_prev.signum() != fx.signum() {
            let (mut lo, mut hi) = (x_prev, x);
            for _ in 0..30 {
                let mid = 0.5 * (lo + hi);
                let fm = hermite_pair(n, mid).0;
                if fm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                } else if fm.signum() == f_prev.signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let mut r = 0.5 * (lo + hi);
            for _ in 0..20 {
                let (p, pm1) = hermite_pair(n, r);
                let dp = (2.0 * nf).sqrt() * pm1;
                let dx = p / dp;
                r -= dx;
                if dx.abs() < 1e-15 * (1.0 + r.abs()) {
                    break;
                }
            }
            pos.push(r);
        }
        x_prev = x;
        f_prev = fx;
    }
    assert_eq!(pos.len(), n / 2, "missed Hermite roots in scan");
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for (i, &r) in pos.iter().enumerate() {
        let w = hermite_weight(n, r);
        xs[n / 2 + i + n % 2] = r;
        ws[n / 2 + i + n % 2] = w;
        xs[n / 2 - 1 - i] = -r;
        ws[n / 2 - 1 - i] = w;
    }
    if n % 2 == 1 {
        xs[n / 2] = 0.0;
        ws[n / 2] = hermite_weight(n, 0.0);
    }
    (xs, ws)
}
