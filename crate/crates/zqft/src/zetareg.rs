//! Zeta-regularized determinants and coincident Green functions.
//!
//! For `A = -Δ + m²` on each supported geometry this module computes
//! `logdet A = -ζ_A'(0)` and the regularized tadpole `τ(x) = ζ_A(1, x)`
//! (the finite part of the coincident Green function).  Two independent
//! routes are provided wherever possible:
//!
//! * closed forms (hyperbolic functions, Bessel lattice sums, digamma and
//!   Barnes-G expressions), used by [`logdet`] and [`tau`];
//! * the heat-kernel Mellin representation, used by [`logdet_mellin`] and
//!   [`tau_heat`], built on cancellation-free remainders of the heat trace.
//!
//! The Mellin route is the definitional one.  Writing the short-time trace as
//! `Θ(t) ~ c₁/t + c_h/√t + c₀`, analytic continuation of
//! `ζ_A(s) = (1/Γ(s)) ∫ t^{s-1} e^{-m²t} Θ(t) dt` gives
//!
//! ```text
//! logdet A = -c₁ m² (ln m² - 1) + 2√π c_h m + c₀ ln m²
//!            - ∫₀^∞ e^{-m²t} R(t) dt/t,      R(t) = Θ(t) - c₁/t - c_h/√t - c₀.
//! ```
//!
//! The remainder `R(t)` decays exponentially at small `t` for the flat
//! geometries and like `t` (sphere) or `√t` (hemisphere) for the curved ones;
//! it is always evaluated in a form that never subtracts nearly equal
//! quantities (image sums at small `t`, spectral sums at large `t`).

use crate::constants::{Precision, EULER_GAMMA, ZETA_PRIME_MINUS_ONE};
use crate::geometry::{
    cos_pi_nu, hemisphere_theta_sum, sphere_green_angle, sphere_theta_sum, Geometry, Point,
};
use crate::quadrature::{integrate, integrate_panels, integrate_to_inf, integrate_to_zero, ErrCell};
use crate::specfun::{bessel_k, digamma_complex, log_barnes_g, theta3};
use crate::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Relative tolerance for the adaptive quadrature splits used here.
const QUAD_TOL: f64 = 1e-14;
/// Gauss-Legendre nodes per panel.
const GL_N: usize = 32;
/// exp(-x) below this exponent is a clean zero in f64.
const EXP_CUT: f64 = 745.0;

/// Taylor coefficients r_k of the sphere trace remainder
/// Θ(s) - 1/s - 1/3 = Σ_{k≥1} r_k s^k, exact rationals.
const SPHERE_PATCH: [(f64, f64); 6] = [
    (1.0, 15.0),
    (4.0, 315.0),
    (1.0, 315.0),
    (4.0, 3465.0),
    (382.0, 675675.0),
    (232.0, 675675.0),
];

/// Sphere/hemisphere patch region: the series above is used for s = t/R² ≤ S0
/// (residual below 3e-13), direct spectral sums beyond.
const PATCH_S0: f64 = 0.02;

fn require_mass(m: f64) -> Result<()> {
    if m > 0.0 && m.is_finite() {
        Ok(())
    } else {
        Err(Error::domain("mass must be positive and finite"))
    }
}

// ---------------------------------------------------------------------------
// Heat-trace remainders, cancellation-free
// ---------------------------------------------------------------------------

/// 2 Σ_{j≥1} e^{-a j²}; needs a = O(1) or larger to be cheap and is only
/// called in regimes where a > π.
fn gauss_images_tail(a: f64) -> f64 {
    let mut sum = 0.0;
    let mut j = 1.0_f64;
    while a * j * j < 45.0 {
        sum += 2.0 * (-a * j * j).exp();
        j += 1.0;
    }
    sum
}

/// Σ_{k≥1} r_k s^k for the sphere trace remainder, s ≤ PATCH_S0.
fn sphere_patch_series(s: f64) -> f64 {
    let mut acc = 0.0;
    for &(num, den) in SPHERE_PATCH.iter().rev() {
        acc = acc * s + num / den;
    }
    acc * s
}

/// R(t) = Θ(t) - c₁/t - c_h/√t - c₀ for the given geometry, valid for all
/// t > 0 and free of catastrophic cancellation.
pub(crate) fn heat_remainder(geom: &Geometry, t: f64) -> Result<f64> {
    if t <= 0.0 || !t.is_finite() {
        return Err(Error::domain("heat remainder needs t > 0"));
    }
    if let Geometry::Disk { .. } | Geometry::SphericalSector { .. } = geom {
        return Err(spectrum_unsupported(geom));
    }
    let prec = Precision::default();
    let val = match *geom {
        Geometry::Interval { l } => {
            if PI * t < l * l {
                // Image form: Θ = l/√(4πt) - 1/2 + (l/√(4πt)) v with
                // v = 2 Σ_{j≥1} e^{-j²l²/t}.
                let v = gauss_images_tail(l * l / t);
                l / (4.0 * PI * t).sqrt() * v
            } else {
                (theta3(0.0, PI * t / (l * l), prec)? - 1.0) / 2.0 - l / (4.0 * PI * t).sqrt()
                    + 0.5
            }
        }
        Geometry::Circle { l } => {
            if 4.0 * PI * t < l * l {
                let u = gauss_images_tail(l * l / (4.0 * t));
                l / (4.0 * PI * t).sqrt() * u
            } else {
                theta3(0.0, 4.0 * PI * t / (l * l), prec)? - l / (4.0 * PI * t).sqrt()
            }
        }
        Geometry::Torus { l1, l2 } => {
            let lmin = l1.min(l2);
            if 4.0 * PI * t < lmin * lmin {
                let u1 = gauss_images_tail(l1 * l1 / (4.0 * t));
                let u2 = gauss_images_tail(l2 * l2 / (4.0 * t));
                l1 * l2 / (4.0 * PI * t) * (u1 + u2 + u1 * u2)
            } else {
                let th1 = theta3(0.0, 4.0 * PI * t / (l1 * l1), prec)?;
                let th2 = theta3(0.0, 4.0 * PI * t / (l2 * l2), prec)?;
                th1 * th2 - l1 * l2 / (4.0 * PI * t)
            }
        }
        Geometry::Cylinder { l, h } => {
            if 4.0 * PI * t < l * l && PI * t < h * h {
                let u = gauss_images_tail(l * l / (4.0 * t));
                let v = gauss_images_tail(h * h / t);
                l * h / (4.0 * PI * t) * (u + v + u * v)
                    - l / (2.0 * (4.0 * PI * t).sqrt()) * u
            } else {
                let circ = theta3(0.0, 4.0 * PI * t / (l * l), prec)?;
                let intv = (theta3(0.0, PI * t / (h * h), prec)? - 1.0) / 2.0;
                circ * intv - l * h / (4.0 * PI * t) + l / (2.0 * (4.0 * PI * t).sqrt())
            }
        }
        Geometry::Sphere { r } => {
            let s = t / (r * r);
            if s <= PATCH_S0 {
                sphere_patch_series(s)
            } else {
                sphere_theta_sum(s) - 1.0 / s - 1.0 / 3.0
            }
        }
        Geometry::Hemisphere { r } => {
            let s = t / (r * r);
            if s <= PATCH_S0 {
                // Θ_hemi(s) = Θ_sph(s)/2 - (√π/4) e^{s/4}/√s + O(e^{-π²/s}),
                // so the remainder against c₁ = R²/2, c_h = -√π R/4, c₀ = 1/6
                // is half the sphere series minus (√π/4)(e^{s/4}-1)/√s.
                0.5 * sphere_patch_series(s)
                    - 0.25 * PI.sqrt() * (0.25 * s).exp_m1() / s.sqrt()
            } else {
                hemisphere_theta_sum(s) - 0.5 / s + 0.25 * PI.sqrt() / s.sqrt() - 1.0 / 6.0
            }
        }
        // rejected above
        Geometry::Disk { .. } | Geometry::SphericalSector { .. } => unreachable!(),
    };
    Ok(val)
}

/// Break point below which the image form of the remainder is exact to f64
/// (also the natural scale separating the quadrature splits).
fn remainder_switch(geom: &Geometry) -> f64 {
    match *geom {
        Geometry::Interval { l } => l * l / PI,
        Geometry::Circle { l } => l * l / (4.0 * PI),
        Geometry::Torus { l1, l2 } => {
            let lmin = l1.min(l2);
            lmin * lmin / (4.0 * PI)
        }
        Geometry::Cylinder { l, h } => (l * l / (4.0 * PI)).min(h * h / PI),
        Geometry::Sphere { r } | Geometry::Hemisphere { r } => PATCH_S0 * r * r,
        // no spectral data; heat_remainder rejects these before any use
        Geometry::Disk { .. } | Geometry::SphericalSector { .. } => f64::NAN,
    }
}

/// Shared rejection for the boundary-spectrum-only kinds.
fn spectrum_unsupported(geom: &Geometry) -> Error {
    Error::unsupported(format!(
        "{geom} carries only Dirichlet-to-Neumann data; its interior spectrum is out of scope"
    ))
}

/// ∫₀^∞ e^{-m²t} R(t) dt/t.
fn mellin_tail(geom: &Geometry, m: f64) -> Result<f64> {
    let m2 = m * m;
    let cell = ErrCell::new();
    let f = |t: f64| {
        if m2 * t > EXP_CUT {
            return 0.0;
        }
        cell.absorb(heat_remainder(geom, t)) * (-m2 * t).exp() / t
    };
    let t_sw = remainder_switch(geom);
    let inf_scale = 0.25 * t_sw.min(1.0 / m2);
    let total = match *geom {
        Geometry::Sphere { .. } => {
            // R(t)/t -> r₁/R² as t -> 0: plain panels suffice on the patch.
            integrate_panels(&f, &[0.0, 0.5 * t_sw, t_sw], GL_N)
                + integrate_to_inf(&f, t_sw, inf_scale, GL_N, QUAD_TOL)
        }
        Geometry::Hemisphere { .. } => {
            // The √t terms make R(t)/t ~ 1/√t at small t; substituting
            // t = u² gives an integrand analytic in u.
            let u0 = t_sw.sqrt();
            integrate_panels(|u| 2.0 * u * f(u * u), &[0.0, 0.5 * u0, u0], GL_N)
                + integrate_to_inf(&f, t_sw, inf_scale, GL_N, QUAD_TOL)
        }
        _ => {
            // Flat geometries: R vanishes exponentially at t -> 0.
            integrate_to_zero(&f, t_sw, GL_N, QUAD_TOL)
                + integrate_to_inf(&f, t_sw, inf_scale, GL_N, QUAD_TOL)
        }
    };
    cell.finish(total)
}

/// logdet(-Δ + m²) through the heat-kernel Mellin representation.  Slower
/// than [`logdet`] but uniform across geometries; the two agree to ~1e-12.
pub fn logdet_mellin(geom: &Geometry, m: f64) -> Result<f64> {
    require_mass(m)?;
    let (c1, ch, c0) = geom.heat_coefficients();
    let m2 = m * m;
    let head = -c1 * m2 * (m2.ln() - 1.0) + 2.0 * PI.sqrt() * ch * m + c0 * m2.ln();
    Ok(head - mellin_tail(geom, m)?)
}

// ---------------------------------------------------------------------------
// Closed-form determinants
// ---------------------------------------------------------------------------

pub(crate) fn sphere_alphas(z: f64) -> (Complex64, Complex64) {
    if z <= 0.25 {
        // α₂ = z/α₁ avoids the subtractive cancellation of ½ - √(¼-z) that
        // would otherwise wipe out digits as z → 0.
        let a1 = 0.5 + (0.25 - z).sqrt();
        (Complex64::new(a1, 0.0), Complex64::new(z / a1, 0.0))
    } else {
        let disc = Complex64::new(0.0, (z - 0.25).sqrt());
        let half = Complex64::new(0.5, 0.0);
        (half + disc, half - disc)
    }
}

/// Sphere determinant at unit radius as a function of z = (mR)²:
/// C - 2z + ln π - ln cos(πν) + 2 Re[ln G(α₁) + ln G(α₂)],
/// with C = 1/2 - 4ζ'(-1), ν = √(1/4 - z), α = 1/2 ± ν.
fn sphere_logdet_unit(z: f64) -> Result<f64> {
    let prec = Precision::default();
    let (a1, a2) = sphere_alphas(z);
    let c = 0.5 - 4.0 * ZETA_PRIME_MINUS_ONE;
    let g = (log_barnes_g(a1, prec)? + log_barnes_g(a2, prec)?).re;
    Ok(c - 2.0 * z + PI.ln() - cos_pi_nu(z).ln() + 2.0 * g)
}

/// logdet(-Δ + m²), closed form per geometry (cylinder falls back to the
/// Mellin route, which is exact for it up to quadrature error).
pub fn logdet(geom: &Geometry, m: f64) -> Result<f64> {
    require_mass(m)?;
    match *geom {
        // det = 2 sinh(ml)/m, written to stay stable for large ml.
        Geometry::Interval { l } => Ok(m * l + (-(-2.0 * m * l).exp()).ln_1p() - m.ln()),
        // det = 4 sinh²(mL/2).
        Geometry::Circle { l } => Ok(m * l + 2.0 * (-(-m * l).exp()).ln_1p()),
        Geometry::Torus { l1, l2 } => {
            let a = l1 * l2;
            let m2 = m * m;
            let head = -a / (4.0 * PI) * m2 * (m2.ln() - 1.0);
            // -ζ'(0) picks up -(A m/π) Σ_{b≠0} K₁(m|b|)/|b| over the lattice.
            let prec = Precision::default();
            let sum = lattice_sum(l1, l2, m, |mb, b| {
                bessel_k(1.0, mb, prec).map(|k1| k1 / b)
            })?;
            Ok(head - a * m / PI * sum)
        }
        Geometry::Cylinder { .. } => logdet_mellin(geom, m),
        Geometry::Sphere { r } => {
            let z = m * m * r * r;
            Ok(sphere_logdet_unit(z)? - (1.0 / 3.0 - z) * (r * r).ln())
        }
        Geometry::Hemisphere { r } => {
            let z = m * m * r * r;
            // det_sphere = det_D det_N and det_N/det_D = det(DN pair) gives
            // logdet_D = (logdet_sphere - ln 2cos(πν))/2 at R = 1.
            let logq = (2.0 * cos_pi_nu(z)).ln();
            Ok((sphere_logdet_unit(z)? - logq) / 2.0 - (1.0 / 6.0 - 0.5 * z) * (r * r).ln())
        }
        Geometry::Disk { .. } | Geometry::SphericalSector { .. } => {
            Err(spectrum_unsupported(geom))
        }
    }
}

/// Σ over the nonzero lattice b = (j l1, k l2) of f(m|b|, |b|), truncated
/// where m|b| > 60 (K-Bessel weight below 1e-28).
fn lattice_sum<F>(l1: f64, l2: f64, m: f64, mut f: F) -> Result<f64>
where
    F: FnMut(f64, f64) -> Result<f64>,
{
    let cut = 60.0;
    let jmax = (cut / (m * l1)).ceil() as i64 + 1;
    let kmax = (cut / (m * l2)).ceil() as i64 + 1;
    let mut sum = 0.0;
    for j in -jmax..=jmax {
        for k in -kmax..=kmax {
            if j == 0 && k == 0 {
                continue;
            }
            let b = ((j as f64 * l1).powi(2) + (k as f64 * l2).powi(2)).sqrt();
            if m * b > cut {
                continue;
            }
            sum += f(m * b, b)?;
        }
    }
    Ok(sum)
}

// ---------------------------------------------------------------------------
// Tadpoles
// ---------------------------------------------------------------------------

/// Regularized coincident Green function τ(x) = ζ_A(1, x): minimal
/// subtraction of the 1/(s-1) pole, which in two dimensions leaves
/// τ(x) = -ln(m²)/4π + ∫₀^∞ e^{-m²t} [K(t,x,x) - 1/4πt] dt.
/// In one dimension the coincident Green function is finite and τ = G(x,x).
pub fn tau(geom: &Geometry, m: f64, p: Point) -> Result<f64> {
    require_mass(m)?;
    match *geom {
        Geometry::Interval { .. } => geom.green(p, p, m),
        Geometry::Circle { l } => Ok(1.0 / (2.0 * m * (0.5 * m * l).tanh())),
        Geometry::Torus { .. } => {
            Ok(-m.ln() / (2.0 * PI) + torus_k0_lattice(geom, m)? / (2.0 * PI))
        }
        Geometry::Cylinder { l, h } => cylinder_tau_modes(l, h, m, p.y),
        Geometry::Sphere { r } => sphere_tau(m * r, r),
        Geometry::Hemisphere { r } => {
            let (theta, _psi) = hemisphere_coords(geom, p)?;
            let sigma = PI - 2.0 * theta;
            let image = sphere_green_angle(m * r, sigma, Precision::default())?;
            Ok(sphere_tau(m * r, r)? - image)
        }
        Geometry::Disk { .. } | Geometry::SphericalSector { .. } => {
            Err(spectrum_unsupported(geom))
        }
    }
}

/// τ(x) = [ln R² - ψ(α₁) - ψ(α₂)]/4π on the sphere.
fn sphere_tau(mr: f64, r: f64) -> Result<f64> {
    let prec = Precision::default();
    let (a1, a2) = sphere_alphas(mr * mr);
    let psisum = (digamma_complex(a1, prec)? + digamma_complex(a2, prec)?).re;
    Ok(((r * r).ln() - psisum) / (4.0 * PI))
}

/// Σ_{b≠0} K₀(m|b|) over the torus lattice.
fn torus_k0_lattice(geom: &Geometry, m: f64) -> Result<f64> {
    let Geometry::Torus { l1, l2 } = *geom else {
        return Err(Error::domain("lattice sum needs a torus"));
    };
    let prec = Precision::default();
    lattice_sum(l1, l2, m, |mb, _| bessel_k(0.0, mb, prec))
}

/// Cylinder tadpole via the transverse mode decomposition: with
/// ω_n = √(m² + (2πn/L)²) and the Dirichlet interval Green diagonal
/// g_ω(y) = (1-e^{-2ωy})(1-e^{-2ω(H-y)}) / (2ω (1-e^{-2ωH})),
/// τ(y) = τ_∞ + (1/L) Σ_n [g_{ω_n}(y) - 1/(2ω_n)], where
/// τ_∞ = -ln(m²)/4π + (1/π) Σ_{w≥1} K₀(mwL) is the regularized diagonal on
/// the infinite cylinder (the 1/(2ω_n) pieces resummed by images).
fn cylinder_tau_modes(l: f64, h: f64, m: f64, y: f64) -> Result<f64> {
    if !(y > 0.0 && y < h) {
        return Err(Error::domain(
            "cylinder tadpole needs an interior point (0 < y < height)",
        ));
    }
    let prec = Precision::default();
    let mut base = -m.ln() / (2.0 * PI);
    let mut w = 1.0_f64;
    while m * w * l <= 60.0 {
        base += bessel_k(0.0, m * w * l, prec)? / PI;
        w += 1.0;
    }
    let g_diff = |omega: f64| -> f64 {
        let ey = (-2.0 * omega * y).exp();
        let ehy = (-2.0 * omega * (h - y)).exp();
        let eh = (-2.0 * omega * h).exp();
        ((1.0 - ey) * (1.0 - ehy) / (1.0 - eh) - 1.0) / (2.0 * omega)
    };
    let ymin = y.min(h - y);
    let mut modes = g_diff(m);
    let mut n = 1.0_f64;
    loop {
        let omega = (m * m + (2.0 * PI * n / l).powi(2)).sqrt();
        if 2.0 * omega * ymin > 45.0 {
            break;
        }
        modes += 2.0 * g_diff(omega);
        n += 1.0;
        if n > 1e7 {
            return Err(Error::NoConvergence {
                context: "cylinder tadpole mode sum".into(),
                terms: 10_000_000,
            });
        }
    }
    Ok(base + modes / l)
}

fn hemisphere_coords(geom: &Geometry, p: Point) -> Result<(f64, f64)> {
    let Geometry::Hemisphere { .. } = geom else {
        return Err(Error::domain("expected a hemisphere point"));
    };
    if !(0.0..PI / 2.0).contains(&p.x) {
        return Err(Error::domain(
            "hemisphere tadpole needs colatitude in [0, pi/2)",
        ));
    }
    Ok((p.x, p.y))
}

/// Point-split tadpole τ^split(x) = lim_{d→0} [G(x, x_d) + ln(d)/2π]
/// (geodesic separation d), in closed form per geometry.  Only defined for
/// surfaces; it differs from [`tau`] by the constant (γ - ln 2)/2π.
pub fn tau_split(geom: &Geometry, m: f64, p: Point) -> Result<f64> {
    require_mass(m)?;
    match *geom {
        Geometry::Interval { .. } | Geometry::Circle { .. } => Err(Error::unsupported(
            "point splitting applies to two-dimensional geometries",
        )),
        Geometry::Torus { .. } => {
            // Lattice route: subtracting the logarithm from the |b| = 0 term
            // of G = Σ_b K₀(m|x - x' + b|)/2π leaves (ln 2 - ln m - γ)/2π.
            Ok((2.0_f64.ln() - m.ln() - EULER_GAMMA) / (2.0 * PI)
                + torus_k0_lattice(geom, m)? / (2.0 * PI))
        }
        Geometry::Cylinder { l, h } => {
            let y = p.y;
            if !(y > 0.0 && y < h) {
                return Err(Error::domain(
                    "cylinder tadpole needs an interior point (0 < y < height)",
                ));
            }
            // Doubly reflected image sum minus the self term.
            let prec = Precision::default();
            let cut = 45.0;
            let wmax = (cut / (m * l)).ceil() as i64 + 1;
            let kmax = (cut / (m * h)).ceil() as i64 + 1;
            let mut sum = 0.0;
            for wi in -wmax..=wmax {
                for k in -kmax..=kmax {
                    let dx = wi as f64 * l;
                    let dminus = (dx * dx + (2.0 * k as f64 * h).powi(2)).sqrt();
                    if !(wi == 0 && k == 0) && m * dminus <= cut {
                        sum += bessel_k(0.0, m * dminus, prec)?;
                    }
                    let dplus = (dx * dx + (2.0 * y + 2.0 * k as f64 * h).powi(2)).sqrt();
                    if m * dplus <= cut {
                        sum -= bessel_k(0.0, m * dplus, prec)?;
                    }
                }
            }
            Ok((2.0_f64.ln() - m.ln() - EULER_GAMMA) / (2.0 * PI) + sum / (2.0 * PI))
        }
        Geometry::Sphere { r } => sphere_tau_split(m * r, r),
        Geometry::Hemisphere { r } => {
            let (theta, _psi) = hemisphere_coords(geom, p)?;
            let sigma = PI - 2.0 * theta;
            let image = sphere_green_angle(m * r, sigma, Precision::default())?;
            Ok(sphere_tau_split(m * r, r)? - image)
        }
        Geometry::Disk { .. } | Geometry::SphericalSector { .. } => {
            Err(spectrum_unsupported(geom))
        }
    }
}

/// τ^split on the sphere: expanding the Gauss hypergeometric Green function
/// at coincidence gives [ln(4R²) - 2γ - ψ(α₁) - ψ(α₂)]/4π.
fn sphere_tau_split(mr: f64, r: f64) -> Result<f64> {
    let prec = Precision::default();
    let (a1, a2) = sphere_alphas(mr * mr);
    let psisum = (digamma_complex(a1, prec)? + digamma_complex(a2, prec)?).re;
    Ok(((4.0 * r * r).ln() - 2.0 * EULER_GAMMA - psisum) / (4.0 * PI))
}

/// Tadpole through the heat-kernel route
/// τ(x) = -ln(m²)/4π + ∫₀^∞ e^{-m²t} [K(t,x,x) - 1/4πt] dt,
/// for the homogeneous surfaces and the cylinder.  Independent of [`tau`]
/// (which uses lattice, digamma, or mode-sum closed forms).
pub fn tau_heat(geom: &Geometry, m: f64, p: Point) -> Result<f64> {
    require_mass(m)?;
    let m2 = m * m;
    let base = -m2.ln() / (4.0 * PI);
    match *geom {
        Geometry::Torus { l1, l2 } => {
            // K(t,x,x) - 1/4πt = R(t)/A since c_h = c₀ = 0.
            let a = l1 * l2;
            let cell = ErrCell::new();
            let f = |t: f64| {
                if m2 * t > EXP_CUT {
                    return 0.0;
                }
                cell.absorb(heat_remainder(geom, t)) * (-m2 * t).exp()
            };
            let t_sw = remainder_switch(geom);
            let v = integrate_to_zero(&f, t_sw, GL_N, QUAD_TOL)
                + integrate_to_inf(&f, t_sw, 0.25 * t_sw.min(1.0 / m2), GL_N, QUAD_TOL);
            Ok(base + cell.finish(v)? / a)
        }
        Geometry::Sphere { r } => {
            // K(t,x,x) - 1/4πt = (R(t) + 1/3)/(4πR²); the constant third
            // integrates analytically to 1/(3m²).
            let cell = ErrCell::new();
            let f = |t: f64| {
                if m2 * t > EXP_CUT {
                    return 0.0;
                }
                cell.absorb(heat_remainder(geom, t)) * (-m2 * t).exp()
            };
            let t_sw = remainder_switch(geom);
            let v = integrate_panels(&f, &[0.0, 0.5 * t_sw, t_sw], GL_N)
                + integrate_to_inf(&f, t_sw, 0.25 * t_sw.min(1.0 / m2), GL_N, QUAD_TOL);
            let integral = cell.finish(v)? + 1.0 / (3.0 * m2);
            Ok(base + integral / (4.0 * PI * r * r))
        }
        Geometry::Cylinder { l, h } => {
            let y = p.y;
            if !(y > 0.0 && y < h) {
                return Err(Error::domain(
                    "cylinder tadpole needs an interior point (0 < y < height)",
                ));
            }
            let cell = ErrCell::new();
            let f = |t: f64| {
                if m2 * t > EXP_CUT {
                    return 0.0;
                }
                cell.absorb(cylinder_diag_remainder(l, h, y, t)) * (-m2 * t).exp()
            };
            let t_sw = remainder_switch(geom);
            let v = integrate_to_zero(&f, t_sw, GL_N, QUAD_TOL)
                + integrate_to_inf(&f, t_sw, 0.25 * t_sw.min(1.0 / m2), GL_N, QUAD_TOL);
            Ok(base + cell.finish(v)?)
        }
        _ => Err(Error::unsupported(
            "heat-kernel tadpole covers torus, sphere, and cylinder",
        )),
    }
}

/// K(t, (x,y), (x,y)) - 1/4πt on the cylinder, cancellation-free.  The
/// diagonal kernel factorizes into a circle part and a Dirichlet interval
/// part; each is summed over images at small t and spectrally at large t.
fn cylinder_diag_remainder(l: f64, h: f64, y: f64, t: f64) -> Result<f64> {
    if t <= 0.0 || !t.is_finite() {
        return Err(Error::domain("heat remainder needs t > 0"));
    }
    let prec = Precision::default();
    let four_pi_t = 4.0 * PI * t;
    if PI * t < h * h {
        // Interval images: K_int = (1 + δ)/√(4πt) with
        // δ = 2 Σ_{j≥1} e^{-(jh)²/t} - Σ_j e^{-(y-jh)²/t}.
        let mut delta = gauss_images_tail(h * h / t);
        let span = (45.0 * t).sqrt();
        let jmin = ((y - span) / h).floor() as i64 - 1;
        let jmax = ((y + span) / h).ceil() as i64 + 1;
        for j in jmin..=jmax {
            let d = y - j as f64 * h;
            let e = -d * d / t;
            if e > -EXP_CUT {
                delta -= e.exp();
            }
        }
        if four_pi_t < l * l {
            let u = gauss_images_tail(l * l / (4.0 * t));
            Ok((u + delta + u * delta) / four_pi_t)
        } else {
            let circ = theta3(0.0, four_pi_t / (l * l), prec)? / l;
            Ok(circ * (1.0 + delta) / four_pi_t.sqrt() - 1.0 / four_pi_t)
        }
    } else {
        // Interval spectral branch: K_int = (2/h) Σ_n e^{-n²π²t/h²} sin²(nπy/h).
        let mut kint = 0.0;
        let mut n = 1.0_f64;
        while n * n * PI * PI * t / (h * h) < EXP_CUT {
            kint += 2.0 / h
                * (-n * n * PI * PI * t / (h * h)).exp()
                * (n * PI * y / h).sin().powi(2);
            n += 1.0;
        }
        let circ = theta3(0.0, four_pi_t / (l * l), prec)? / l;
        Ok(circ * kint - 1.0 / four_pi_t)
    }
}

// ---------------------------------------------------------------------------
// Zeta values and compatibility checks
// ---------------------------------------------------------------------------

/// ζ_A(0) = -c₁ m² + c₀ (pole-free value at the origin, exact in the heat
/// coefficients).
pub fn zeta0(geom: &Geometry, m: f64) -> f64 {
    let (c1, _ch, c0) = geom.heat_coefficients();
    -c1 * m * m + c0
}

/// Local zeta value ζ_A(0, x) = (K/6 - m²)/4π on surfaces (K the scalar
/// curvature), the density whose integral gives ζ_A(0) on closed surfaces.
pub fn zeta0_local(geom: &Geometry, m: f64, _p: Point) -> Result<f64> {
    if geom.dim() != 2 {
        return Err(Error::unsupported(
            "local zeta density is defined for two-dimensional geometries",
        ));
    }
    Ok((geom.scalar_curvature() / 6.0 - m * m) / (4.0 * PI))
}

/// ∫ τ(x) dVol, by symmetry or quadrature depending on the geometry.
pub fn integrated_tau(geom: &Geometry, m: f64) -> Result<f64> {
    require_mass(m)?;
    match *geom {
        Geometry::Interval { l } => {
            let cell = ErrCell::new();
            let v = integrate(
                |x| cell.absorb(geom.green(Point::new(x, 0.0), Point::new(x, 0.0), m)),
                0.0,
                l,
                64,
            );
            cell.finish(v)
        }
        Geometry::Circle { l } => Ok(l * tau(geom, m, Point::new(0.0, 0.0))?),
        Geometry::Torus { l1, l2 } => Ok(l1 * l2 * tau(geom, m, Point::new(0.0, 0.0))?),
        Geometry::Sphere { r } => {
            Ok(4.0 * PI * r * r * tau(geom, m, Point::new(0.0, 0.0))?)
        }
        Geometry::Cylinder { l, h } => {
            // τ(y) ~ ln y near the Dirichlet rims: dyadic refinement towards
            // both (0 and h give the same integral by reflection symmetry).
            let cell = ErrCell::new();
            let half = integrate_to_zero(
                |y| cell.absorb(cylinder_tau_modes(l, h, m, y)),
                0.5 * h,
                GL_N,
                1e-12,
            );
            cell.finish(2.0 * l * half)
        }
        Geometry::Hemisphere { r } => {
            // dVol = 2πR² sin θ dθ; substitute φ = π/2 - θ so the boundary
            // logarithm sits at φ = 0 where the dyadic split refines.
            let ts = sphere_tau(m * r, r)?;
            let prec = Precision::default();
            let cell = ErrCell::new();
            let v = integrate_to_zero(
                |phi| {
                    let img = cell.absorb(sphere_green_angle(m * r, 2.0 * phi, prec));
                    (ts - img) * phi.cos()
                },
                PI / 2.0,
                GL_N,
                1e-12,
            );
            cell.finish(2.0 * PI * r * r * v)
        }
        Geometry::Disk { .. } | Geometry::SphericalSector { .. } => {
            Err(spectrum_unsupported(geom))
        }
    }
}

/// |d logdet/d(m²) - ∫ τ dVol|: the variation of the determinant in the mass
/// squared must integrate the tadpole.  The derivative side uses a 4th-order
/// central stencil in w = m².
pub fn weak_compatibility_residual(geom: &Geometry, m: f64) -> Result<f64> {
    require_mass(m)?;
    let w = m * m;
    let hstep = 1e-4 * w;
    let f = |wv: f64| -> Result<f64> { logdet(geom, wv.sqrt()) };
    let deriv = (f(w - 2.0 * hstep)? - 8.0 * f(w - hstep)? + 8.0 * f(w + hstep)?
        - f(w + 2.0 * hstep)?)
        / (12.0 * hstep);
    Ok((deriv - integrated_tau(geom, m)?).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Geometry;
    use approx::assert_abs_diff_eq;

    // Frozen values from tools/derive_reference_values.py.

    #[test]
    fn interval_logdet_matches_reference() {
        let g = Geometry::Interval { l: 1.0 };
        for (m, want) in [
            (0.5, 0.7344720351728634),
            (1.0, 0.8545865421311409),
            (2.0, 1.2883673726141681),
        ] {
            assert_abs_diff_eq!(logdet(&g, m).unwrap(), want, epsilon = 1e-13);
        }
    }

    #[test]
    fn circle_logdet_matches_reference() {
        let g = Geometry::Circle { l: 2.0 };
        for (m, want) in [
            (0.5, 0.08264970922583622),
            (1.0, 1.7091730842622819),
            (2.0, 3.9630291063482269),
        ] {
            assert_abs_diff_eq!(logdet(&g, m).unwrap(), want, epsilon = 1e-13);
        }
    }

    #[test]
    fn torus_values_match_reference() {
        let g = Geometry::Torus { l1: 2.0, l2: 1.0 };
        assert_abs_diff_eq!(
            logdet(&g, 1.0).unwrap(),
            -1.0095474539136914,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            logdet(&g, 1.2).unwrap(),
            -0.7851130241627782,
            epsilon = 1e-12
        );
        let p = Point::new(0.3, 0.4);
        assert_abs_diff_eq!(tau(&g, 0.5, p).unwrap(), 1.8523928998042749, epsilon = 1e-12);
        assert_abs_diff_eq!(tau(&g, 1.0, p).unwrap(), 0.3431761844178034, epsilon = 1e-13);
        assert_abs_diff_eq!(
            tau(&g, 2.0, p).unwrap(),
            -0.06073371114743758,
            epsilon = 1e-13
        );
    }

    #[test]
    fn sphere_values_match_reference() {
        let g = Geometry::Sphere { r: 1.0 };
        let p = Point::new(0.0, 0.0);
        for (m, tau_want, logdet_want) in [
            (0.4, 0.49768136363510034, -0.6584656888610703),
            (0.5, 0.31250232645180558, -0.21531775730757764),
            (0.7, 0.14197341383023164, 0.41748386552744373),
            (0.8, 0.09582739148948266, 0.6383068728096552),
            (1.0, 0.03420662422356174, 0.9162666186694532),
            (2.0, -0.10331370897039520, -1.1006851120565295),
        ] {
            assert_abs_diff_eq!(tau(&g, m, p).unwrap(), tau_want, epsilon = 1e-13);
            assert_abs_diff_eq!(logdet(&g, m).unwrap(), logdet_want, epsilon = 1e-12);
        }
        let g8 = Geometry::Sphere { r: 0.8 };
        assert_abs_diff_eq!(
            tau(&g8, 1.0, p).unwrap(),
            0.06031299227874618,
            epsilon = 1e-13
        );
        assert_abs_diff_eq!(
            logdet(&g8, 1.0).unwrap(),
            0.5014454946702732,
            epsilon = 1e-12
        );
    }

    #[test]
    fn sphere_small_mass_tracks_zero_mode() {
        let g = Geometry::Sphere { r: 1.0 };
        let t = tau(&g, 1e-3, Point::new(0.0, 0.0)).unwrap();
        assert_abs_diff_eq!(t, 79577.48383512284, epsilon = 1e-7);
    }

    #[test]
    fn hemisphere_logdet_matches_reference() {
        let g = Geometry::Hemisphere { r: 1.0 };
        assert_abs_diff_eq!(
            logdet(&g, 1.0).unwrap(),
            -0.9043782429812193,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            logdet(&g, 0.4).unwrap(),
            -0.4101096272198968,
            epsilon = 1e-12
        );
    }

    #[test]
    fn cylinder_logdet_matches_reference() {
        let m = 1.0;
        for (h, want) in [
            (1.0, -2.9347898641445602),
            (1.5, -2.4732873099093167),
            (2.0, -2.1667331575120596),
            (2.5, -1.8997836170360688),
        ] {
            let g = Geometry::Cylinder {
                l: 2.0 * PI,
                h,
            };
            assert_abs_diff_eq!(logdet(&g, m).unwrap(), want, epsilon = 2e-12);
        }
    }

    #[test]
    fn cylinder_tau_matches_reference() {
        let g = Geometry::Cylinder { l: 2.0 * PI, h: 2.0 };
        for (y, want) in [
            (1.0, -0.033051245575689351),
            (0.5, -0.069599584922983386),
            (0.25, -0.147717669228225492),
        ] {
            assert_abs_diff_eq!(
                tau(&g, 1.0, Point::new(0.0, y)).unwrap(),
                want,
                epsilon = 1e-13
            );
        }
        let g1 = Geometry::Cylinder { l: 2.0 * PI, h: 1.0 };
        assert_abs_diff_eq!(
            tau(&g1, 1.0, Point::new(0.0, 0.5)).unwrap(),
            -0.10614792427027742,
            epsilon = 1e-13
        );
    }

    #[test]
    fn mellin_route_agrees_with_closed_forms() {
        // Route agreement on a 3 (size) x 3 (mass) grid per geometry family;
        // the quadrature route lands well inside the 1e-7 relative budget.
        let masses = [0.5, 1.0, 2.0];
        let sized: Vec<Geometry> = vec![
            Geometry::Interval { l: 0.7 },
            Geometry::Interval { l: 1.0 },
            Geometry::Interval { l: 2.5 },
            Geometry::Circle { l: 1.0 },
            Geometry::Circle { l: 2.0 },
            Geometry::Circle { l: 3.5 },
            Geometry::Torus { l1: 1.0, l2: 1.0 },
            Geometry::Torus { l1: 2.0, l2: 1.0 },
            Geometry::Torus { l1: 1.5, l2: 0.6 },
            Geometry::Sphere { r: 0.8 },
            Geometry::Sphere { r: 1.0 },
            Geometry::Sphere { r: 1.3 },
            Geometry::Hemisphere { r: 0.8 },
            Geometry::Hemisphere { r: 1.0 },
            Geometry::Hemisphere { r: 1.3 },
        ];
        for g in &sized {
            for &m in &masses {
                let closed = logdet(g, m).unwrap();
                let mellin = logdet_mellin(g, m).unwrap();
                let scale = 1.0_f64.max(closed.abs());
                assert!(
                    (closed - mellin).abs() <= 1e-10 * scale,
                    "{g} m={m}: closed {closed:.15e} vs mellin {mellin:.15e}"
                );
            }
        }
    }

    #[test]
    fn heat_route_tau_agrees_with_closed_forms() {
        let p = Point::new(0.0, 0.0);
        let torus = Geometry::Torus { l1: 2.0, l2: 1.0 };
        assert_abs_diff_eq!(
            tau_heat(&torus, 1.0, p).unwrap(),
            tau(&torus, 1.0, p).unwrap(),
            epsilon = 5e-12
        );
        let sphere = Geometry::Sphere { r: 1.0 };
        assert_abs_diff_eq!(
            tau_heat(&sphere, 0.8, p).unwrap(),
            tau(&sphere, 0.8, p).unwrap(),
            epsilon = 5e-12
        );
        let cyl = Geometry::Cylinder { l: 2.0 * PI, h: 2.0 };
        let q = Point::new(0.0, 0.7);
        assert_abs_diff_eq!(
            tau_heat(&cyl, 1.0, q).unwrap(),
            tau(&cyl, 1.0, q).unwrap(),
            epsilon = 5e-12
        );
    }

    #[test]
    fn split_and_heat_tadpoles_differ_by_universal_constant() {
        // τ - τ^split = (γ - ln 2)/2π on every surface; the two sides are
        // computed by unrelated routes (heat quadrature vs closed forms).
        let want = (EULER_GAMMA - 2.0_f64.ln()) / (2.0 * PI);
        let p = Point::new(0.3, 0.4);
        let torus = Geometry::Torus { l1: 2.0, l2: 1.0 };
        let diff = tau_heat(&torus, 1.0, p).unwrap() - tau_split(&torus, 1.0, p).unwrap();
        assert_abs_diff_eq!(diff, want, epsilon = 1e-12);
        let sphere = Geometry::Sphere { r: 1.0 };
        let diff = tau_heat(&sphere, 0.7, p).unwrap() - tau_split(&sphere, 0.7, p).unwrap();
        assert_abs_diff_eq!(diff, want, epsilon = 1e-12);
        let cyl = Geometry::Cylinder { l: 2.0 * PI, h: 2.0 };
        let q = Point::new(0.0, 0.6);
        let diff = tau_heat(&cyl, 1.0, q).unwrap() - tau_split(&cyl, 1.0, q).unwrap();
        assert_abs_diff_eq!(diff, want, epsilon = 1e-12);
    }

    #[test]
    fn sphere_tau_split_matches_reference() {
        // Closed form [ln 4 - 2γ - ψ(0.8) - ψ(0.2)]/4π at mR = 0.4.  The
        // reference script evaluates the split limit at finite d = 1e-6 and
        // lands 1.0e-13 above this (it records that bias as its own
        // consistency residual); the finite-d value is checked below.
        let g = Geometry::Sphere { r: 1.0 };
        let split = tau_split(&g, 0.4, Point::new(0.0, 0.0)).unwrap();
        assert_abs_diff_eq!(split, 0.51613243741227214, epsilon = 1e-13);
        let d = 1e-6;
        let gval = g
            .green(Point::new(0.0, 0.0), Point::new(d, 0.0), 0.4)
            .unwrap();
        assert_abs_diff_eq!(
            gval + d.ln() / (2.0 * PI),
            0.51613243741237384,
            epsilon = 3e-13
        );
    }

    #[test]
    fn point_split_limit_reproduces_tau_split() {
        // Numerical confirmation of the defining limit
        // τ^split = lim_{d→0} [G(p, p_d) + ln(d)/2π].
        let g = Geometry::Sphere { r: 1.0 };
        let m = 0.4;
        let split = tau_split(&g, m, Point::new(0.0, 0.0)).unwrap();
        let d = 1e-4;
        let gval = g
            .green(Point::new(0.0, 0.0), Point::new(d, 0.0), m)
            .unwrap();
        assert_abs_diff_eq!(gval + d.ln() / (2.0 * PI), split, epsilon = 1e-7);

        let t = Geometry::Torus { l1: 2.0, l2: 1.0 };
        let split = tau_split(&t, 1.0, Point::new(0.2, 0.3)).unwrap();
        let gval = t
            .green(Point::new(0.2, 0.3), Point::new(0.2 + d, 0.3), 1.0)
            .unwrap();
        assert_abs_diff_eq!(gval + d.ln() / (2.0 * PI), split, epsilon = 1e-7);
    }

    #[test]
    fn patch_matches_direct_sums_at_switch() {
        for s in [0.018, 0.02] {
            let direct = sphere_theta_sum(s) - 1.0 / s - 1.0 / 3.0;
            assert_abs_diff_eq!(sphere_patch_series(s), direct, epsilon = 3e-13);
            let hdirect =
                hemisphere_theta_sum(s) - 0.5 / s + 0.25 * PI.sqrt() / s.sqrt() - 1.0 / 6.0;
            let hpatch = 0.5 * sphere_patch_series(s)
                - 0.25 * PI.sqrt() * (0.25 * s).exp_m1() / s.sqrt();
            assert_abs_diff_eq!(hpatch, hdirect, epsilon = 3e-13);
        }
    }

    #[test]
    fn remainder_is_continuous_across_branches() {
        // The image and spectral forms of R(t) must agree where they meet.
        for g in [
            Geometry::Interval { l: 1.3 },
            Geometry::Circle { l: 2.0 },
            Geometry::Torus { l1: 2.0, l2: 1.0 },
            Geometry::Cylinder { l: 2.0, h: 0.9 },
        ] {
            // R(t) has slope O(1) at the switch, so keep the straddle tiny:
            // a jump from a branch bug would dwarf the 1e-12 window.
            let t_sw = remainder_switch(&g);
            let below = heat_remainder(&g, t_sw * (1.0 - 1e-12)).unwrap();
            let above = heat_remainder(&g, t_sw * (1.0 + 1e-12)).unwrap();
            assert_abs_diff_eq!(below, above, epsilon = 1e-11 * (1.0 + below.abs()));
        }
    }

    #[test]
    fn zeta_values_follow_heat_coefficients() {
        let s = Geometry::Sphere { r: 1.0 };
        assert_abs_diff_eq!(zeta0(&s, 0.5), 1.0 / 3.0 - 0.25, epsilon = 1e-15);
        let t = Geometry::Torus { l1: 2.0, l2: 1.0 };
        assert_abs_diff_eq!(zeta0(&t, 1.0), -2.0 / (4.0 * PI), epsilon = 1e-15);
        // Flat surface: the local density reduces to -m²/4π.
        let d = zeta0_local(&t, 1.0, Point::new(0.0, 0.0)).unwrap();
        assert_abs_diff_eq!(d, -1.0 / (4.0 * PI), epsilon = 1e-15);
        // Sphere: the density integrates to ζ_A(0), so 4πR²·ζ(0,x) = ⅓ - m²R².
        let ds = zeta0_local(&s, 1.0, Point::new(0.0, 0.0)).unwrap();
        assert_abs_diff_eq!(ds * s.volume(), zeta0(&s, 1.0), epsilon = 1e-15);
        assert_abs_diff_eq!(ds, (1.0 / 3.0 - 1.0) / (4.0 * PI), epsilon = 1e-15);
        assert!(zeta0_local(&Geometry::Interval { l: 1.0 }, 1.0, Point::new(0.5, 0.0)).is_err());
    }

    #[test]
    fn weak_compatibility_holds_on_closed_geometries() {
        for (g, m, tol) in [
            (Geometry::Interval { l: 1.0 }, 0.9, 1e-9),
            (Geometry::Circle { l: 2.0 }, 1.1, 1e-9),
            (Geometry::Torus { l1: 2.0, l2: 1.0 }, 1.0, 1e-8),
            (Geometry::Sphere { r: 1.0 }, 0.8, 1e-8),
        ] {
            let res = weak_compatibility_residual(&g, m).unwrap();
            assert!(res < tol, "{g}: residual {res:.3e} exceeds {tol:.0e}");
        }
    }

    #[test]
    fn strong_compatibility_on_truncated_torus_modes() {
        // Perturb -Δ + m² by ε(α + β cos(2πx/L₁)) on the torus, truncate to
        // Fourier modes |k_i| ≤ 8, and compare the LU-based d logdet/dε at
        // ε = 0 against first-order perturbation of the eigenvalue sum.
        // Plane waves average the bump to its mean, so only the constant α
        // survives: the derivative is α Σ_k 1/(λ_k + m²).
        let (l1, l2, m, alpha, beta) = (2.0, 1.0, 1.0, 0.7, 0.3);
        let kmax: i64 = 8;
        let n = (2 * kmax + 1) as usize;
        let dim = n * n;
        let idx = |k1: i64, k2: i64| -> usize {
            ((k1 + kmax) as usize) * n + (k2 + kmax) as usize
        };
        let build = |eps: f64| -> Vec<Vec<f64>> {
            let mut mat = vec![vec![0.0; dim]; dim];
            for k1 in -kmax..=kmax {
                for k2 in -kmax..=kmax {
                    let lam = (2.0 * PI * k1 as f64 / l1).powi(2)
                        + (2.0 * PI * k2 as f64 / l2).powi(2);
                    mat[idx(k1, k2)][idx(k1, k2)] = lam + m * m + eps * alpha;
                    if k1 + 1 <= kmax {
                        mat[idx(k1, k2)][idx(k1 + 1, k2)] += eps * beta / 2.0;
                    }
                    if k1 - 1 >= -kmax {
                        mat[idx(k1, k2)][idx(k1 - 1, k2)] += eps * beta / 2.0;
                    }
                }
            }
            mat
        };
        let eps = 1e-4;
        let (lp, _) = crate::linalg::lu_logdet(build(eps));
        let (lm, _) = crate::linalg::lu_logdet(build(-eps));
        let fd = (lp - lm) / (2.0 * eps);
        let mut trace = 0.0;
        for k1 in -kmax..=kmax {
            for k2 in -kmax..=kmax {
                let lam = (2.0 * PI * k1 as f64 / l1).powi(2)
                    + (2.0 * PI * k2 as f64 / l2).powi(2);
                trace += 1.0 / (lam + m * m);
            }
        }
        assert_abs_diff_eq!(fd, alpha * trace, epsilon = 1e-6);
    }

    #[test]
    fn cylinder_tadpole_boundary_blowup_is_logarithmic() {
        // τ(y) - ln(y)/2π stays bounded along a normal ray into the
        // Dirichlet rim, and the dyadic increments shrink towards the limit.
        let g = Geometry::Cylinder { l: 2.0 * PI, h: 2.0 };
        let mut prev_s = f64::NAN;
        let mut prev_step = f64::NAN;
        for k in 0..14 {
            let y = 0.5 * 0.5_f64.powi(k);
            let s = tau(&g, 1.0, Point::new(0.0, y)).unwrap() - y.ln() / (2.0 * PI);
            assert!(s.is_finite() && s.abs() < 10.0);
            if k >= 2 {
                let step = (s - prev_s).abs();
                if k >= 4 {
                    assert!(
                        step < prev_step || step < 1e-12,
                        "increment grew at k={k}: {step:.3e} vs {prev_step:.3e}"
                    );
                }
                prev_step = step;
            }
            prev_s = s;
        }
    }

    #[test]
    fn tadpole_mass_derivative_matches_second_determinant_derivative() {
        // d/dm² of ∫τ equals d²/d(m²)² of logdet; on the circle both sides
        // come from closed forms differentiated by central stencils.
        let g = Geometry::Circle { l: 2.0 };
        let w = 1.0_f64; // m² at the test point
        let hstep = 1e-3;
        let itau = |wv: f64| integrated_tau(&g, wv.sqrt()).unwrap();
        let ld = |wv: f64| logdet(&g, wv.sqrt()).unwrap();
        let dtau = (itau(w - 2.0 * hstep) - 8.0 * itau(w - hstep) + 8.0 * itau(w + hstep)
            - itau(w + 2.0 * hstep))
            / (12.0 * hstep);
        let d2ld = (-ld(w - 2.0 * hstep) + 16.0 * ld(w - hstep) - 30.0 * ld(w)
            + 16.0 * ld(w + hstep)
            - ld(w + 2.0 * hstep))
            / (12.0 * hstep * hstep);
        assert_abs_diff_eq!(dtau, d2ld, epsilon = 1e-8);
    }

    #[test]
    fn sphere_determinant_obeys_radius_scaling() {
        // logdet(m, R) = logdet(mR, 1) - 2 ζ_A(0) ln R, checked through the
        // Mellin route at R ≠ 1 so the scaling is not built in by hand.
        let m = 1.25;
        let r = 0.8;
        let g = Geometry::Sphere { r };
        let unit = Geometry::Sphere { r: 1.0 };
        let lhs = logdet_mellin(&g, m).unwrap();
        let rhs = logdet_mellin(&unit, m * r).unwrap() - 2.0 * zeta0(&g, m) * r.ln();
        assert_abs_diff_eq!(lhs, rhs, epsilon = 5e-11);
    }

    #[test]
    fn rejects_bad_masses_and_points() {
        let g = Geometry::Cylinder { l: 2.0, h: 1.0 };
        assert!(logdet(&g, 0.0).is_err());
        assert!(logdet(&g, f64::NAN).is_err());
        assert!(tau(&g, 1.0, Point::new(0.0, 1.5)).is_err());
        assert!(tau_split(&Geometry::Interval { l: 1.0 }, 1.0, Point::new(0.5, 0.0)).is_err());
    }
}
