//! Dirichlet-to-Neumann boundary spectra and the gluing identities built on
//! them.
//!
//! Cutting a geometry along an interface `Y` produces two pieces whose DN
//! operators `D_L`, `D_R` (boundary value ↦ outward normal derivative of the
//! harmonic extension) control everything about reassembly:
//!
//! * determinants glue through `det_reg(Δ_Σ + m²) = det_L · det_R · det(c·D)`
//!   with `D = D_L + D_R` ([`bfk_residual`] verifies this numerically);
//! * Green's functions glue through the interface kernel `K = D⁻¹`
//!   ([`greens_glue_residual`], [`tadpole_glue`]);
//! * `det_reg(D)` itself factors as `det_reg(2κ) · Π_n r_n` with
//!   `r_n = (λ_nᴸ + λ_nᴿ)/(2ω_n)` and `κ = √(-Δ_Y + m²)` ([`det_dn`]).
//!
//! The mode ratios approach 1 fast: `δ_n = λ_n/ω_n - 1` decays like `n⁻³`
//! (disk), `n⁻⁴` (hemisphere) or superpolynomially (cylinder), which is what
//! makes the Fredholm products converge and is measured by
//! [`delta_order_fit`]. All δ paths are arranged to be cancellation-free so
//! the decay stays visible down to the `lnΓ` rounding floor.

use crate::constants::Precision;
use crate::geometry::{BoundaryComponent, Geometry, Point};
use crate::linalg::linfit;
use crate::specfun::{bessel_i_ratio, log_gamma};
use crate::zetareg::{self, sphere_alphas};
use crate::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

/// |ln r_n| below this is dominated by lnΓ and exp rounding; such modes are
/// excluded from power-law fits.
const ALIVE_FLOOR: f64 = 1e-13;
/// |ln r_n| below this contributes nothing resolvable to the log-product.
const DEAD_FLOOR: f64 = 1e-16;
/// |δ_n| below this is excluded from decay-order fits.
const FIT_FLOOR: f64 = 1e-15;
/// Mode probed for superpolynomial decay: |δ| < `SUPERPOLY_EPS` there means
/// no power law can be fitted at all.
const SUPERPOLY_PROBE: usize = 20;
const SUPERPOLY_EPS: f64 = 1e-12;
/// Boundary grid for equator amplitudes (interior kernels decay
/// exponentially in the mode index, so 256 points hold ~110 clean modes).
const GLUE_GRID: usize = 256;
/// A fitted truncation tail larger than this means the mode cutoff was far
/// too small; the determinant is refused rather than silently corrected.
const TAIL_CAP: f64 = 1e-2;
/// Conjugate-symmetry guard on hemisphere eigenvalues: the Γ-quotient must
/// come out real to this absolute tolerance.
const IM_TOL: f64 = 1e-9;

fn require_mass(m: f64) -> Result<()> {
    if m > 0.0 && m.is_finite() {
        Ok(())
    } else {
        Err(Error::domain("mass must be positive and finite"))
    }
}

fn check_component(geom: &Geometry, b: BoundaryComponent) -> Result<()> {
    if geom.boundary_components().contains(&b) {
        Ok(())
    } else {
        Err(Error::unsupported(format!(
            "geometry {geom} has no boundary component {b:?}"
        )))
    }
}

/// ω_n = √(m² + (2πn/c)²) on a circle of circumference c.
fn circle_omega(circumference: f64, m: f64, n: i64) -> f64 {
    let k = 2.0 * PI * n as f64 / circumference;
    (m * m + k * k).sqrt()
}

fn coth(x: f64) -> f64 {
    x.tanh().recip()
}

/// Circumference of the geometry's circle boundary (rim, equator, or
/// cylinder end), the circle the DN modes live on.
fn boundary_circumference(geom: &Geometry) -> Result<f64> {
    match *geom {
        Geometry::Disk { r } | Geometry::Hemisphere { r } => Ok(2.0 * PI * r),
        Geometry::SphericalSector { r, phi } => Ok(2.0 * PI * r * phi.sin()),
        Geometry::Cylinder { l, .. } => Ok(l),
        _ => Err(Error::unsupported(format!(
            "{geom} has no circle boundary to carry a DN mode spectrum"
        ))),
    }
}

fn circle_component(geom: &Geometry) -> Result<BoundaryComponent> {
    match geom {
        Geometry::Disk { .. } | Geometry::SphericalSector { .. } => Ok(BoundaryComponent::Rim),
        Geometry::Hemisphere { .. } => Ok(BoundaryComponent::Equator),
        Geometry::Cylinder { .. } => Ok(BoundaryComponent::Bottom),
        _ => Err(Error::unsupported(format!(
            "{geom} has no circle boundary to carry a DN mode spectrum"
        ))),
    }
}

// ---------------------------------------------------------------------------
// DN eigenvalues
// ---------------------------------------------------------------------------

/// Dirichlet-to-Neumann eigenvalue λ_n on boundary component `b`.
///
/// Closed forms: disk `|n|/R + m I_{|n|+1}(mR)/I_{|n|}(mR)`, cylinder
/// `ω_n coth(Hω_n)`, hemisphere `(2/R) Γ((n+1+α₁)/2)Γ((n+1+α₂)/2) /
/// (Γ((n+α₁)/2)Γ((n+α₂)/2))` with `α₁α₂ = (mR)²`, `α₁+α₂ = 1`. For the
/// interval the index is an endpoint-pair label instead of a mode: `n = 0`
/// is the diagonal entry `m coth(ml)` of the 2×2 endpoint block and `n = 1`
/// the off-diagonal entry `-m/sinh(ml)`.
///
/// The spherical sector has no closed form; use
/// [`dn_eigenvalue_asymptotic`], which this function points at.
pub fn dn_eigenvalue(geom: &Geometry, b: BoundaryComponent, m: f64, n: i64) -> Result<f64> {
    require_mass(m)?;
    check_component(geom, b)?;
    let prec = Precision::default();
    match *geom {
        Geometry::Interval { l } => match n {
            0 => Ok(m * coth(m * l)),
            1 => Ok(-m / (m * l).sinh()),
            _ => Err(Error::domain(
                "interval DN blocks are labelled 0 (diagonal) and 1 (off-diagonal)",
            )),
        },
        Geometry::Cylinder { l, h } => {
            let om = circle_omega(l, m, n);
            Ok(om * coth(h * om))
        }
        Geometry::Disk { r } => {
            let k = n.unsigned_abs() as f64;
            Ok(k / r + m * bessel_i_ratio(k, m * r, prec)?)
        }
        Geometry::Hemisphere { r } => Ok(hemisphere_log_lambda(r, m, n.unsigned_abs())?.exp()),
        Geometry::SphericalSector { .. } => Err(Error::unsupported(
            "spherical sector DN eigenvalues have no closed form; \
             dn_eigenvalue_asymptotic provides the three-term large-n expansion",
        )),
        _ => Err(Error::unsupported(format!("{geom} has no boundary"))),
    }
}

/// Large-`n` DN eigenvalue of the spherical sector (asymptotic only):
///
/// ```text
/// λ_n = ω_n [1 - (mR)² cos φ sin²φ / (2n³) + (mR)²(1 + 3cos 2φ) sin²φ / (8n⁴)],
/// ω_n = √(m² + n²/(R sin φ)²).
/// ```
///
/// At φ = π/2 this reduces to the hemisphere tail `1 - (mR)²/(4n⁴)`; for
/// complementary sectors φ and π-φ the n⁻³ coefficients cancel. Only
/// `|n| ≥ 1` is covered.
pub fn dn_eigenvalue_asymptotic(
    geom: &Geometry,
    b: BoundaryComponent,
    m: f64,
    n: i64,
) -> Result<f64> {
    require_mass(m)?;
    check_component(geom, b)?;
    match *geom {
        Geometry::SphericalSector { r, phi } => {
            let om = circle_omega(boundary_circumference(geom)?, m, n);
            Ok(om * (1.0 + sector_delta(r, phi, m, n)?))
        }
        _ => Err(Error::unsupported(
            "only the spherical sector is asymptotic-only; use dn_eigenvalue",
        )),
    }
}

/// λ_n/ω_n - 1 for a circle-boundary geometry, computed without subtracting
/// nearly equal quantities:
///
/// * cylinder: `coth(Hω) - 1 = 2e^{-2Hω}/(1 - e^{-2Hω})` exactly;
/// * disk: `k/R - ω = -m²/(k/R + ω)` removes the leading cancellation;
/// * hemisphere: `expm1(ln λ - ln ω)`, accurate down to the ~1e-13 absolute
///   floor set by the lnΓ evaluations;
/// * sector: the three-term asymptotic itself (synthetic, `|n| ≥ 1`).
pub fn dn_delta(geom: &Geometry, b: BoundaryComponent, m: f64, n: i64) -> Result<f64> {
    require_mass(m)?;
    check_component(geom, b)?;
    let prec = Precision::default();
    match *geom {
        Geometry::Cylinder { l, h } => {
            let e = (-2.0 * h * circle_omega(l, m, n)).exp();
            Ok(2.0 * e / (1.0 - e))
        }
        Geometry::Disk { r } => {
            let k = n.unsigned_abs() as f64 / r;
            let om = (m * m + k * k).sqrt();
            let ratio = bessel_i_ratio(n.unsigned_abs() as f64, m * r, prec)?;
            Ok((m * ratio - m * m / (k + om)) / om)
        }
        Geometry::Hemisphere { r } => {
            let om = circle_omega(2.0 * PI * r, m, n);
            Ok((hemisphere_log_lambda(r, m, n.unsigned_abs())? - om.ln()).exp_m1())
        }
        Geometry::SphericalSector { r, phi } => sector_delta(r, phi, m, n),
        _ => Err(Error::unsupported(format!(
            "mode ratios need a circle boundary; {geom} has none"
        ))),
    }
}

/// ln λ_n on the hemisphere equator via the Γ-quotient. The two α are a
/// conjugate (or real) pair, so the quotient is real; a residual imaginary
/// part above [`IM_TOL`] means lost symmetry and is refused.
fn hemisphere_log_lambda(r: f64, m: f64, n: u64) -> Result<f64> {
    let prec = Precision::default();
    let (a1, a2) = sphere_alphas(m * m * r * r);
    let nf = Complex64::new(n as f64, 0.0);
    let lg = log_gamma((nf + 1.0 + a1) * 0.5, prec)? + log_gamma((nf + 1.0 + a2) * 0.5, prec)?
        - log_gamma((nf + a1) * 0.5, prec)?
        - log_gamma((nf + a2) * 0.5, prec)?;
    if lg.im.abs() > IM_TOL {
        return Err(Error::domain(format!(
            "hemisphere Γ-quotient lost conjugate symmetry (Im = {:.3e})",
            lg.im
        )));
    }
    Ok(lg.re + (2.0 / r).ln())
}

fn sector_delta(r: f64, phi: f64, m: f64, n: i64) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain(
            "the sector expansion is asymptotic in n and starts at |n| = 1",
        ));
    }
    let z = (m * r) * (m * r);
    let nf = n.unsigned_abs() as f64;
    let s2 = phi.sin() * phi.sin();
    let cubic = -z * phi.cos() * s2 / (2.0 * nf.powi(3));
    let quartic = z * (1.0 + 3.0 * (2.0 * phi).cos()) * s2 / (8.0 * nf.powi(4));
    Ok(cubic + quartic)
}

// ---------------------------------------------------------------------------
// Resolved spectra
// ---------------------------------------------------------------------------

/// One resolved DN mode: eigenvalue, free comparison frequency and their
/// ratio (the ratio from the cancellation-free [`dn_delta`] path).
#[derive(Debug, Clone, Copy)]
pub struct DnMode {
    pub n: i64,
    pub lambda: f64,
    pub omega: f64,
    pub ratio: f64,
}

/// A DN spectrum on a circle boundary, modes n = 0..=n_max (λ_{-n} = λ_n
/// throughout the catalog, so only n ≥ 0 is stored; sector spectra start at
/// n = 1 and are flagged asymptotic).
#[derive(Debug, Clone)]
pub struct DnSpectrum {
    pub geom: Geometry,
    pub component: BoundaryComponent,
    pub mass: f64,
    pub asymptotic: bool,
    pub modes: Vec<DnMode>,
}

impl DnSpectrum {
    pub fn compute(geom: &Geometry, m: f64, n_max: usize) -> Result<DnSpectrum> {
        require_mass(m)?;
        let component = circle_component(geom)?;
        let circumference = boundary_circumference(geom)?;
        let asymptotic = matches!(geom, Geometry::SphericalSector { .. });
        let start = usize::from(asymptotic) as i64;
        let mut modes = Vec::with_capacity(n_max + 1);
        for n in start..=n_max as i64 {
            let omega = circle_omega(circumference, m, n);
            let delta = dn_delta(geom, component, m, n)?;
            let lambda = if asymptotic {
                omega * (1.0 + delta)
            } else {
                dn_eigenvalue(geom, component, m, n)?
            };
            modes.push(DnMode {
                n,
                lambda,
                omega,
                ratio: 1.0 + delta,
            });
        }
        Ok(DnSpectrum {
            geom: *geom,
            component,
            mass: m,
            asymptotic,
            modes,
        })
    }
}

// ---------------------------------------------------------------------------
// Interfaces and κ
// ---------------------------------------------------------------------------

/// The gluing locus: a finite set of points (1D) or a circle (2D). The free
/// comparison operator κ = √(-Δ_Y + m²) lives here.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Interface {
    Points { count: usize },
    Circle { circumference: f64 },
}

/// κ eigenvalue: ω_n = √(m² + (2πn/L)²) on a circle of circumference L; each
/// 1D interface point contributes the constant m.
pub fn kappa_eigenvalue(ifc: &Interface, m: f64, n: i64) -> Result<f64> {
    require_mass(m)?;
    match *ifc {
        Interface::Points { .. } => Ok(m),
        Interface::Circle { circumference } => {
            if circumference > 0.0 {
                Ok(circle_omega(circumference, m, n))
            } else {
                Err(Error::domain("interface circle needs positive circumference"))
            }
        }
    }
}

/// Zeta-regularized determinant of κ: `2 sinh(mL/2)` on the circle, the
/// literal product `m^count` on points. On the circle `ζ_κ(0) = 0`, so
/// `det_reg(2κ) = det_reg(κ)` and this same value normalizes the 2D
/// Fredholm products; in 1D `det(2κ) = (2m)^count` genuinely differs, which
/// is where the explicit ½-per-point rule in [`bfk_residual`] comes from.
pub fn kappa_det_reg(ifc: &Interface, m: f64) -> Result<f64> {
    Ok(kappa_log_det_reg(ifc, m)?.exp())
}

fn kappa_log_det_reg(ifc: &Interface, m: f64) -> Result<f64> {
    require_mass(m)?;
    match *ifc {
        Interface::Points { count } => Ok(count as f64 * m.ln()),
        Interface::Circle { circumference } => {
            if !(circumference > 0.0) {
                return Err(Error::domain("interface circle needs positive circumference"));
            }
            let x = m * circumference;
            // ln 2sinh(x/2) = x/2 + ln(1 - e^{-x}), overflow-free
            Ok(0.5 * x + (-(-x).exp()).ln_1p())
        }
    }
}

// ---------------------------------------------------------------------------
// Glue pairs
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Left,
    Right,
}

/// A matched pair of pieces from the gluing catalog together with its glued
/// total geometry:
///
/// * `Intervals`: [0,l₁] and [0,l₂] joined end to end into Interval(l₁+l₂),
///   one interface point;
/// * `Arcs`: the same two intervals also closed up at the outer ends into
///   Circle(l₁+l₂), two interface points;
/// * `Cylinders`: stacked along the height into Cylinder(l, h₁+h₂), one
///   interface circle;
/// * `Hemispheres`: glued along the equator into Sphere(r).
///
/// Glued coordinates: 1D pieces occupy [0,l₁] and [l₁,l₁+l₂]; cylinder
/// pieces occupy y ∈ [0,h₁] and [h₁,h₁+h₂]; the first hemisphere is the
/// northern chart θ < π/2 of the glued sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GluePair {
    Intervals { l1: f64, l2: f64 },
    Arcs { l1: f64, l2: f64 },
    Cylinders { l: f64, h1: f64, h2: f64 },
    Hemispheres { r: f64 },
}

fn compatible(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}

impl GluePair {
    /// Build a pair from two piece geometries. `close_up` additionally
    /// identifies the outer interval endpoints, turning two arcs into a
    /// circle; it is meaningless for 2D pieces.
    pub fn from_geometries(left: &Geometry, right: &Geometry, close_up: bool) -> Result<GluePair> {
        match (*left, *right) {
            (Geometry::Interval { l: l1 }, Geometry::Interval { l: l2 }) => {
                if close_up {
                    Ok(GluePair::Arcs { l1, l2 })
                } else {
                    Ok(GluePair::Intervals { l1, l2 })
                }
            }
            _ if close_up => Err(Error::unsupported(
                "closing up is a 1D operation (two arcs into a circle)",
            )),
            (Geometry::Cylinder { l: la, h: h1 }, Geometry::Cylinder { l: lb, h: h2 }) => {
                if compatible(la, lb) {
                    Ok(GluePair::Cylinders { l: la, h1, h2 })
                } else {
                    Err(Error::domain(format!(
                        "interface circles must match: circumferences {la} and {lb}"
                    )))
                }
            }
            (Geometry::Hemisphere { r: ra }, Geometry::Hemisphere { r: rb }) => {
                if compatible(ra, rb) {
                    Ok(GluePair::Hemispheres { r: ra })
                } else {
                    Err(Error::domain(format!(
                        "equators must match: radii {ra} and {rb}"
                    )))
                }
            }
            _ => Err(Error::unsupported(format!(
                "no gluing rule for {left} + {right}; supported: interval+interval \
                 (open or closed up), cylinder+cylinder, hemisphere+hemisphere"
            ))),
        }
    }

    pub fn left(&self) -> Geometry {
        self.piece(Side::Left)
    }

    pub fn right(&self) -> Geometry {
        self.piece(Side::Right)
    }

    fn piece(&self, side: Side) -> Geometry {
        match (*self, side) {
            (GluePair::Intervals { l1, .. } | GluePair::Arcs { l1, .. }, Side::Left) => {
                Geometry::Interval { l: l1 }
            }
            (GluePair::Intervals { l2, .. } | GluePair::Arcs { l2, .. }, Side::Right) => {
                Geometry::Interval { l: l2 }
            }
            (GluePair::Cylinders { l, h1, .. }, Side::Left) => Geometry::Cylinder { l, h: h1 },
            (GluePair::Cylinders { l, h2, .. }, Side::Right) => Geometry::Cylinder { l, h: h2 },
            (GluePair::Hemispheres { r }, _) => Geometry::Hemisphere { r },
        }
    }

    pub fn glued(&self) -> Geometry {
        match *self {
            GluePair::Intervals { l1, l2 } => Geometry::Interval { l: l1 + l2 },
            GluePair::Arcs { l1, l2 } => Geometry::Circle { l: l1 + l2 },
            GluePair::Cylinders { l, h1, h2 } => Geometry::Cylinder { l, h: h1 + h2 },
            GluePair::Hemispheres { r } => Geometry::Sphere { r },
        }
    }

    pub fn interface(&self) -> Interface {
        match *self {
            GluePair::Intervals { .. } => Interface::Points { count: 1 },
            GluePair::Arcs { .. } => Interface::Points { count: 2 },
            GluePair::Cylinders { l, .. } => Interface::Circle { circumference: l },
            GluePair::Hemispheres { r } => Interface::Circle {
                circumference: 2.0 * PI * r,
            },
        }
    }

    fn is_two_dimensional(&self) -> bool {
        matches!(self, GluePair::Cylinders { .. } | GluePair::Hemispheres { .. })
    }

    /// Which piece a glued-coordinate point belongs to, and its coordinates
    /// in that piece's own chart. Points on the interface are refused: the
    /// gluing formulas need interior points.
    fn locate(&self, p: Point) -> Result<(Side, Point)> {
        let on_interface = || {
            Err(Error::domain(
                "point sits on the interface; gluing formulas need interior points".to_string(),
            ))
        };
        match *self {
            GluePair::Intervals { l1, l2 } => {
                let lt = l1 + l2;
                if !(p.x > 0.0 && p.x < lt) {
                    Err(Error::domain(format!("x = {} outside the glued interval (0, {lt})", p.x)))
                } else if p.x == l1 {
                    on_interface()
                } else if p.x < l1 {
                    Ok((Side::Left, p))
                } else {
                    Ok((Side::Right, Point::new(p.x - l1, 0.0)))
                }
            }
            GluePair::Arcs { l1, l2 } => {
                let lt = l1 + l2;
                let x = p.x.rem_euclid(lt);
                if x == 0.0 || x == l1 {
                    on_interface()
                } else if x < l1 {
                    Ok((Side::Left, Point::new(x, 0.0)))
                } else {
                    Ok((Side::Right, Point::new(x - l1, 0.0)))
                }
            }
            GluePair::Cylinders { h1, h2, .. } => {
                if !(p.y > 0.0 && p.y < h1 + h2) {
                    Err(Error::domain(format!(
                        "y = {} outside the glued cylinder (0, {})",
                        p.y,
                        h1 + h2
                    )))
                } else if p.y == h1 {
                    on_interface()
                } else if p.y < h1 {
                    Ok((Side::Left, p))
                } else {
                    Ok((Side::Right, Point::new(p.x, p.y - h1)))
                }
            }
            GluePair::Hemispheres { .. } => {
                let theta = p.x;
                if !(0.0..=PI).contains(&theta) {
                    Err(Error::domain(format!(
                        "colatitude {theta} outside the glued sphere chart [0, π]"
                    )))
                } else if theta == PI / 2.0 {
                    on_interface()
                } else if theta < PI / 2.0 {
                    Ok((Side::Left, p))
                } else {
                    Ok((Side::Right, Point::new(PI - theta, p.y)))
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Interface determinants
// ---------------------------------------------------------------------------

/// Truncated Fredholm data for det_reg(D_L + D_R).
#[derive(Debug, Clone, Copy)]
pub struct InterfaceDet {
    /// ln det_reg(D_L + D_R), tail correction already added.
    pub log_value: f64,
    /// Fitted power-law value of Σ_{|n| > n_max} ln r_n.
    pub tail_correction: f64,
    /// Magnitude bound on what the truncation may still be missing.
    pub tail_estimate: f64,
}

/// Regularized interface determinant det_reg(D_L + D_R).
///
/// 1D pairs are literal: `m(coth ml₁ + coth ml₂)` for one point, the 2×2
/// endpoint-block determinant `4m² sinh²(m(l₁+l₂)/2)/(sinh ml₁ sinh ml₂)`
/// for two. 2D pairs use the factorization `det_reg(2κ) · Π_n r_n` truncated
/// at `n_max` with a fitted power-law tail; see [`det_dn_log`] for the tail
/// data. A tail too large (or too ragged) to fit is an error, not a silent
/// truncation.
pub fn det_dn(pair: &GluePair, m: f64, n_max: usize) -> Result<f64> {
    Ok(det_dn_log(pair, m, n_max)?.log_value.exp())
}

/// Log form of [`det_dn`] with the tail correction and its estimate.
pub fn det_dn_log(pair: &GluePair, m: f64, n_max: usize) -> Result<InterfaceDet> {
    require_mass(m)?;
    match *pair {
        GluePair::Intervals { l1, l2 } => Ok(InterfaceDet {
            log_value: (m * (coth(m * l1) + coth(m * l2))).ln(),
            tail_correction: 0.0,
            tail_estimate: 0.0,
        }),
        GluePair::Arcs { l1, l2 } => {
            // det [[d, e], [e, d]] = (d - e)(d + e), both factors positive
            // since coth > csch
            let d = m * (coth(m * l1) + coth(m * l2));
            let e = -m * ((m * l1).sinh().recip() + (m * l2).sinh().recip());
            Ok(InterfaceDet {
                log_value: (d - e).ln() + (d + e).ln(),
                tail_correction: 0.0,
                tail_estimate: 0.0,
            })
        }
        GluePair::Cylinders { .. } | GluePair::Hemispheres { .. } => {
            let mut gs = Vec::with_capacity(n_max + 1);
            for n in 0..=n_max as i64 {
                gs.push(pair_delta(pair, m, n)?.ln_1p());
            }
            let partial = gs[0] + 2.0 * gs[1..].iter().sum::<f64>();
            let (tail_correction, tail_estimate) = fredholm_tail(&gs)?;
            let kl = kappa_log_det_reg(&pair.interface(), m)?;
            Ok(InterfaceDet {
                log_value: kl + partial + tail_correction,
                tail_correction,
                tail_estimate,
            })
        }
    }
}

/// (δ_nᴸ + δ_nᴿ)/2 = r_n - 1 for a 2D pair, via the stable per-piece deltas.
fn pair_delta(pair: &GluePair, m: f64, n: i64) -> Result<f64> {
    match *pair {
        GluePair::Cylinders { l, h1, h2 } => {
            let dl = dn_delta(&Geometry::Cylinder { l, h: h1 }, BoundaryComponent::Top, m, n)?;
            let dr = dn_delta(&Geometry::Cylinder { l, h: h2 }, BoundaryComponent::Bottom, m, n)?;
            Ok(0.5 * (dl + dr))
        }
        GluePair::Hemispheres { r } => {
            dn_delta(&Geometry::Hemisphere { r }, BoundaryComponent::Equator, m, n)
        }
        _ => Err(Error::domain("mode products arise only for 2D pairs")),
    }
}

/// Tail of Σ_{n∈ℤ} g_n past |n| = n_max for g_n = ln r_n.
///
/// Live tails get a least-squares power law `|g_n| ~ C n^p` over the top
/// half of the window, integrated past the cutoff (`Σ_{n>N} C n^p ≈
/// C N^{p+1}/(-1-p)`, doubled for ±n); the returned estimate is the
/// correction magnitude. Tails already at the rounding floor are bounded by
/// a geometric extrapolation of the last two terms (cylinder decay is
/// e^{-4πHn/L}); fully dead tails contribute nothing resolvable.
fn fredholm_tail(gs: &[f64]) -> Result<(f64, f64)> {
    let n_max = gs.len() - 1;
    let g_last = gs[n_max];
    if g_last.abs() <= DEAD_FLOOR {
        return Ok((0.0, 0.0));
    }
    if g_last.abs() <= ALIVE_FLOOR {
        let g_prev = gs[n_max - 1];
        let ratio = (g_last / g_prev).abs();
        let estimate = if g_prev != 0.0 && ratio < 0.95 {
            // geometric bound with a factor-2 safety margin
            4.0 * g_last.abs() * ratio / (1.0 - ratio)
        } else {
            g_last.abs() * n_max as f64
        };
        return Ok((0.0, estimate));
    }
    let lo = (n_max / 2).max(1);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (n, &g) in gs.iter().enumerate().take(n_max + 1).skip(lo) {
        if g.abs() > ALIVE_FLOOR {
            xs.push((n as f64).ln());
            ys.push(g.abs().ln());
        }
    }
    if xs.len() < 4 {
        return Err(Error::NoConvergence {
            context: "interface determinant tail fit needs at least 4 live modes \
                      in the top half of the window; raise n_max"
                .into(),
            terms: n_max,
        });
    }
    let (intercept, slope) = linfit(&xs, &ys);
    if slope > -1.5 {
        return Err(Error::domain(format!(
            "fitted mode-decay exponent {slope:.2} is too shallow for a trustworthy tail"
        )));
    }
    let nf = n_max as f64;
    let correction =
        g_last.signum() * 2.0 * intercept.exp() * nf.powf(slope + 1.0) / (-1.0 - slope);
    if correction.abs() > TAIL_CAP {
        return Err(Error::domain(format!(
            "truncation tail {correction:.3e} exceeds the correction cap; raise n_max"
        )));
    }
    Ok((correction, correction.abs()))
}

/// |ln det(Δ_Σ + m²) − ln det_L − ln det_R − ln det(c·D)| for a catalog pair:
/// the determinant-gluing defect. The constant is c = 1 in 2D and c = ½ per
/// interface point in 1D (so det(½D) and det(¼·2×2-block) respectively).
pub fn bfk_residual(pair: &GluePair, m: f64, n_max: usize) -> Result<f64> {
    let glued = zetareg::logdet(&pair.glued(), m)?;
    let left = zetareg::logdet(&pair.left(), m)?;
    let right = zetareg::logdet(&pair.right(), m)?;
    let det = det_dn_log(pair, m, n_max)?;
    let half_points = match pair.interface() {
        Interface::Points { count } => count as f64 * 0.5f64.ln(),
        Interface::Circle { .. } => 0.0,
    };
    Ok((glued - left - right - det.log_value - half_points).abs())
}

// ---------------------------------------------------------------------------
// Interface kernels and Green's function gluing
// ---------------------------------------------------------------------------

/// The interface kernel K = (D_L + D_R)⁻¹ in the representation the
/// interface dictates. All entries are positive.
#[derive(Debug, Clone)]
pub enum InterfaceKernel {
    /// One 1D point: 1/(D_L + D_R).
    Scalar1D(f64),
    /// Two 1D points, indexed (outer glue point, inner glue point).
    Matrix1D([[f64; 2]; 2]),
    /// Circle modes K_n = 1/(λ_nᴸ + λ_nᴿ), n = 0..=n_max.
    CircleModes(Vec<f64>),
}

pub fn interface_kernel(pair: &GluePair, m: f64, n_max: usize) -> Result<InterfaceKernel> {
    require_mass(m)?;
    match *pair {
        GluePair::Intervals { l1, l2 } => Ok(InterfaceKernel::Scalar1D(
            (m * (coth(m * l1) + coth(m * l2))).recip(),
        )),
        GluePair::Arcs { l1, l2 } => {
            let d = m * (coth(m * l1) + coth(m * l2));
            let e = -m * ((m * l1).sinh().recip() + (m * l2).sinh().recip());
            let det = (d - e) * (d + e);
            Ok(InterfaceKernel::Matrix1D([
                [d / det, -e / det],
                [-e / det, d / det],
            ]))
        }
        GluePair::Cylinders { .. } | GluePair::Hemispheres { .. } => {
            let circumference = match pair.interface() {
                Interface::Circle { circumference } => circumference,
                Interface::Points { .. } => unreachable!("2D pairs glue along circles"),
            };
            let mut ks = Vec::with_capacity(n_max + 1);
            for n in 0..=n_max as i64 {
                let om = circle_omega(circumference, m, n);
                ks.push((2.0 * om * (1.0 + pair_delta(pair, m, n)?)).recip());
            }
            Ok(InterfaceKernel::CircleModes(ks))
        }
    }
}

/// sinh(ωy)/sinh(ωh) for 0 ≤ y ≤ h without overflow.
fn sinh_ratio(omega: f64, y: f64, h: f64) -> f64 {
    let num = -(-2.0 * omega * y).exp_m1();
    let den = -(-2.0 * omega * h).exp_m1();
    (-omega * (h - y)).exp() * num / den
}

/// Fourier amplitudes â(n) = ∫_Y f(s) e^{-2πins/ℓ} ds, n = 0..=n_modes, of
/// the piece's interface kernel f = -∂_ν G(p, ·) (f is real, so
/// â(-n) = conj â(n)). Cylinder amplitudes are analytic mode ratios; equator
/// amplitudes come from a 256-point DFT of the hemisphere Poisson kernel.
fn boundary_amplitudes(
    pair: &GluePair,
    m: f64,
    side: Side,
    p: Point,
    n_modes: usize,
) -> Result<Vec<Complex64>> {
    match *pair {
        GluePair::Cylinders { l, h1, h2 } => {
            // distance from the far (Dirichlet) end toward the interface
            let (y, h) = match side {
                Side::Left => (p.y, h1),
                Side::Right => (h2 - p.y, h2),
            };
            let mut amps = Vec::with_capacity(n_modes + 1);
            for n in 0..=n_modes as i64 {
                let om = circle_omega(l, m, n);
                let phase = -2.0 * PI * n as f64 * p.x / l;
                amps.push(Complex64::from_polar(sinh_ratio(om, y, h), phase));
            }
            Ok(amps)
        }
        GluePair::Hemispheres { r } => {
            let hemi = Geometry::Hemisphere { r };
            let mut f = Vec::with_capacity(GLUE_GRID);
            for j in 0..GLUE_GRID {
                let psi = 2.0 * PI * j as f64 / GLUE_GRID as f64;
                f.push(hemi.poisson_kernel(p, BoundaryComponent::Equator, psi, m)?);
            }
            let mut amps = Vec::with_capacity(n_modes + 1);
            let w = 2.0 * PI * r / GLUE_GRID as f64;
            for n in 0..=n_modes {
                let mut acc = Complex64::new(0.0, 0.0);
                for (j, &fj) in f.iter().enumerate() {
                    let arg = -2.0 * PI * (n * j % GLUE_GRID) as f64 / GLUE_GRID as f64;
                    acc += fj * Complex64::from_polar(1.0, arg);
                }
                amps.push(w * acc);
            }
            Ok(amps)
        }
        _ => Err(Error::domain("mode amplitudes arise only for 2D pairs")),
    }
}

/// The interface double sum ΣΣ ∂νG(p,·) K ∂νG(·,q) in whichever
/// representation the pair uses.
fn interface_correction(
    pair: &GluePair,
    m: f64,
    sp: Side,
    lp: Point,
    sq: Side,
    lq: Point,
    n_max: usize,
) -> Result<f64> {
    match interface_kernel(pair, m, n_max)? {
        InterfaceKernel::Scalar1D(k) => {
            Ok(point_amplitude(pair, m, sp, lp)? * k * point_amplitude(pair, m, sq, lq)?)
        }
        InterfaceKernel::Matrix1D(kk) => {
            let vp = endpoint_amplitudes(pair, m, sp, lp)?;
            let vq = endpoint_amplitudes(pair, m, sq, lq)?;
            Ok(vp[0] * (kk[0][0] * vq[0] + kk[0][1] * vq[1])
                + vp[1] * (kk[1][0] * vq[0] + kk[1][1] * vq[1]))
        }
        InterfaceKernel::CircleModes(ks) => {
            let n_modes = n_max.min(GLUE_GRID / 2 - 1);
            let ap = boundary_amplitudes(pair, m, sp, lp, n_modes)?;
            let aq = boundary_amplitudes(pair, m, sq, lq, n_modes)?;
            let circumference = match pair.interface() {
                Interface::Circle { circumference } => circumference,
                Interface::Points { .. } => unreachable!("2D pairs glue along circles"),
            };
            let mut sum = ks[0] * (ap[0] * aq[0].conj()).re;
            for n in 1..=n_modes {
                sum += 2.0 * ks[n] * (ap[n] * aq[n].conj()).re;
            }
            Ok(sum / circumference)
        }
    }
}

/// Poisson kernel of an interval piece toward the single interface point.
fn point_amplitude(pair: &GluePair, m: f64, side: Side, p: Point) -> Result<f64> {
    let piece = pair.piece(side);
    let toward = match side {
        Side::Left => BoundaryComponent::Right,
        Side::Right => BoundaryComponent::Left,
    };
    piece.poisson_kernel(p, toward, 0.0, m)
}

/// Poisson kernels of an arc piece toward the two glue points (outer, inner).
fn endpoint_amplitudes(pair: &GluePair, m: f64, side: Side, p: Point) -> Result<[f64; 2]> {
    let piece = pair.piece(side);
    // the outer point is Left of the first arc and Right of the second
    let (outer, inner) = match side {
        Side::Left => (BoundaryComponent::Left, BoundaryComponent::Right),
        Side::Right => (BoundaryComponent::Right, BoundaryComponent::Left),
    };
    Ok([
        piece.poisson_kernel(p, outer, 0.0, m)?,
        piece.poisson_kernel(p, inner, 0.0, m)?,
    ])
}

/// |G_Σ(p,q) − [G_piece(p,q)·δ_same + ΣΣ ∂νG K ∂νG]|: the Green's function
/// gluing defect at two interior points of the glued geometry (glued
/// coordinates). Coincident 2D points are refused; [`tadpole_glue`] handles
/// the regularized diagonal.
pub fn greens_glue_residual(
    pair: &GluePair,
    m: f64,
    p: Point,
    q: Point,
    n_max: usize,
) -> Result<f64> {
    require_mass(m)?;
    if pair.is_two_dimensional() && p.x == q.x && p.y == q.y {
        return Err(Error::domain(
            "coincident points: the 2D Green's function diverges; \
             tadpole_glue handles the regularized diagonal",
        ));
    }
    let (sp, lp) = pair.locate(p)?;
    let (sq, lq) = pair.locate(q)?;
    let piece = if sp == sq {
        pair.piece(sp).green(lp, lq, m)?
    } else {
        0.0
    };
    let correction = interface_correction(pair, m, sp, lp, sq, lq, n_max)?;
    let glued = pair.glued().green(p, q, m)?;
    Ok((glued - piece - correction).abs())
}

// ---------------------------------------------------------------------------
// Tadpole gluing
// ---------------------------------------------------------------------------

/// Which regularized diagonal a piece carries into the gluing formula.
/// `Zero` isolates the pure interface correction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TadpoleRule {
    Zero,
    ZetaReg,
    PointSplit,
}

/// A per-piece tadpole assignment: a geometry and the regularization rule
/// used for its diagonal.
#[derive(Debug, Clone, Copy)]
pub struct TadpoleField {
    pub geom: Geometry,
    pub rule: TadpoleRule,
}

impl TadpoleField {
    pub fn new(geom: Geometry, rule: TadpoleRule) -> Self {
        TadpoleField { geom, rule }
    }

    /// The piece tadpole at an interior point of the piece's own chart.
    pub fn eval(&self, m: f64, p: Point) -> Result<f64> {
        match self.rule {
            TadpoleRule::Zero => Ok(0.0),
            TadpoleRule::ZetaReg => zetareg::tau(&self.geom, m, p),
            TadpoleRule::PointSplit => zetareg::tau_split(&self.geom, m, p),
        }
    }
}

/// The glued tadpole (τ_L * τ_R)(p) = τ_piece(p) + ΣΣ ∂νG(p,·) K ∂νG(·,p)
/// at a point `p` of the glued geometry (interior to one piece). When the
/// piece rule matches the glued geometry's regularization, this equals the
/// glued tadpole: the divergent parts live entirely in the pieces and the
/// interface correction is finite.
pub fn tadpole_glue(
    left: &TadpoleField,
    right: &TadpoleField,
    m: f64,
    p: Point,
    n_max: usize,
) -> Result<f64> {
    require_mass(m)?;
    let pair = GluePair::from_geometries(&left.geom, &right.geom, false)?;
    let (side, local) = pair.locate(p)?;
    let field = match side {
        Side::Left => left,
        Side::Right => right,
    };
    let piece = field.eval(m, local)?;
    let correction = interface_correction(&pair, m, side, local, side, local, n_max)?;
    Ok(piece + correction)
}

// ---------------------------------------------------------------------------
// Decay orders of δ = κ⁻¹D − 1
// ---------------------------------------------------------------------------

/// Result of the log-log decay fit of δ_n = λ_n/ω_n − 1.
#[derive(Debug, Clone, Copy)]
pub struct DeltaOrder {
    /// Least-squares slope of ln|δ_n| against ln n; `None` when the δ_n die
    /// out too fast to fit.
    pub slope: Option<f64>,
    /// Set when |δ| has dropped below 1e-12 by mode 20 (or below the fit
    /// floor throughout the window): no power law is visible.
    pub superpolynomial: bool,
    /// Sector spectra are synthetic (three-term asymptotic), not closed form.
    pub synthetic: bool,
}

/// Fit the decay order of δ_n over n ∈ [n_lo, n_hi]. Modes with
/// |δ| ≤ 1e-15 are excluded from the fit.
pub fn delta_order_fit(geom: &Geometry, m: f64, n_lo: usize, n_hi: usize) -> Result<DeltaOrder> {
    require_mass(m)?;
    if n_lo < 1 || n_hi < n_lo + 3 {
        return Err(Error::domain(
            "decay fit needs a window of at least 4 modes starting at n >= 1",
        ));
    }
    let b = circle_component(geom)?;
    let synthetic = matches!(geom, Geometry::SphericalSector { .. });
    let probe = dn_delta(geom, b, m, SUPERPOLY_PROBE.min(n_hi) as i64)?;
    if probe.abs() < SUPERPOLY_EPS {
        return Ok(DeltaOrder {
            slope: None,
            superpolynomial: true,
            synthetic,
        });
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for n in n_lo..=n_hi {
        let d = dn_delta(geom, b, m, n as i64)?;
        if d.abs() > FIT_FLOOR {
            xs.push((n as f64).ln());
            ys.push(d.abs().ln());
        }
    }
    if xs.len() < 4 {
        return Ok(DeltaOrder {
            slope: None,
            superpolynomial: true,
            synthetic,
        });
    }
    let (_, slope) = linfit(&xs, &ys);
    Ok(DeltaOrder {
        slope: Some(slope),
        superpolynomial: false,
        synthetic,
    })
}

/// max_{|n| ≤ n_max} |λ_n/ω_n − 1|, the truncated operator norm of
/// δ = κ⁻¹D − 1 (the catalog δ_n decay in |n|, so the max sits at small n).
pub fn delta_sup_norm(geom: &Geometry, m: f64, n_max: usize) -> Result<f64> {
    let b = circle_component(geom)?;
    let start = usize::from(matches!(geom, Geometry::SphericalSector { .. }));
    let mut worst: f64 = 0.0;
    for n in start..=n_max {
        worst = worst.max(dn_delta(geom, b, m, n as i64)?.abs());
    }
    Ok(worst)
}

/// Smallest cylinder height H at which ‖δ‖ = sup_n |coth(Hω_n) − 1| drops
/// to 1, found by bisection on the truncated sup norm. Analytically the sup
/// sits at n = 0, so the threshold is arccoth(2)/m.
pub fn cylinder_delta_threshold(l: f64, m: f64) -> Result<f64> {
    require_mass(m)?;
    if !(l > 0.0) {
        return Err(Error::domain("circumference must be positive"));
    }
    let sup = |h: f64| delta_sup_norm(&Geometry::Cylinder { l, h }, m, 32);
    let (mut lo, mut hi) = (1e-3 / m, 64.0 / m);
    if sup(lo)? <= 1.0 || sup(hi)? > 1.0 {
        return Err(Error::domain("threshold bracket failed; mass out of range"));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sup(mid)? > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
