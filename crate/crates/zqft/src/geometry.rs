//! The geometry catalog: one- and two-dimensional constant-curvature
//! spaces with massive-Laplacian heat traces, Green's functions and
//! boundary Poisson kernels.
//!
//! Coordinate conventions for [`Point`]:
//! - interval of length l: `x` ∈ [0, l], `y` ignored
//! - circle of circumference L: `x` = arclength mod L, `y` ignored
//! - torus L₁ × L₂: (`x`, `y`) periodic
//! - cylinder (circumference L, height H): `x` periodic, `y` ∈ [0, H],
//!   Dirichlet boundary circles at y = 0 and y = H
//! - sphere of radius R: `x` = colatitude θ ∈ [0, π], `y` = azimuth ψ
//! - hemisphere of radius R: same chart with θ ∈ [0, π/2], Dirichlet
//!   equator at θ = π/2

use crate::constants::Precision;
use crate::specfun::{bessel_k, hyp2f1_pair, hyp2f1_pair_auto, theta3};
use crate::{Error, Result};

use std::f64::consts::PI;

/// A point in the chart of one of the catalog geometries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

/// A connected boundary component of a geometry with boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryComponent {
    /// Interval endpoint x = 0.
    Left,
    /// Interval endpoint x = l.
    Right,
    /// Cylinder circle y = 0.
    Bottom,
    /// Cylinder circle y = H.
    Top,
    /// Hemisphere equator θ = π/2.
    Equator,
    /// Boundary circle of a disk (r = R) or spherical sector (θ = φ).
    Rim,
}

/// The supported geometries. Lengths and radii are strictly positive; a
/// spherical sector (geodesic cap of opening colatitude φ) needs 0 < φ < π.
///
/// Disk and sector are boundary-spectrum kinds: their Dirichlet-to-Neumann
/// data is available downstream, but heat traces and Green's functions for
/// them are out of scope and the corresponding methods return `Unsupported`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Geometry {
    Interval { l: f64 },
    Circle { l: f64 },
    Torus { l1: f64, l2: f64 },
    Cylinder { l: f64, h: f64 },
    Disk { r: f64 },
    Sphere { r: f64 },
    Hemisphere { r: f64 },
    SphericalSector { r: f64, phi: f64 },
}

impl std::fmt::Display for Geometry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Geometry::Interval { l } => write!(f, "interval:l={l}"),
            Geometry::Circle { l } => write!(f, "circle:l={l}"),
            Geometry::Torus { l1, l2 } => write!(f, "torus:l1={l1},l2={l2}"),
            Geometry::Cylinder { l, h } => write!(f, "cylinder:l={l},h={h}"),
            Geometry::Disk { r } => write!(f, "disk:r={r}"),
            Geometry::Sphere { r } => write!(f, "sphere:r={r}"),
            Geometry::Hemisphere { r } => write!(f, "hemisphere:r={r}"),
            Geometry::SphericalSector { r, phi } => write!(f, "sector:r={r},phi={phi}"),
        }
    }
}

fn parse_params(s: &str) -> Result<Vec<(String, f64)>> {
    let mut out = Vec::new();
    for piece in s.split(',') {
        let piece = piece.trim();
        if piece.is_empty() {
            continue;
        }
        let (k, v) = piece
            .split_once('=')
            .ok_or_else(|| Error::parse(format!("expected key=value, got '{piece}'")))?;
        let val: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::parse(format!("bad numeric value '{v}'")))?;
        if !(val > 0.0) || !val.is_finite() {
            return Err(Error::parse(format!(
                "geometry parameter {k}={v} must be positive and finite"
            )));
        }
        out.push((k.trim().to_ascii_lowercase(), val));
    }
    Ok(out)
}

fn lookup(params: &[(String, f64)], key: &str) -> Result<f64> {
    params
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| *v)
        .ok_or_else(|| Error::parse(format!("missing geometry parameter '{key}'")))
}

impl Geometry {
    /// Parse a geometry description like `interval:l=1`, `torus:l1=2,l2=1`,
    /// `cylinder:L=6.2832,H=1`, `sphere:R=1`. Names and keys are
    /// case-insensitive.
    pub fn parse(s: &str) -> Result<Geometry> {
        let (name, rest) = match s.split_once(':') {
            Some((n, r)) => (n, r),
            None => (s, ""),
        };
        let params = parse_params(rest)?;
        let geom = match name.trim().to_ascii_lowercase().as_str() {
            "interval" => Geometry::Interval {
                l: lookup(&params, "l")?,
            },
            "circle" => Geometry::Circle {
                l: lookup(&params, "l")?,
            },
            "torus" => Geometry::Torus {
                l1: lookup(&params, "l1")?,
                l2: lookup(&params, "l2")?,
            },
            "cylinder" => Geometry::Cylinder {
                l: lookup(&params, "l")?,
                h: lookup(&params, "h")?,
            },
            "disk" => Geometry::Disk {
                r: lookup(&params, "r")?,
            },
            "sphere" => Geometry::Sphere {
                r: lookup(&params, "r")?,
            },
            "hemisphere" => Geometry::Hemisphere {
                r: lookup(&params, "r")?,
            },
            "sector" | "sphericalsector" => {
                let phi = lookup(&params, "phi")?;
                if !(phi < PI) {
                    return Err(Error::parse(format!(
                        "sector opening angle phi={phi} must lie in (0, pi)"
                    )));
                }
                Geometry::SphericalSector {
                    r: lookup(&params, "r")?,
                    phi,
                }
            }
            other => {
                return Err(Error::parse(format!(
                    "unknown geometry '{other}' (expected interval, circle, torus, cylinder, disk, sphere, hemisphere or sector)"
                )))
            }
        };
        Ok(geom)
    }

    /// Riemannian volume (length in 1D, area in 2D).
    pub fn volume(&self) -> f64 {
        match *self {
            Geometry::Interval { l } => l,
            Geometry::Circle { l } => l,
            Geometry::Torus { l1, l2 } => l1 * l2,
            Geometry::Cylinder { l, h } => l * h,
            Geometry::Disk { r } => PI * r * r,
            Geometry::Sphere { r } => 4.0 * PI * r * r,
            Geometry::Hemisphere { r } => 2.0 * PI * r * r,
            Geometry::SphericalSector { r, phi } => 2.0 * PI * r * r * (1.0 - phi.cos()),
        }
    }

    /// Gauss curvature (constant for every catalog geometry).
    pub fn curvature(&self) -> f64 {
        match *self {
            Geometry::Sphere { r }
            | Geometry::Hemisphere { r }
            | Geometry::SphericalSector { r, .. } => 1.0 / (r * r),
            _ => 0.0,
        }
    }

    /// Scalar curvature: twice the Gauss curvature on surfaces, zero for
    /// the flat kinds.
    pub fn scalar_curvature(&self) -> f64 {
        2.0 * self.curvature()
    }

    pub fn dim(&self) -> usize {
        match self {
            Geometry::Interval { .. } | Geometry::Circle { .. } => 1,
            _ => 2,
        }
    }

    pub fn boundary_components(&self) -> Vec<BoundaryComponent> {
        match self {
            Geometry::Interval { .. } => vec![BoundaryComponent::Left, BoundaryComponent::Right],
            Geometry::Cylinder { .. } => vec![BoundaryComponent::Bottom, BoundaryComponent::Top],
            Geometry::Hemisphere { .. } => vec![BoundaryComponent::Equator],
            Geometry::Disk { .. } | Geometry::SphericalSector { .. } => {
                vec![BoundaryComponent::Rim]
            }
            _ => vec![],
        }
    }

    /// Trace of e^{tΔ} for the massless Laplacian (Dirichlet where there is
    /// boundary). The mass enters downstream as a factor e^{-m²t}.
    pub fn heat_trace(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::domain(format!("heat_trace needs t > 0, got {t}")));
        }
        let prec = Precision::default();
        match *self {
            // Dirichlet spectrum (nπ/l)²: (ϑ(0, πt/l²) - 1)/2
            Geometry::Interval { l } => Ok(0.5 * (theta3(0.0, PI * t / (l * l), prec)? - 1.0)),
            // spectrum (2πn/L)², n ∈ Z: ϑ(0, 4πt/L²)
            Geometry::Circle { l } => theta3(0.0, 4.0 * PI * t / (l * l), prec),
            Geometry::Torus { l1, l2 } => Ok(theta3(0.0, 4.0 * PI * t / (l1 * l1), prec)?
                * theta3(0.0, 4.0 * PI * t / (l2 * l2), prec)?),
            Geometry::Cylinder { l, h } => Ok(theta3(0.0, 4.0 * PI * t / (l * l), prec)?
                * 0.5
                * (theta3(0.0, PI * t / (h * h), prec)? - 1.0)),
            Geometry::Sphere { r } => Ok(sphere_theta_sum(t / (r * r))),
            Geometry::Hemisphere { r } => Ok(hemisphere_theta_sum(t / (r * r))),
            Geometry::Disk { .. } | Geometry::SphericalSector { .. } => Err(Error::unsupported(
                format!("heat trace for {self} needs the Dirichlet spectrum, which has no closed form here; only boundary (DN) data is supported"),
            )),
        }
    }

    /// Small-t heat trace coefficients (c₁, c_h, c₀) of
    /// Θ(t) ~ c₁/t + c_h/√t + c₀. These are the Weyl coefficients
    /// area/4π, -|∂|/(8√π) and χ/6 (with the 1D interval/circle analogues),
    /// defined for every kind even where the trace itself is not computed.
    pub fn heat_coefficients(&self) -> (f64, f64, f64) {
        let sp = PI.sqrt();
        match *self {
            Geometry::Interval { l } => (0.0, l / (2.0 * sp), -0.5),
            Geometry::Circle { l } => (0.0, l / (2.0 * sp), 0.0),
            Geometry::Torus { l1, l2 } => (l1 * l2 / (4.0 * PI), 0.0, 0.0),
            Geometry::Cylinder { l, h } => (l * h / (4.0 * PI), -l / (4.0 * sp), 0.0),
            Geometry::Disk { r } => (0.25 * r * r, -sp * r / 4.0, 1.0 / 6.0),
            Geometry::Sphere { r } => (r * r, 0.0, 1.0 / 3.0),
            Geometry::Hemisphere { r } => (0.5 * r * r, -sp * r / 4.0, 1.0 / 6.0),
            Geometry::SphericalSector { r, phi } => (
                0.5 * r * r * (1.0 - phi.cos()),
                -sp * r * phi.sin() / 4.0,
                1.0 / 6.0,
            ),
        }
    }

    /// Pointwise diagonal θ_Δ(p, t) of the heat kernel of e^{tΔ} (Dirichlet
    /// where there is boundary; the mass enters downstream as e^{-m²t}).
    /// Image-charge and spectral representations are switched at the
    /// modular point of each factor.
    pub fn heat_trace_diag(&self, p: Point, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::domain(format!(
                "heat_trace_diag needs t > 0, got {t}"
            )));
        }
        let prec = Precision::default();
        match *self {
            Geometry::Interval { l } => {
                check_interval_coord(p.x, l)?;
                interval_diag_kernel(l, p.x, t)
            }
            // homogeneous kinds: the diagonal is the trace per unit volume
            Geometry::Circle { l } => Ok(theta3(0.0, 4.0 * PI * t / (l * l), prec)? / l),
            Geometry::Torus { l1, l2 } => Ok(theta3(0.0, 4.0 * PI * t / (l1 * l1), prec)?
                * theta3(0.0, 4.0 * PI * t / (l2 * l2), prec)?
                / (l1 * l2)),
            Geometry::Cylinder { l, h } => Ok(theta3(0.0, 4.0 * PI * t / (l * l), prec)? / l
                * interval_diag_kernel(h, p.y, t)?),
            Geometry::Sphere { r } => Ok(sphere_theta_sum(t / (r * r)) / (4.0 * PI * r * r)),
            Geometry::Hemisphere { r } => {
                check_hemisphere_colatitude(p.x)?;
                // diagonal of K_sph(p,q) - K_sph(p,q̂): the image sits at
                // geodesic angle π - 2θ from p
                let s = t / (r * r);
                let diag = sphere_theta_sum(s) - sphere_offdiag_sum((PI - 2.0 * p.x).cos(), s);
                Ok(diag / (4.0 * PI * r * r))
            }
            Geometry::Disk { .. } | Geometry::SphericalSector { .. } => Err(Error::unsupported(
                format!("heat kernel diagonal for {self} is not available; only boundary (DN) data is supported"),
            )),
        }
    }

    /// Green's function of -Δ + m² (Dirichlet on boundaries). Diverges
    /// logarithmically at coincident points in 2D; the 1D kernels are
    /// finite everywhere.
    pub fn green(&self, p: Point, q: Point, m: f64) -> Result<f64> {
        if !(m > 0.0) {
            return Err(Error::domain(format!("green needs m > 0, got {m}")));
        }
        let prec = Precision::default();
        match *self {
            Geometry::Interval { l } => {
                check_interval_coord(p.x, l)?;
                check_interval_coord(q.x, l)?;
                let (lo, hi) = if p.x <= q.x { (p.x, q.x) } else { (q.x, p.x) };
                Ok((m * lo).sinh() * (m * (l - hi)).sinh() / (m * (m * l).sinh()))
            }
            Geometry::Circle { l } => {
                let d = circle_distance(p.x - q.x, l);
                Ok((m * (0.5 * l - d)).cosh() / (2.0 * m * (0.5 * m * l).sinh()))
            }
            Geometry::Torus { l1, l2 } => torus_green(l1, l2, m, p.x - q.x, p.y - q.y, prec),
            Geometry::Cylinder { l, h } => cylinder_green(l, h, m, p, q, prec),
            Geometry::Sphere { r } => {
                sphere_green_half_chord(m * r, sphere_half_chord_sq(p, q), prec)
            }
            Geometry::Hemisphere { r } => {
                check_hemisphere_colatitude(p.x)?;
                check_hemisphere_colatitude(q.x)?;
                let direct =
                    sphere_green_half_chord(m * r, sphere_half_chord_sq(p, q), prec)?;
                let image =
                    sphere_green_half_chord(m * r, sphere_half_chord_sq(p, reflect(q)), prec)?;
                Ok(direct - image)
            }
            Geometry::Disk { .. } | Geometry::SphericalSector { .. } => Err(Error::unsupported(
                format!("Green's function for {self} is not available; only boundary (DN) data is supported"),
            )),
        }
    }

    /// Boundary Poisson kernel -∂_ν G(p, b): the outward normal derivative
    /// of the Green's function in its second argument at the boundary point
    /// `b` of component `bc` with boundary coordinate `s` (arclength along
    /// a cylinder circle, azimuth along the equator; ignored at interval
    /// endpoints). This is the factor a boundary leg contributes.
    pub fn poisson_kernel(&self, p: Point, bc: BoundaryComponent, s: f64, m: f64) -> Result<f64> {
        if !(m > 0.0) {
            return Err(Error::domain(format!("poisson_kernel needs m > 0, got {m}")));
        }
        let prec = Precision::default();
        match (*self, bc) {
            (Geometry::Interval { l }, BoundaryComponent::Left) => {
                check_interval_coord(p.x, l)?;
                Ok((m * (l - p.x)).sinh() / (m * l).sinh())
            }
            (Geometry::Interval { l }, BoundaryComponent::Right) => {
                check_interval_coord(p.x, l)?;
                Ok((m * p.x).sinh() / (m * l).sinh())
            }
            (Geometry::Cylinder { l, h }, BoundaryComponent::Bottom) => {
                cylinder_poisson(l, h, m, p.x - s, p.y, prec)
            }
            (Geometry::Cylinder { l, h }, BoundaryComponent::Top) => {
                cylinder_poisson(l, h, m, p.x - s, h - p.y, prec)
            }
            (Geometry::Hemisphere { r }, BoundaryComponent::Equator) => {
                check_hemisphere_colatitude(p.x)?;
                hemisphere_poisson(r, m, p, s, prec)
            }
            (g, bc) => Err(Error::unsupported(format!(
                "geometry {g} has no boundary component {bc:?}"
            ))),
        }
    }
}

fn check_interval_coord(x: f64, l: f64) -> Result<()> {
    if x < 0.0 || x > l {
        return Err(Error::domain(format!(
            "coordinate {x} outside interval [0, {l}]"
        )));
    }
    Ok(())
}

fn check_hemisphere_colatitude(theta: f64) -> Result<()> {
    if !(0.0..=PI / 2.0).contains(&theta) {
        return Err(Error::domain(format!(
            "colatitude {theta} outside hemisphere chart [0, π/2]"
        )));
    }
    Ok(())
}

/// Geodesic distance between arclengths dx apart on a circle of length l.
fn circle_distance(dx: f64, l: f64) -> f64 {
    let mut d = dx.rem_euclid(l);
    if d > 0.5 * l {
        d = l - d;
    }
    d
}

/// Geodesic angle between two points of the unit sphere in (θ, ψ) charts.
/// Haversine form: stable near coincidence and near antipodes, where the
/// law-of-cosines arccos would lose half the significant digits.
pub fn sphere_angle(p: Point, q: Point) -> f64 {
    let h = sphere_half_chord_sq(p, q).clamp(0.0, 1.0);
    2.0 * h.sqrt().atan2((1.0 - h).sqrt())
}

/// sin²(σ/2) for the geodesic angle σ between p and q, computed without
/// forming σ itself (this is the hypergeometric argument 1 - z).
pub(crate) fn sphere_half_chord_sq(p: Point, q: Point) -> f64 {
    let sdt = (0.5 * (p.x - q.x)).sin();
    let sdp = (0.5 * (p.y - q.y)).sin();
    sdt * sdt + p.x.sin() * q.x.sin() * sdp * sdp
}

/// Equator reflection (θ, ψ) ↦ (π - θ, ψ).
fn reflect(q: Point) -> Point {
    Point::new(PI - q.x, q.y)
}

/// Diagonal of the Dirichlet heat kernel on [0, l] at x, switching between
/// the image-charge and spectral representations at πt = l².
fn interval_diag_kernel(l: f64, x: f64, t: f64) -> Result<f64> {
    if PI * t < l * l {
        interval_diag_images(l, x, t)
    } else {
        interval_diag_spectral(l, x, t)
    }
}

/// Image form (1/√(4πt)) Σ_k [e^{-(kl)²/t} - e^{-(x+kl)²/t}]; geometrically
/// convergent for t below the modular point.
pub(crate) fn interval_diag_images(l: f64, x: f64, t: f64) -> Result<f64> {
    check_interval_coord(x, l)?;
    let reach = (45.0 * t).sqrt();
    let mut sum = 1.0;
    let mut k = 1.0_f64;
    while k * l <= reach {
        sum += 2.0 * (-(k * l) * (k * l) / t).exp();
        k += 1.0;
    }
    let klo = ((-x - reach) / l).floor() as i64;
    let khi = ((-x + reach) / l).ceil() as i64;
    for k in klo..=khi {
        let d = x + k as f64 * l;
        if d * d <= reach * reach {
            sum -= (-d * d / t).exp();
        }
    }
    Ok(sum / (4.0 * PI * t).sqrt())
}

/// Spectral form (2/l) Σ_n e^{-n²π²t/l²} sin²(nπx/l); geometrically
/// convergent for t above the modular point.
pub(crate) fn interval_diag_spectral(l: f64, x: f64, t: f64) -> Result<f64> {
    check_interval_coord(x, l)?;
    let mut sum = 0.0;
    let mut n = 1.0_f64;
    while n * n * PI * PI * t / (l * l) < 745.0 {
        sum += (-n * n * PI * PI * t / (l * l)).exp() * (n * PI * x / l).sin().powi(2);
        n += 1.0;
    }
    Ok(2.0 * sum / l)
}

/// Σ_{l≥0} (2l+1) P_l(x) e^{-l(l+1)s}: the off-diagonal sphere heat kernel
/// (times 4πR²) at geodesic angle arccos(x), by the Legendre recurrence.
fn sphere_offdiag_sum(x: f64, s: f64) -> f64 {
    let lmax = (80.0 / s).sqrt().ceil() as usize + 2;
    let mut pprev = 1.0;
    let mut pcur = x;
    let mut sum = pprev;
    for l in 1..=lmax {
        let lf = l as f64;
        sum += (2.0 * lf + 1.0) * pcur * (-lf * (lf + 1.0) * s).exp();
        let pnext = ((2.0 * lf + 1.0) * x * pcur - lf * pprev) / (lf + 1.0);
        pprev = pcur;
        pcur = pnext;
    }
    sum
}

/// Σ_{l≥0} (2l+1) e^{-l(l+1)s}: the sphere heat trace at rescaled time
/// s = t/R².
pub(crate) fn sphere_theta_sum(s: f64) -> f64 {
    let lmax = (80.0 / s).sqrt().ceil() as usize + 2;
    let mut sum = 0.0;
    for l in 0..=lmax {
        let lf = l as f64;
        sum += (2.0 * lf + 1.0) * (-lf * (lf + 1.0) * s).exp();
    }
    sum
}

/// Σ_{l≥1} l e^{-l(l+1)s}: the Dirichlet hemisphere heat trace at s = t/R².
pub(crate) fn hemisphere_theta_sum(s: f64) -> f64 {
    let lmax = (80.0 / s).sqrt().ceil() as usize + 2;
    let mut sum = 0.0;
    for l in 1..=lmax {
        let lf = l as f64;
        sum += lf * (-lf * (lf + 1.0) * s).exp();
    }
    sum
}

/// Free-space 2D kernel sum over the torus lattice: Σ K₀(m r)/(2π) with
/// r running over |Δ + (n₁l₁, n₂l₂)|. Terms with m r > 60 are below f64
/// noise and are skipped.
fn torus_green(l1: f64, l2: f64, m: f64, dx: f64, dy: f64, prec: Precision) -> Result<f64> {
    let n1max = (60.0 / (m * l1)).ceil() as i64 + 1;
    let n2max = (60.0 / (m * l2)).ceil() as i64 + 1;
    let mut sum = 0.0;
    for n1 in -n1max..=n1max {
        for n2 in -n2max..=n2max {
            let rx = dx + n1 as f64 * l1;
            let ry = dy + n2 as f64 * l2;
            let r = rx.hypot(ry);
            if r == 0.0 {
                return Err(Error::domain(
                    "Green's function diverges at coincident points".to_string(),
                ));
            }
            if m * r <= 60.0 {
                sum += bessel_k(0.0, m * r, prec)?;
            }
        }
    }
    Ok(sum / (2.0 * PI))
}

/// Cylinder Green's function by the doubly-reflected image sum: circle
/// images in x, alternating Dirichlet images across y = 0 and y = H.
fn cylinder_green(l: f64, h: f64, m: f64, p: Point, q: Point, prec: Precision) -> Result<f64> {
    for pt in [p, q] {
        if pt.y < 0.0 || pt.y > h {
            return Err(Error::domain(format!(
                "coordinate y={} outside cylinder [0, {h}]",
                pt.y
            )));
        }
    }
    let dx = p.x - q.x;
    let wmax = (60.0 / (m * l)).ceil() as i64 + 1;
    let kmax = (30.0 / (m * h)).ceil() as i64 + 1;
    let mut sum = 0.0;
    for w in -wmax..=wmax {
        let rx = dx + w as f64 * l;
        for k in -kmax..=kmax {
            let ry_direct = p.y - q.y + 2.0 * k as f64 * h;
            let ry_image = p.y + q.y + 2.0 * k as f64 * h;
            let rd = rx.hypot(ry_direct);
            if rd == 0.0 {
                return Err(Error::domain(
                    "Green's function diverges at coincident points".to_string(),
                ));
            }
            if m * rd <= 60.0 {
                sum += bessel_k(0.0, m * rd, prec)?;
            }
            let ri = rx.hypot(ry_image);
            if ri > 0.0 && m * ri <= 60.0 {
                sum -= bessel_k(0.0, m * ri, prec)?;
            }
        }
    }
    Ok(sum / (2.0 * PI))
}

/// Cylinder Poisson kernel toward y = 0 as a Fourier mode sum:
/// (1/L) Σ_n cos(2πnΔx/L) e^{-ω_n y} (1 - e^{-2ω_n(H-y)})/(1 - e^{-2ω_n H})
/// with ω_n = √(m² + (2πn/L)²).
fn cylinder_poisson(l: f64, h: f64, m: f64, dx: f64, y: f64, prec: Precision) -> Result<f64> {
    if !(y > 0.0 && y <= h) {
        return Err(Error::domain(format!(
            "poisson_kernel needs the source strictly inside, got y={y}"
        )));
    }
    let mode = |omega: f64| {
        (-omega * y).exp() * (1.0 - (-2.0 * omega * (h - y)).exp())
            / (1.0 - (-2.0 * omega * h).exp())
    };
    let mut sum = mode(m);
    for n in 1..=prec.max_terms {
        let kn = 2.0 * PI * n as f64 / l;
        let omega = (m * m + kn * kn).sqrt();
        let term = 2.0 * (kn * dx).cos() * mode(omega);
        sum += term;
        // the mode envelope e^{-ω y} bounds everything that follows
        if (-omega * y).exp() < 1e-18 {
            return Ok(sum / l);
        }
    }
    Err(Error::NoConvergence {
        context: format!("cylinder poisson kernel at y={y}"),
        terms: prec.max_terms,
    })
}

/// Sphere Green's function as a function of mR and the geodesic angle σ:
/// ₂F₁(α₁, α₂; 1; cos²(σ/2)) / (4 cos πν) with α₁ + α₂ = 1,
/// α₁α₂ = (mR)², ν = √(¼ - (mR)²).
pub(crate) fn sphere_green_angle(mr: f64, sigma: f64, prec: Precision) -> Result<f64> {
    sphere_green_half_chord(mr, (0.5 * sigma).sin().powi(2), prec)
}

/// Same Green's function parameterized by sin²(σ/2) directly.
fn sphere_green_half_chord(mr: f64, one_minus_z: f64, prec: Precision) -> Result<f64> {
    let s = mr * mr;
    if one_minus_z == 0.0 {
        return Err(Error::domain(
            "Green's function diverges at coincident points".to_string(),
        ));
    }
    let f = hyp2f1_pair_auto(1.0, s, 1.0, one_minus_z, prec)?;
    Ok(f / (4.0 * cos_pi_nu(s)))
}

/// cos(π √(¼ - s)), continued through s > ¼ as cosh of the imaginary part.
pub(crate) fn cos_pi_nu(s: f64) -> f64 {
    let nu2 = 0.25 - s;
    if nu2 >= 0.0 {
        (PI * nu2.sqrt()).cos()
    } else {
        (PI * (-nu2).sqrt()).cosh()
    }
}

/// Hemisphere Poisson kernel at the equator azimuth s, from the image form
/// of the Green's function: -∂_ν G = m²R ₂F₁(α₁+1, α₂+1; 2; cos²(σ/2))
/// cos θ_p / (4 cos πν).
fn hemisphere_poisson(r: f64, m: f64, p: Point, s_b: f64, prec: Precision) -> Result<f64> {
    let b = Point::new(0.5 * PI, s_b);
    let sigma = sphere_angle(p, b);
    let s = (m * r) * (m * r);
    let one_minus_z = (0.5 * sigma).sin().powi(2);
    if one_minus_z == 0.0 {
        return Err(Error::domain(
            "poisson_kernel needs the source off the boundary point".to_string(),
        ));
    }
    // ₂F₁(α₁+1, α₂+1; 2; z): parameter sum 3, product (mR)² + 2
    let f = hyp2f1_pair(3.0, s + 2.0, 2.0, 1.0 - one_minus_z, prec)?;
    Ok(m * m * r * f * p.x.cos() / (4.0 * cos_pi_nu(s)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn parse_accepts_mixed_case_and_roundtrips() {
        let g = Geometry::parse("Cylinder:L=6.2832,H=1").unwrap();
        assert_eq!(g, Geometry::Cylinder { l: 6.2832, h: 1.0 });
        let g2 = Geometry::parse("TORUS:l1=2,L2=1").unwrap();
        assert_eq!(g2, Geometry::Torus { l1: 2.0, l2: 1.0 });
        for s in [
            "interval:l=1",
            "circle:l=2",
            "torus:l1=2,l2=1",
            "cylinder:l=6.2832,h=1",
            "disk:r=1",
            "sphere:r=1",
            "hemisphere:r=0.8",
            "sector:r=1,phi=0.7",
        ] {
            let g = Geometry::parse(s).unwrap();
            assert_eq!(Geometry::parse(&g.to_string()).unwrap(), g);
        }
        assert_eq!(
            Geometry::parse("SphericalSector:r=1,phi=0.7").unwrap(),
            Geometry::SphericalSector { r: 1.0, phi: 0.7 }
        );
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(Geometry::parse("dodecahedron:r=1").is_err());
        assert!(Geometry::parse("sphere:r=-1").is_err());
        assert!(Geometry::parse("sphere:r=abc").is_err());
        assert!(Geometry::parse("torus:l1=2").is_err());
        assert!(Geometry::parse("interval").is_err());
        assert!(Geometry::parse("sector:r=1,phi=3.2").is_err());
        assert!(Geometry::parse("sector:r=1,phi=0").is_err());
    }

    #[test]
    fn volumes_and_curvature() {
        assert_relative_eq!(
            Geometry::parse("sphere:r=2").unwrap().volume(),
            16.0 * PI,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            Geometry::parse("hemisphere:r=2").unwrap().curvature(),
            0.25,
            max_relative = 1e-15
        );
        assert_eq!(Geometry::parse("torus:l1=2,l2=1").unwrap().curvature(), 0.0);
    }

    #[test]
    fn boundary_spectrum_kinds_expose_geometry_only() {
        let d = Geometry::Disk { r: 2.0 };
        assert_relative_eq!(d.volume(), 4.0 * PI, max_relative = 1e-15);
        assert_eq!(d.boundary_components(), vec![BoundaryComponent::Rim]);
        assert_eq!(d.heat_coefficients().0, d.volume() / (4.0 * PI), "c1 = area/4pi");
        assert!(d.heat_trace(0.1).is_err());
        assert!(d
            .green(Point::new(0.0, 0.0), Point::new(0.3, 0.0), 1.0)
            .is_err());
        let s = Geometry::SphericalSector { r: 1.0, phi: PI / 2.0 };
        // the half-opening sector is the hemisphere: same Weyl data
        let h = Geometry::Hemisphere { r: 1.0 };
        let (c1, ch, c0) = s.heat_coefficients();
        let (h1, hh, h0) = h.heat_coefficients();
        assert_relative_eq!(c1, h1, max_relative = 1e-15);
        assert_relative_eq!(ch, hh, max_relative = 1e-15);
        assert_relative_eq!(c0, h0, max_relative = 1e-15);
        assert_relative_eq!(s.scalar_curvature(), 2.0, max_relative = 1e-15);
        assert!(s.heat_trace_diag(Point::new(0.2, 0.0), 0.1).is_err());
    }

    #[test]
    fn heat_diag_small_time_is_free_kernel() {
        // any interior point: θ → 1/√(4πt) as t → 0
        let t = 1e-6 * 4.0;
        let g = Geometry::Circle { l: 2.0 };
        let v = g.heat_trace_diag(Point::new(0.3, 0.0), t).unwrap();
        assert_relative_eq!(v, 1.0 / (4.0 * PI * t).sqrt(), max_relative = 1e-10);
    }

    #[test]
    fn heat_diag_long_time_keeps_constant_mode_only() {
        let g = Geometry::Torus { l1: 2.0, l2: 1.0 };
        let v = g.heat_trace_diag(Point::new(0.3, 0.8), 50.0).unwrap();
        assert_relative_eq!(v, 0.5, max_relative = 1e-12);
    }

    #[test]
    fn interval_diag_representations_agree_at_modular_point() {
        // image and spectral sums of the same kernel, compared where both
        // converge; this is the cylinder theta-representation switch
        let (h, y) = (1.5, 0.4);
        let t = h * h / PI;
        let a = interval_diag_images(h, y, t).unwrap();
        let b = interval_diag_spectral(h, y, t).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-12);
        let g = Geometry::Cylinder { l: 6.2832, h };
        let v = g.heat_trace_diag(Point::new(0.0, y), t).unwrap();
        assert_relative_eq!(v, b * theta3(0.0, 4.0 * PI * t / 6.2832f64.powi(2), Precision::default()).unwrap() / 6.2832, max_relative = 1e-13);
    }

    #[test]
    fn heat_diag_integrates_to_trace() {
        // interval: 64-point Gauss-Legendre of the diagonal vs the trace
        let g = Geometry::Interval { l: 1.0 };
        let t = 0.07;
        let quad = crate::quadrature::integrate(
            |x| g.heat_trace_diag(Point::new(x, 0.0), t).unwrap(),
            0.0,
            1.0,
            64,
        );
        assert_relative_eq!(quad, g.heat_trace(t).unwrap(), max_relative = 1e-12);
        // hemisphere: ∫ diag · 2πR² sinθ dθ over the quarter chart
        let g = Geometry::Hemisphere { r: 1.0 };
        let t = 0.3;
        let quad = crate::quadrature::integrate(
            |th| g.heat_trace_diag(Point::new(th, 0.0), t).unwrap() * 2.0 * PI * th.sin(),
            0.0,
            PI / 2.0,
            64,
        );
        assert_relative_eq!(quad, g.heat_trace(t).unwrap(), max_relative = 1e-10);
    }

    #[test]
    fn hemisphere_diag_vanishes_at_equator_and_matches_sphere_at_pole() {
        let g = Geometry::Hemisphere { r: 1.0 };
        let t = 0.25;
        let eq = g.heat_trace_diag(Point::new(PI / 2.0, 0.0), t).unwrap();
        assert!(eq.abs() < 1e-13, "equator diagonal {eq}");
        // at the pole the image charge sits at the antipode: for moderate t
        // its effect is the alternating sum Σ(2l+1)(-1)^l e^{-l(l+1)s}
        let s = Geometry::Sphere { r: 1.0 };
        let pole = g.heat_trace_diag(Point::new(0.0, 0.0), t).unwrap();
        let sphere = s.heat_trace_diag(Point::new(0.0, 0.0), t).unwrap();
        let alternating: f64 = (0..60)
            .map(|l| {
                let lf = l as f64;
                (if l % 2 == 0 { 1.0 } else { -1.0 })
                    * (2.0 * lf + 1.0)
                    * (-lf * (lf + 1.0) * t).exp()
            })
            .sum::<f64>()
            / (4.0 * PI);
        assert_relative_eq!(pole, sphere - alternating, max_relative = 1e-12);
    }

    #[test]
    fn interval_trace_matches_direct_spectral_sum() {
        let g = Geometry::Interval { l: 1.0 };
        let t = 0.05;
        let direct: f64 = (1..200)
            .map(|n| (-(n as f64 * PI).powi(2) * t).exp())
            .sum();
        assert_relative_eq!(g.heat_trace(t).unwrap(), direct, max_relative = 1e-13);
    }

    #[test]
    fn circle_trace_matches_direct_spectral_sum() {
        let g = Geometry::Circle { l: 2.0 };
        let t = 0.08;
        let direct: f64 = 1.0
            + 2.0
                * (1..200)
                    .map(|n| (-(2.0 * PI * n as f64 / 2.0).powi(2) * t).exp())
                    .sum::<f64>();
        assert_relative_eq!(g.heat_trace(t).unwrap(), direct, max_relative = 1e-13);
    }

    #[test]
    fn small_time_coefficients_describe_traces() {
        // Θ(t) - c₁/t - c_h/√t - c₀ must be small at small t; the curved
        // geometries have polynomial remainders, the flat ones exponential.
        let cases: [(&str, f64, f64); 6] = [
            ("interval:l=1", 0.01, 1e-12),
            ("circle:l=2", 0.01, 1e-12),
            ("torus:l1=2,l2=1", 0.01, 1e-8),
            ("cylinder:l=6.2832,h=1", 0.01, 1e-8),
            ("sphere:r=1", 0.001, 1e-4),
            ("hemisphere:r=1", 0.001, 4e-3),
        ];
        for (s, t, tol) in cases {
            let g = Geometry::parse(s).unwrap();
            let (c1, ch, c0) = g.heat_coefficients();
            let rem = g.heat_trace(t).unwrap() - c1 / t - ch / t.sqrt() - c0;
            assert!(
                rem.abs() < tol,
                "{s}: remainder {rem} at t={t} exceeds {tol}"
            );
        }
    }

    #[test]
    fn interval_green_spot_value() {
        let g = Geometry::Interval { l: 1.0 };
        let v = g
            .green(Point::new(0.25, 0.0), Point::new(0.75, 0.0), 1.0)
            .unwrap();
        assert_relative_eq!(v, 0.05429962371407515730613, max_relative = 1e-13);
        // symmetry
        let w = g
            .green(Point::new(0.75, 0.0), Point::new(0.25, 0.0), 1.0)
            .unwrap();
        assert_relative_eq!(v, w, max_relative = 1e-15);
    }

    #[test]
    fn circle_green_coincident_is_coth() {
        // G(x,x) = coth(mL/2)/(2m)
        let g = Geometry::Circle { l: 2.0 };
        let v = g
            .green(Point::new(0.3, 0.0), Point::new(0.3, 0.0), 1.0)
            .unwrap();
        assert_relative_eq!(v, 0.6565176427496656518181, max_relative = 1e-13);
    }

    #[test]
    fn interval_poisson_kernel_spot_value() {
        let g = Geometry::Interval { l: 1.0 };
        let v = g
            .poisson_kernel(Point::new(0.5, 0.0), BoundaryComponent::Left, 0.0, 1.0)
            .unwrap();
        assert_relative_eq!(v, 0.4434094419850369543294, max_relative = 1e-13);
        // the kernel from an interior point sums to less than one
        let w = g
            .poisson_kernel(Point::new(0.5, 0.0), BoundaryComponent::Right, 0.0, 1.0)
            .unwrap();
        assert!(v + w < 1.0);
        assert_relative_eq!(v, w, max_relative = 1e-14);
    }

    #[test]
    fn torus_green_is_lattice_periodic() {
        let g = Geometry::Torus { l1: 2.0, l2: 1.0 };
        let p = Point::new(0.3, 0.4);
        let q = Point::new(1.1, 0.15);
        let v = g.green(p, q, 1.0).unwrap();
        let w = g.green(Point::new(p.x + 2.0, p.y - 1.0), q, 1.0).unwrap();
        assert_relative_eq!(v, w, max_relative = 1e-12);
        assert!(g.green(p, p, 1.0).is_err());
    }

    #[test]
    fn cylinder_green_vanishes_on_boundary() {
        let g = Geometry::Cylinder { l: 6.2832, h: 1.0 };
        let p = Point::new(1.0, 0.5);
        let v0 = g.green(p, Point::new(2.0, 0.0), 1.0).unwrap();
        let vh = g.green(p, Point::new(2.0, 1.0), 1.0).unwrap();
        assert!(v0.abs() < 1e-14, "bottom boundary value {v0}");
        assert!(vh.abs() < 1e-14, "top boundary value {vh}");
        let inside = g.green(p, Point::new(2.0, 0.5), 1.0).unwrap();
        assert!(inside > 0.0);
    }

    #[test]
    fn cylinder_poisson_kernel_integrates_below_one() {
        // ∫ over the boundary circle of the massive Poisson kernel < 1;
        // only the n=0 mode survives the integral: value L·(mode 0)/L.
        let g = Geometry::Cylinder { l: 6.2832, h: 2.0 };
        let p = Point::new(0.7, 0.6);
        let n = 64;
        let mut total = 0.0;
        for j in 0..n {
            let s = 6.2832 * j as f64 / n as f64;
            total += g
                .poisson_kernel(p, BoundaryComponent::Bottom, s, 1.0)
                .unwrap();
        }
        total *= 6.2832 / n as f64;
        let omega = 1.0f64;
        let expected = (-omega * 0.6).exp() * (1.0 - (-2.0 * omega * 1.4).exp())
            / (1.0 - (-2.0 * omega * 2.0).exp());
        assert_relative_eq!(total, expected, max_relative = 1e-10);
        assert!(total < 1.0);
    }

    #[test]
    fn sphere_green_spot_values() {
        let g = Geometry::Sphere { r: 1.0 };
        let pole = Point::new(0.0, 0.0);
        for (d, want) in [
            (0.5, 0.6310380864052239549457),
            (PI / 2.0, 0.4737166593908726041035),
            (3.0, 0.4256668430554654376785),
        ] {
            let v = g.green(pole, Point::new(d, 0.0), 0.4).unwrap();
            assert_relative_eq!(v, want, max_relative = 1e-12);
        }
        let w = g.green(pole, Point::new(1.0, 0.0), 1.0).unwrap();
        assert_relative_eq!(w, 0.09795424025920756890988, max_relative = 1e-12);
        assert!(g.green(pole, pole, 1.0).is_err());
    }

    #[test]
    fn sphere_green_depends_only_on_angle() {
        let g = Geometry::Sphere { r: 1.0 };
        let a = g
            .green(Point::new(1.2, 0.4), Point::new(0.7, 2.0), 0.8)
            .unwrap();
        let sigma = sphere_angle(Point::new(1.2, 0.4), Point::new(0.7, 2.0));
        let b = g
            .green(Point::new(0.0, 0.0), Point::new(sigma, 0.0), 0.8)
            .unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-12);
    }

    #[test]
    fn hemisphere_green_vanishes_at_equator() {
        let g = Geometry::Hemisphere { r: 1.0 };
        let p = Point::new(1.0, 0.0);
        let v = g.green(p, Point::new(PI / 2.0, 0.9), 0.4).unwrap();
        assert!(v.abs() < 1e-15);
        let inside = g.green(p, Point::new(0.6, 0.9), 0.4).unwrap();
        assert_relative_eq!(inside, 0.109906683583294332005, max_relative = 1e-12);
    }

    #[test]
    fn hemisphere_poisson_kernel_spot_value() {
        let g = Geometry::Hemisphere { r: 1.0 };
        let p = Point::new(1.0, 0.0);
        let v = g
            .poisson_kernel(p, BoundaryComponent::Equator, 0.9, 0.4)
            .unwrap();
        // -∂_ν G, so the sign flips relative to the raw normal derivative
        assert_relative_eq!(v, 0.1681933858759012592405, max_relative = 1e-11);
        assert!(g
            .poisson_kernel(p, BoundaryComponent::Left, 0.0, 1.0)
            .is_err());
    }

    proptest::proptest! {
        #[test]
        fn circle_green_is_translation_invariant(x in 0.0f64..2.0, shift in 0.0f64..2.0) {
            let g = Geometry::Circle { l: 2.0 };
            let a = g.green(Point::new(x, 0.0), Point::new(0.5, 0.0), 1.3).unwrap();
            let b = g.green(Point::new(x + shift, 0.0), Point::new(0.5 + shift, 0.0), 1.3).unwrap();
            proptest::prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn interval_poisson_kernel_bounded(x in 0.001f64..0.999) {
            let g = Geometry::Interval { l: 1.0 };
            let v = g.poisson_kernel(Point::new(x, 0.0), BoundaryComponent::Left, 0.0, 2.0).unwrap();
            proptest::prop_assert!(v > 0.0 && v < 1.0);
        }
    }
}
