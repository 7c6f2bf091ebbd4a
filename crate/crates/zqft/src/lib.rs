//! Zeta-regularized spectral geometry and perturbative scalar field theory on
//! one- and two-dimensional geometries.
//!
//! The crate is organized around a gluing principle: partition functions,
//! determinants, Green's functions and tadpoles on a surface cut along a
//! curve can be reassembled from the two pieces through the
//! Dirichlet-to-Neumann operator on the cut. Modules:
//!
//! - [`specfun`]: the special functions everything else is built on
//!   (modified Bessel, Jacobi theta, digamma, Barnes G, Gauss
//!   hypergeometric, exponential integral).
//! - [`geometry`]: the catalog of supported geometries with their heat
//!   traces, Green's functions and normal derivatives.
//! - [`zetareg`]: zeta-regularized tadpoles and determinants, point-split
//!   regularization, and the mass-derivative compatibility checks.
//! - [`dnglue`]: Dirichlet-to-Neumann spectra, Fredholm determinants,
//!   BFK-type determinant gluing, Green's function and tadpole gluing,
//!   and decay-order fits for `κ⁻¹D − 1`.
//! - [`feyngraph`]: exact combinatorics of half-edge Feynman graphs,
//!   automorphisms, decorations, and graph-level gluing.
//! - [`pertpart`]: semiclassical (ħ-graded) partition functions, boundary
//!   states, the interface pairing, and the gluing theorem residuals.
//! - [`rgpetal`]: the tadpole-resummation ("petal") transform of potentials,
//!   low-valence reduction, and the stress-tensor trace anomaly checks.
//! - [`acceptance`]: the end-to-end verification suite shared by the CLI
//!   and the integration tests.

pub mod acceptance;
pub mod constants;
pub mod dnglue;
pub mod feyngraph;
pub mod geometry;
pub mod linalg;
pub mod pertpart;
pub mod quadrature;
pub mod rgpetal;
pub mod specfun;
pub mod zetareg;

pub use geometry::{BoundaryComponent, Geometry, Point};

/// Crate-wide error type. Numerical routines return `Domain` for invalid
/// inputs, `NoConvergence` when a series or iteration exhausts its budget,
/// and `Unsupported` for operations outside the implemented catalog.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("no convergence after {terms} terms: {context}")]
    NoConvergence { context: String, terms: usize },
    #[error("overflow: {0}")]
    Overflow(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
    pub(crate) fn unsupported(msg: impl Into<String>) -> Self {
        Error::Unsupported(msg.into())
    }
    pub(crate) fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }
}
