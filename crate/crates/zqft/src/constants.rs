//! Mathematical constants and default numerical budgets.
//!
//! Every hard-coded decimal here is either a textbook constant or was
//! frozen from the high-precision derivation script in
//! `tools/derive_reference_values.py` before the Rust implementation was
//! written. Tests compare against these, not the other way around.

/// Euler-Mascheroni constant γ.
pub const EULER_GAMMA: f64 = 0.5772156649015328606065;

/// ζ'(-1) (Riemann zeta derivative). Related to the Glaisher-Kinkelin
/// constant by ln A = 1/12 − ζ'(-1).
pub const ZETA_PRIME_MINUS_ONE: f64 = -0.1654211437004509292139;

/// ln A with A the Glaisher-Kinkelin constant.
pub const LOG_GLAISHER: f64 = 1.0 / 12.0 - ZETA_PRIME_MINUS_ONE;

/// (γ − ln 2)/(2π): the additive offset between the heat-kernel
/// ("proper-time") regularized tadpole and the point-split one,
/// `τ_reg − τ_split`.
pub const TAU_REG_MINUS_SPLIT: f64 = -0.01845107377717180632;

/// arcoth(2) = ½ ln 3, the mass-threshold for the interface pairing bound
/// on two equal unit-length arcs.
pub const ARCCOTH_2: f64 = 0.5493061443340548456976;

/// Bernoulli numbers B_2, B_4, ..., B_14 (even index, B_0 and B_1 omitted).
pub const BERNOULLI_EVEN: [f64; 7] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
];

/// Same numbers as exact rationals (numerator, denominator), used by the
/// short-time expansion of curved heat traces where cancellation matters.
pub const BERNOULLI_EVEN_RATIONAL: [(i64, i64); 7] = [
    (1, 6),
    (-1, 30),
    (1, 42),
    (-1, 30),
    (5, 66),
    (-691, 2730),
    (7, 6),
];

/// Default relative tolerance for series and quadrature termination.
pub const DEFAULT_REL_TOL: f64 = 1e-13;

/// Default cap on series terms / iterations before reporting no convergence.
pub const DEFAULT_MAX_TERMS: usize = 10_000;

/// Requested accuracy and budget for iterative special-function evaluation.
#[derive(Debug, Clone, Copy)]
pub struct Precision {
    pub rel_tol: f64,
    pub max_terms: usize,
}

impl Default for Precision {
    fn default() -> Self {
        Precision {
            rel_tol: DEFAULT_REL_TOL,
            max_terms: DEFAULT_MAX_TERMS,
        }
    }
}
