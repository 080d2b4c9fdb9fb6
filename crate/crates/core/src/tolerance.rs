//! Numerical tolerances shared by the library, the `verify` command and the
//! acceptance suite.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Maximum asymmetry accepted on covariance-matrix input.
    pub symmetry: f64,
    /// Slack below 1 allowed for symplectic eigenvalues of physical states.
    pub physicality: f64,
    /// Relative mismatch allowed between the two copies of a symplectic
    /// eigenvalue.
    pub pairing: f64,
    /// Agreement in bits between closed forms and the finite-μ propagation.
    pub oracle_agreement: f64,
    /// Condition number above which `X + V₀` is treated as singular.
    pub max_condition: f64,
}

pub const TOL: Tolerances = Tolerances {
    symmetry: 1e-12,
    physicality: 1e-9,
    pairing: 1e-8,
    oracle_agreement: 1e-4,
    max_condition: 1e12,
};
