use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid system configuration: {0}")]
    Config(String),

    #[error("contour passes within the root-exclusion bound near {near}; perturb the rectangle")]
    BoundaryRoot { near: Complex64 },

    #[error("no leading complex pair: {0}")]
    NoLeadingPair(String),

    #[error("{lambda} is not a characteristic root (|det| = {residual:.6e})")]
    NotARoot { lambda: Complex64, residual: f64 },

    #[error("degenerate null space: {0}")]
    Degenerate(String),

    #[error("adjoint normalization is singular (|v Δ'(λ) u| = {0:e})")]
    NormalizationSingular(f64),

    #[error("manifold coefficient w_{0}{1} is missing")]
    MissingOrder(usize, usize),

    #[error("order ({j},{k}) homological system is unresolvable: {detail}")]
    Unresolvable { j: usize, k: usize, detail: String },

    #[error("second Lyapunov coefficient is degenerate (|l2| = {0:e})")]
    DegenerateL2(f64),

    #[error("region classification is only defined for s = +1")]
    UnsupportedSign,

    #[error("no positive cycle amplitudes for this β")]
    NoCycles,

    #[error("Bautin point search did not converge after {iterations} iterations (|residual| = {residual:.6e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("finite-difference stencil failed: {0}")]
    StencilFailure(String),

    #[error("step {h} too large for delay {r} (need h <= r/10)")]
    StepTooLarge { h: f64, r: f64 },

    #[error("hypothesis H1 does not hold: {0}")]
    H1Violated(String),

    #[error("cycle detection inconclusive: {0}")]
    Inconclusive(String),
}

impl Error {
    /// Pipeline stage that raised the error, as reported by the CLI.
    pub fn stage(&self) -> &'static str {
        match self {
            Error::Config(_) => "system",
            Error::BoundaryRoot { .. } | Error::NoLeadingPair(_) | Error::H1Violated(_) => {
                "spectrum"
            }
            Error::NotARoot { .. } | Error::Degenerate(_) | Error::NormalizationSingular(_) => {
                "eigenbasis"
            }
            Error::MissingOrder(..) | Error::Unresolvable { .. } => "manifold",
            Error::DegenerateL2(_)
            | Error::UnsupportedSign
            | Error::NoCycles
            | Error::NoConvergence { .. }
            | Error::StencilFailure(_) => "normalform",
            Error::StepTooLarge { .. } | Error::Inconclusive(_) => "ddesim",
        }
    }
}
