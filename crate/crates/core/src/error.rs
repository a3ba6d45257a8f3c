//! Error type shared by all workbench modules.

use thiserror::Error;

/// Diagnostic values are reported in `f64` regardless of the scalar type the
/// computation ran in, so `Error` stays free of generic parameters.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A parameter violated its domain (non-positive base quantity, negative
    /// gain, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested SCR cannot be realized: the line resistance already
    /// exceeds the required impedance magnitude.
    #[error(
        "infeasible line impedance: required |Z_g| = {required_ohm} ohm is \
         smaller than R_g = {r_g_ohm} ohm"
    )]
    InfeasibleImpedance { required_ohm: f64, r_g_ohm: f64 },

    /// A gain required by the selected control mode is missing or invalid.
    #[error("control mode {mode} requires gain {gain}: {reason}")]
    MissingGain {
        mode: &'static str,
        gain: &'static str,
        reason: String,
    },

    /// A state, derivative, or matrix entry became non-finite.
    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// Newton iteration did not reach the residual tolerance. Carries the
    /// final residual and iterate so callers can report the near-miss.
    #[error(
        "no equilibrium found: residual {residual} after {iterations} \
         iterations (likely no equilibrium, e.g. power beyond the transfer \
         limit at low SCR)"
    )]
    NoEquilibrium {
        residual: f64,
        iterations: usize,
        last_iterate: Vec<f64>,
    },

    /// The converged equilibrium sits on the rejected high-angle branch.
    #[error("no equilibrium on the low-angle branch: delta = {delta_rad} rad")]
    HighAngleBranch { delta_rad: f64 },

    /// The QR eigenvalue iteration failed to converge.
    #[error("eigenvalue iteration did not converge at index {0}")]
    EigenNoConvergence(usize),

    /// A linear solve hit a (numerically) singular matrix.
    #[error("singular matrix in {0}")]
    SingularMatrix(String),

    /// Invalid simulation or analysis configuration.
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
