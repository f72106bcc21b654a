//! Error taxonomy shared by every module.
//!
//! The split matters for the CLI: configuration and data-shape problems exit
//! with code 2, failed mathematical gates exit with code 1.

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A 1-form that was required to be exact has a nonzero period.
    /// `residual` is |∮ α dt|, the full period defect (2π for α ≡ 1).
    #[error("one-form is not exact: period residual {residual:.6e} exceeds gate {gate:.1e}")]
    Exactness { residual: f64, gate: f64 },

    /// Strictly positive weighting required, but a sample is ≤ 0.
    #[error("weighting must be strictly positive (min sample {min:.6e})")]
    Positivity { min: f64 },

    /// |det g| fell at or below the degeneracy guard in some cell.
    #[error("metric degenerate in cell {cell}: |det| = {det:.3e} <= {guard:.1e}")]
    DegenerateMetric { cell: usize, det: f64, guard: f64 },

    /// Eigenvalue signs changed under a flow that must preserve signature.
    #[error("signature breach in cell {cell}: expected ({}, {}), found ({}, {})", expected.0, expected.1, found.0, found.1)]
    SignatureBreach {
        cell: usize,
        expected: (usize, usize),
        found: (usize, usize),
    },

    /// `verify` was asked for a suite that is not registered.
    #[error(
        "unknown suite '{0}' (expected one of: pairings, flows, moment, poisson, metrics, all)"
    )]
    UnknownSuite(String),

    /// Input file parsed as JSON but violated the documented schema.
    #[error("schema error at {location}: {message}")]
    Schema { location: String, message: String },

    /// An expression or file failed to parse at all.
    #[error("parse error at {pos}: {message}")]
    Parse { pos: usize, message: String },

    /// A type invariant was violated while constructing domain data
    /// (sample count, symmetry, mass normalization, immersion, ...).
    #[error("invariant violated: {0}")]
    Invariant(String),

    /// CLI-level configuration problem (bad flag value, unknown tolerance name).
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Exit code the CLI maps this error to: gate failures are 1,
    /// everything that means "the run was misconfigured" is 2.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Exactness { .. }
            | Error::DegenerateMetric { .. }
            | Error::SignatureBreach { .. } => 1,
            Error::Positivity { .. }
            | Error::UnknownSuite(_)
            | Error::Schema { .. }
            | Error::Parse { .. }
            | Error::Invariant(_)
            | Error::Config(_) => 2,
        }
    }
}
