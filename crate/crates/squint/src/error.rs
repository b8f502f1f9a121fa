//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("photon number must be at least {min}, got {got}")]
    InvalidPhotonNumber { got: usize, min: usize },

    #[error("photon number must be {expected} , got {got}")]
    WrongParity { got: usize, expected: &'static str },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("operator not Hermitian: imaginary residue {residue:.3e} exceeds tolerance")]
    NotHermitian { residue: f64 },

    #[error("parameter {name} = {value} outside [{lo}, {hi}]")]
    OutOfRange {
        name: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("cannot normalize a state with vanishing norm")]
    ZeroNorm,

    #[error("cannot subtract a photon from a vacuum state")]
    VacuumSubtraction,

    #[error("mean spin vector vanishes; orthogonal squeezing directions are undefined")]
    ZeroMeanSpin,

    #[error("fringe slope vanishes; mean-readout phase error is undefined")]
    VanishingSlope,

    #[error("distribution not normalized at phi = {phi}: sum = {sum}")]
    NotNormalized { phi: f64, sum: f64 },

    #[error(
        "Fisher term ill-conditioned at phi = {phi}, outcome {outcome}: \
         p vanishes while |dp/dphi| = {deriv:.3e}"
    )]
    IllConditionedFisher {
        phi: f64,
        outcome: usize,
        deriv: f64,
    },

    #[error("coincidence efficiency for outcome {outcome} is zero")]
    ZeroEfficiency { outcome: usize },

    #[error("negative Poisson rate {rate} for outcome {outcome}")]
    NegativeRate { rate: f64, outcome: usize },

    #[error("outcome index {got} out of range 0..={max}")]
    OutcomeOutOfRange { got: usize, max: usize },

    #[error("phase grid must be finite, strictly increasing, and non-empty")]
    InvalidGrid,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("degenerate data: {0}")]
    DegenerateData(&'static str),

    #[error("{0}")]
    Unsupported(&'static str),

    #[error("optimizer did not converge after {evaluations} evaluations (best objective {best:.6e})")]
    NonConvergence { evaluations: usize, best: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}, line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{path}: {message}")]
    Json { path: PathBuf, message: String },
}
