use num_complex::Complex64;
use thiserror::Error;

/// Errors raised by the analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("missing cell (E={energy}, J={j})")]
    MissingCell { energy: f64, j: u32 },

    #[error("duplicate cell (E={energy}, J={j})")]
    DuplicateCell { energy: f64, j: u32 },

    #[error("non-contiguous J range: J={missing} absent between {first} and {last}")]
    NonContiguousJ { missing: u32, first: u32, last: u32 },

    #[error("invalid table: {0}")]
    InvalidTable(String),

    #[error("below zero collision energy: E = {0} meV")]
    NonPositiveEnergy(f64),

    #[error("channel closed: E = {energy} meV is below threshold {threshold} meV")]
    ChannelClosed { energy: f64, threshold: f64 },

    #[error("energy {0} meV is not on the table grid")]
    NotGridEnergy(f64),

    #[error("duplicate abscissa {0}")]
    DuplicateAbscissa(f64),

    #[error("too few samples: need at least {need}, got {got}")]
    TooFewSamples { need: usize, got: usize },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("evaluation at pole z = {0}")]
    EvaluationAtPole(Complex64),

    #[error("pole exactly at half-integer real lambda with zero width (lambda = {0})")]
    SingularResonance(Complex64),

    #[error("quadrature did not converge after {refinements} refinements (last estimate {estimate})")]
    QuadratureNonConvergence { refinements: usize, estimate: f64 },

    #[error("rank-deficient fit: {0}")]
    RankDeficient(String),

    #[error("branch cut: Lambda + 1/4 = {0} lies on the negative real axis")]
    BranchCut(Complex64),

    #[error("unphysical moment of inertia: A1 = {0} must be positive")]
    UnphysicalInertia(f64),

    #[error("growing state: B2 = {0} must be negative")]
    GrowingState(f64),

    #[error("J-shifting needs |A2| <= {tol} |A1| (A1 = {a1}, A2 = {a2})")]
    RotatingWidth { a1: f64, a2: f64, tol: f64 },

    #[error("pole {pole} passes within {distance:e} of node lambda = {node} at E = {energy} meV")]
    PoleNodeCollision {
        pole: usize,
        energy: f64,
        node: f64,
        distance: f64,
    },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of a numerical procedure on otherwise valid input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateData(_)
                | Error::EvaluationAtPole(_)
                | Error::SingularResonance(_)
                | Error::QuadratureNonConvergence { .. }
                | Error::RankDeficient(_)
                | Error::BranchCut(_)
                | Error::UnphysicalInertia(_)
                | Error::GrowingState(_)
                | Error::RotatingWidth { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
