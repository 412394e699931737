//! Error type shared by every module of the crate.

use thiserror::Error;

/// Failures reported by geometry, quadrature, solvers and recovery.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// A point or path enters the interior of an obstacle, or a metric
    /// component leaves its admissible range.
    #[error("domain error: {0}")]
    Domain(String),

    /// Ray meets an obstacle tangentially; geometric optics is undefined there.
    #[error("grazing incidence at ({x:.6}, {y:.6}): |d.n| = {cos:.3e}")]
    GrazingRay { x: f64, y: f64, cos: f64 },

    /// The ray was still bouncing when the reflection budget ran out.
    #[error("reflection budget of {budget} exhausted before the ray escaped")]
    ReflectionBudget { budget: usize },

    /// Invalid or inconsistent geometric configuration.
    #[error("geometry error: {0}")]
    Geometry(String),

    /// A formula degenerates (e.g. zero denominator in wavenumber matching).
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    /// Adaptive quadrature hit its subdivision cap.
    #[error("quadrature did not converge: estimate {estimate} with error {error:.3e} after {intervals} intervals")]
    Convergence {
        estimate: f64,
        error: f64,
        intervals: usize,
    },

    /// Lattice cannot resolve the scene.
    #[error("resolution error: {0}")]
    Resolution(String),

    /// The iterative linear solve failed.
    #[error("linear solver failed after {iterations} iterations (relative residual {residual:.3e})")]
    Solver { iterations: usize, residual: f64 },

    /// Experiment configuration cannot produce the requested observable.
    #[error("experiment design error: {0}")]
    ExperimentDesign(String),

    /// Component labels do not cover the unmasked sites.
    #[error("labeling error: {0}")]
    Labeling(String),

    /// A moving boundary removed too much probability in one step.
    #[error("schedule too fast: step {step} removed {fraction:.3} of the probability")]
    ScheduleTooFast { step: usize, fraction: f64 },

    /// Two grids or histories are not comparable.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// Measured data outside its admissible range.
    #[error("data error: {0}")]
    Data(String),

    /// The winding matrix does not determine every flux.
    #[error("rank-deficient winding matrix (rank {rank} < {unknowns})")]
    RankDeficient { rank: usize, unknowns: usize },

    /// The winding matrix determines the fluxes only up to a finite coset.
    #[error("ambiguous recovery: {coset_size} admissible flux vectors")]
    Ambiguous {
        coset_size: u64,
        solutions: Vec<Vec<f64>>,
    },

    /// No circuit set with unimodular winding matrix could be built.
    #[error("measurement design failed: {0}")]
    DesignFailure(String),

    /// Measurements contradict each other.
    #[error("inconsistent measurements: max residual {residual:.3e} rad")]
    Inconsistent { residual: f64 },

    /// Invalid parameter or configuration value.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// I/O or serialization failure.
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
