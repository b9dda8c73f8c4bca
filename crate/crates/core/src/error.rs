use thiserror::Error;

/// Errors produced by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate section: {0}")]
    DegenerateSection(String),

    #[error("meshing failed near vertex {vertex}: {reason}")]
    MeshingFailure { vertex: usize, reason: String },

    #[error("singular constrained warping system: {0}")]
    SingularWarpSystem(String),

    #[error("stiffness form is not positive definite (min eigenvalue {min_eig:.3e})")]
    NonSpdStiffness { min_eig: f64 },

    #[error("rod {rod}: {reason}")]
    InvalidRod { rod: usize, reason: String },

    #[error("load profile: {0}")]
    InvalidLoad(String),

    #[error("unbalanced loads: |sum of junction contact forces| = {residual:.6e} exceeds tolerance {tol:.6e}")]
    UnbalancedLoads { residual: f64, tol: f64 },

    #[error("field shape does not match network ({0})")]
    ShapeMismatch(String),

    #[error("line search failed: step underflow at iteration {iteration} (|g| = {grad_norm:.3e})")]
    LineSearchFailure { iteration: usize, grad_norm: f64 },

    #[error("energy became non-finite at iteration {0}")]
    NonFiniteEnergy(usize),

    #[error("singular linearized system: {0}")]
    SingularLinearSystem(String),

    #[error("unsupported section kind: {0}")]
    UnsupportedSection(String),

    #[error("argument out of range: {0}")]
    OutOfRange(String),

    #[error("config: {0}")]
    Config(String),

    #[error("solution data: {0}")]
    SolutionData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
