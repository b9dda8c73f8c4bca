//! Rotation-field discretization and reduced-energy minimization.

pub mod energy;
pub mod field;
pub mod optimize;
pub mod stability;

pub use energy::Discretization;
pub use stability::{dense_min_eig, hessian_min_eig, EigEstimate};
pub use field::{RotationField, StrainField};
pub use optimize::{
    init_field, minimize, solve, InitialState, OptimizerKind, Segments, SolveTrace, SolverOptions,
    Termination, TraceRow,
};
