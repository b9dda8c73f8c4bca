//! Equilibrium solver for networks of straight elastic rods joined at a
//! single point.
//!
//! The library is organized around a two-step solve:
//!
//! 1. [`xsection`] turns a cross-section description (geometry + isotropic
//!    material) into a 3x3 symmetric positive-definite stiffness form `H`
//!    acting on material strain vectors (twist rate and two curvatures),
//!    via a finite-element minimization of the section warping energy.
//! 2. [`solver`] minimizes the reduced one-dimensional energy
//!    `sum_i [ 1/2 int H_i s_i . s_i - int p_i . R_i e1 ]` over rotation
//!    fields on each rod, with the shared junction rotation enforced by
//!    construction, where `p_i` is the cumulative load primitive owned by
//!    [`model`].
//!
//! [`post`] recovers centerlines and internal force/couple fields from a
//! converged rotation field and evaluates the residuals of the first-order
//! equilibrium system (force/couple balance along each rod, natural end
//! conditions, junction transmission conditions). [`reference`] holds
//! independent oracles (linearized solver, geometric integrator, classical
//! section constants) used by the test suite and hidden CLI subcommands.

pub mod config;
pub mod error;
pub mod model;
pub mod output;
pub mod post;
pub mod reference;
pub mod rot;
pub mod solver;
pub mod xsection;

pub use error::Error;

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, Error>;
