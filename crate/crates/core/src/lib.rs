//! Discretization, solvers and numerical experiments for the Dirichlet
//! problem of the mixed local-nonlocal operator `-Δ + (-Δ)^s` with the Hardy
//! potential `γ/|x|^2` on bounded domains containing the origin.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod grid;
pub mod io;
pub mod operators;
pub mod schemes;
pub mod solver;
pub mod special;
pub mod verify;

pub use error::{Error, Result};
pub use grid::{build_mesh, integrate, sample_field, Domain, FieldVector, Mesh, MeshHeader};
pub use operators::{AssemblyOptions, OperatorSet};
pub use special::{exponent_table, truncate, ExponentTable};
