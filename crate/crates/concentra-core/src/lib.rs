//! Numerics for solutions of the critical Neumann problem that concentrate
//! along a closed curve of the boundary.
//!
//! The crate is `no_std` with `alloc`. Everything here is pure computation;
//! configuration, files and the command line live in the `concentra` crate.
#![no_std]
// `num_traits::Float` goes unused whenever std is linked into the build
#![allow(unused_imports)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod bubble;
pub mod constants;
pub mod eigen;
pub mod error;
pub mod expansion;
pub mod gegenbauer;
pub mod geometry;
pub mod grid;
pub mod jacobi;
pub mod laplacian;
pub mod modes;
pub mod periodic;
pub mod quadrature;
pub mod solver;
pub mod spectrum;

pub use bubble::{Bubble, DimensionParams};
pub use constants::{bubble_constants, verify_identities, ConstantsTable, IdentityReport};
pub use eigen::Eigenpair;
pub use error::{Error, Result};
pub use expansion::{build_expansion, mu0_field, residual, ExpansionOptions, ExpansionState, ResidualReport};
pub use geometry::{builtin_geometry, synthetic_geometry, BuiltinGeometry, CurvatureData, SyntheticSpec};
pub use jacobi::JacobiOperator;
pub use laplacian::{OperatorBundle, ZField};
pub use modes::{ModeContext, ModeFunction};
pub use quadrature::QuadOptions;
pub use solver::{solve_linearized, SolveOptions};
pub use spectrum::{decompose, find_gap_epsilon, reduced_eigenvalues, reduced_forms, weyl_count, ReducedForms, SpectrumReport};
