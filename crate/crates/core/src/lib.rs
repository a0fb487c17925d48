//! Summation-by-parts finite differences for the second-order wave equation.
//!
//! The crate builds diagonal-norm SBP approximations of `d²/dx²`, imposes
//! Dirichlet and Neumann conditions weakly through SAT penalties, integrates
//! the resulting semi-discretizations in time and measures their convergence.
//! A normal-mode analyzer predicts the observed rates from the boundary
//! closure alone.

pub mod banded;
pub mod cli;
pub mod config;
pub mod corner;
pub mod error;
pub mod grid;
pub mod lab;
pub mod linalg;
pub mod normal_mode;
pub mod parallel;
pub mod sat;
pub mod sbp;
pub mod solution;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
pub use grid::Grid1D;
pub use parallel::Execution;
pub use sat::{
    assemble_1d, assemble_2d, assemble_dirichlet_1d, assemble_neumann_1d, check_energy_condition, compute_iota0, BoundaryData2D,
    BoundaryKind, SemiDiscretization1D, SemiDiscretization2D,
};
pub use sbp::{apply_d2, build_sbp_d2, verify_sbp_properties, Order, SbpD2Operator, SbpPropertyReport};
