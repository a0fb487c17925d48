//! Normal-mode accuracy analysis of SBP-SAT boundary closures.
//!
//! The error equation `s̃²ζ̂ = Qζ̂ + h^{p+2}T̂` is solved on the half line by
//! combining the admissible roots of the interior stencil with the closure
//! rows. How the resulting boundary system behaves near `s̃ = 0` fixes the
//! gain in convergence over the boundary truncation order.

pub mod boundary;
pub mod bounds;
pub mod roots;
pub mod singularity;

pub use boundary::{BoundarySolution, BoundarySystem, ClosureModel};
pub use roots::{dispersion_f, CharacteristicProblem};
pub use singularity::{analyze, singularity_analysis, AnalysisOptions, AnalyzerReport, SingularityReport};
