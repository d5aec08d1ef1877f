//! Function representations, sampled norms, mollification, cutoffs and
//! finite differences.

pub mod domain;
pub mod fd;
pub mod grid;
pub mod kernel;
pub mod norms;
pub mod scalar;

pub use domain::{DomainSpec, NodeKind, Shape};
pub use fd::{fd_derivatives, FdDerivatives, OneSided};
pub use grid::{GridFunction, Mesh};
pub use kernel::{cutoff, mollify};
pub use norms::{
    field_sup_norm, holder_seminorm, norm_report, sup_norm, weighted_interior_norm,
    BoundaryPortion, NormReport, PairStrategy, Samples,
};
pub use scalar::{Jet, ScalarField};
