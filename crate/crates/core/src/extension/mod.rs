//! Sup-norm preserving extension across a boundary: the polynomial
//! reflection, its one-dimensional and half-space versions, a partition of
//! unity and the glued global operator.

pub mod global;
pub mod halfspace;
pub mod one_d;
pub mod partition;
pub mod reflection;
pub mod report;
pub mod seam;

pub use global::{
    build_chart, disk_test_function, extend_global, extend_global_unchecked, unit_disk_atlas,
    Atlas, Chart, ChartSummary, GlobalExtension,
};
pub use halfspace::{
    extend_halfspace, extend_halfspace_with, flat_boundary_samples, halfspace_checks,
    HalfspaceChecks, HalfspaceExtension, ADMISSIBLE_TOL,
};
pub use one_d::{extend_1d, extend_1d_unchecked, Admissibility, Extension1d};
pub use partition::{build_partition, PartitionOfUnity, PartitionReport};
pub use reflection::{common_delta, reflection_delta, reflection_function, ReflectionParams};
pub use report::{circle_seam, disk_report, sup_norms, ExtensionReport};
pub use seam::{verify_extension_smoothness, Seam, SeamReport};
