//! Operators, ellipticity checks, comparison functions and barriers.

pub mod barrier;
pub mod checks;
pub mod comparison;
pub mod operator;

pub use barrier::{build_barrier, BarrierNet, BarrierOptions, BarrierPair, Sphere};
pub use checks::{
    dissipativity_margin, estimate_omega, max_principle_check, verify_ellipticity,
    DissipativityReport, EllipticityReport, MaxPrincipleReport, Regime,
};
pub use comparison::{build_comparison_pair, interior_sup_bound, ComparisonPair, SandwichReport};
pub use operator::{min_eigenvalue, Coefficients, EllipticOperator, Regularity};
