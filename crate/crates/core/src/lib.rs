//! Elliptic operators with Hölder data, maximum-principle checks, coordinate
//! transforms, sup-norm preserving extension operators and small Dirichlet
//! solvers built on finite differences.

pub mod error;
pub mod expr;
pub mod elliptic;
pub mod extension;
pub mod fields;
pub mod solver;
pub mod transform;

pub use error::{Error, Result};
pub use elliptic::EllipticOperator;
pub use expr::Expr;
pub use fields::{DomainSpec, GridFunction, Mesh, ScalarField};
