//! Finite-difference Dirichlet solvers: direct solves, harmonic lifting,
//! Perron iteration, resolvents and implicit Euler time stepping.

pub mod attain;
pub mod direct;
mod linear;
pub mod lift;
pub mod perron;
pub mod resolvent;
pub mod stencil;
pub mod evolve;

pub use attain::{boundary_attainment_check, AttainmentReport, EpsilonCheck, PointCheck};
pub use direct::{direct_solve, BoundCheck, Solution, SolveReport};
pub use evolve::{evolve, Trajectory};
pub use lift::{harmonic_lift, Ball};
pub use linear::{DIRECT_LIMIT, ITERATIVE_TOL};
pub use perron::{default_cover, perron_solve, PerronOptions, PerronSolution, PerronState, PerronSummary};
pub use resolvent::{resolvent_solve, ContractionCheck, ResolventSolution, CONTRACTION_TOL};
pub use stencil::{Discretization, Row};
