//! Pullbacks, transformed operators, Newton inversion and flattening maps.

pub mod charts;
pub mod diffeo;
pub mod flatten;
pub mod pushforward;

pub use charts::polar_shear_chart;
pub use diffeo::{
    inverse_jets, invert_at, jacobian_radius, pullback, pushforward_field, Diffeomorphism,
    MapRegularity,
};
pub use flatten::{build_flattening_map, Flattening};
pub use pushforward::{pushforward_operator, verify_no_cross_terms, TransformedOperator};
