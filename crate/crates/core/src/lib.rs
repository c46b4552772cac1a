//! Frequency functions, singular sets, β-numbers and stratification covers for
//! harmonic functions vanishing on the boundary of Dini graph domains.

pub mod beta_reifenberg;
pub mod cli_harness;
pub mod dini_geometry;
pub mod error;
pub mod frequency;
pub mod harmonic_fields;
pub mod linalg;
pub mod quadrature;
pub mod singular_detect;
pub mod spatial;
pub mod strat_cover;

pub use error::{Error, Result};
