//! Dini moduli, graph domains and the reduction map Ψ with its induced elliptic data.

mod domain;
mod modulus;
mod transform;

pub use domain::{FlatGraph, GraphDomain, GraphFunction, Horizontal, RadialPowerGraph};
pub use modulus::{DiniModulus, ModulusFamily, ModulusValues};
pub use transform::{EllipticData, TransformFrame};
