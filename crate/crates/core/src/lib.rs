#![allow(clippy::neg_cmp_op_on_partial_ord)]
//! Spherical arrangements in R^n: Cayley-Menger determinants, intersection
//! spheres, chamber volumes and their variations.

pub mod arrangement;
pub mod cayley_menger;
pub mod error;
pub mod fixtures;
pub mod identities;
pub mod intersect;
pub mod linalg;
pub mod mc;
pub mod restricted;
pub mod variation;
pub mod volume;

pub use arrangement::{Arrangement, Chamber, Param, ParamVector, Truth};
pub use cayley_menger::{CmKey, CmTable, ConfigMatrix, ConfigSpec, Header};
pub use error::{Error, Result};
pub use mc::Rng;
pub use volume::VolumeEstimate;
