//! Numerical laboratory for transversality properties of pairs of closed
//! sets in R^n.
//!
//! The crate is generic over the scalar type (`f32` or `f64`, see
//! [`Real`]); the aliases at the crate root fix it to `f64`.

pub mod altproj;
pub mod cones;
pub mod constants;
pub mod constructions;
pub mod corpus;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod report;
pub mod sampling;
pub mod scalar;
pub mod vector;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Vector = vector::Vector<f64>;
pub type SetSpec = geometry::SetSpec<f64>;
pub type NormalFan = geometry::NormalFan<f64>;
pub type Scene = constants::Scene<f64>;
pub type RadiusSchedule = constants::RadiusSchedule<f64>;
pub type ConstantEstimate = constants::ConstantEstimate<f64>;
pub type NormalPairSample = constants::NormalPairSample<f64>;
pub type ConstructionInstance = constructions::ConstructionInstance<f64>;
pub type ConeSample = cones::ConeSample<f64>;
pub type Trajectory = altproj::Trajectory<f64>;
