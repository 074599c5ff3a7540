//! Well-balanced, positivity-preserving discontinuous Galerkin solver for the
//! Ripa model on moving simplex meshes in one and two dimensions.
//!
//! The numerical core is generic over [`scalar::Real`] (`f32` or `f64`);
//! the aliases below fix it to `f64`.

pub mod adapt;
pub mod basis;
pub mod config;
pub mod driver;
pub mod error;
pub mod field;
pub mod limiters;
pub mod linalg;
pub mod mesh;
pub mod norms;
pub mod output;
pub mod problems;
pub mod quadrature;
pub mod remap;
pub mod ripa;
pub mod scalar;
pub mod time;

pub use config::{MeshMode, ProblemConfig};
pub use driver::{run, RunOutcome, Simulation};
pub use error::{Error, Result};
pub use problems::ProblemId;
pub use scalar::Real;

pub type Mesh64 = mesh::Mesh<f64>;
pub type MeshBlend64 = mesh::MeshBlend<f64>;
pub type DgField64 = field::DgField<f64>;
pub type ReferenceBasis64 = basis::ReferenceBasis<f64>;
pub type Physics64 = ripa::Physics<f64>;
pub type MetricField64 = adapt::MetricField<f64>;
pub type AdaptConfig64 = adapt::AdaptConfig<f64>;
pub type LimiterConfig64 = limiters::LimiterConfig<f64>;
pub type RemapPlan64 = remap::RemapPlan<f64>;
pub type Simulation64 = driver::Simulation<f64>;
