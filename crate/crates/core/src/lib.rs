//! Tracer particle falling under gravity through a Poisson field of point
//! scatterers whose density depends on depth only.
//!
//! Depth `y` is nonpositive throughout; `y = 0` is the level where a particle
//! launched from rest would return, so the speed at depth `y` is `sqrt(2 g |y|)`.

pub mod density;
pub mod diffusion;
pub mod dynamics;
pub mod error;
pub mod quadrature;
pub mod reflection;
pub mod rng;
pub mod scattering;
pub mod simulator;
pub mod stats;

pub use density::DensityProfile;
pub use dynamics::{unit_step_time, Direction, FlightParams, ParabolicFlight};
pub use error::{Error, Result};
pub use scattering::ScatterLaw;
pub use simulator::{ScalingRegime, SkeletonRecord, StoppingSpec};
