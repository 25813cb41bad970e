//! Anisotropic random grain model with heavy-tailed grains.

pub mod error;
pub mod field;
pub mod geometry;
pub mod limits;
pub mod parallel;
pub mod quad;
pub mod sampling;
pub mod stats;
pub mod theory;
pub mod verify;
pub mod workload;

pub use error::{Error, Result};
pub use geometry::{CustomGrain, GrainShape, Rect};
pub use sampling::{ExtendedWindow, SeededStream};
pub use theory::{ModelParams, Usage};
