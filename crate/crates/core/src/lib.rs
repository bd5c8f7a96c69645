//! Randomized constructions of pattern-avoiding point configurations on the
//! torus `T^d`, with exponential-sum and dimension diagnostics.

pub mod dimension;
pub mod error;
pub mod expsum;
pub mod harness;
pub mod measures;
pub mod patterns;
pub mod sampler;
pub mod spatial;
pub mod torus;

pub use dimension::{DimensionEstimate, EstimateKind};
pub use error::{ConstructionDiagnostics, Error, Result};
pub use expsum::{SweepParams, SweepReport};
pub use harness::{ExperimentConfig, TrialReport};
pub use measures::GridMeasure;
pub use patterns::{PatternSpec, RoughPattern, SurfacePattern, TranslationalPattern};
pub use sampler::{ConstructionParams, WeightedConfiguration};
pub use torus::{Frequency, TorusCube, TorusPoint};
