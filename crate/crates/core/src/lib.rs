//! Harmonic measure of 4-corner Cantor sets.
//!
//! Builds non-homogeneous 4-corner Cantor sets from a scale sequence, samples
//! the harmonic measure of their complement with walk-on-spheres, and computes
//! cylinder ratio statistics and entropy-based dimension estimates.

pub mod address;
pub mod entropy;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod oracle;
pub mod ratios;
pub mod real;
pub mod rng;
pub mod sequence;
pub mod stats;
pub mod table;
pub mod wos;

pub use address::CylinderAddress;
pub use error::{Error, Result};
pub use geometry::{
    containing_cylinder, distance_to_approximation, square_of, CantorGeometry, SquareRegion,
};
pub use real::Real;
pub use rng::RngStream;
pub use sequence::{sidelength, PerturbationPattern, ScaleSequence, SequenceKind};
pub use stats::Estimate;
pub use table::{CylinderMeasureTable, TableHeader, TableSource, COUNT_FLOOR};
pub use wos::{exterior_reentry, run_campaign, sample_exit, WosParams, WosSampler};

pub type ScaleSequenceF64 = ScaleSequence<f64>;
pub type ScaleSequenceF32 = ScaleSequence<f32>;
pub type CantorGeometryF64 = CantorGeometry<f64>;
pub type CantorGeometryF32 = CantorGeometry<f32>;
pub type WosParamsF64 = WosParams<f64>;
pub type WosParamsF32 = WosParams<f32>;
