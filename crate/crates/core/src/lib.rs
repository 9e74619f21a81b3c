//! Motor-imagery EEG classification with a divergence-driven 1D CNN.
//!
//! The pipeline: stratified split, optional training-set augmentation,
//! optional filter-bank + CSP transformation fitted on training data only,
//! a convolutional feature extractor regressed onto rows of a modified
//! Walsh matrix, and a minimum-distance classifier over those rows.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the `*32` / `*64`
//! aliases below name the concrete instantiations.

pub mod augment;
pub mod classify;
pub mod data;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod metrics;
pub mod network;
pub mod preprocess;
pub mod scalar;
pub mod seed;
pub mod walsh;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Epoch32 = data::Epoch<f32>;
pub type Epoch64 = data::Epoch<f64>;
pub type EpochSet32 = data::EpochSet<f32>;
pub type EpochSet64 = data::EpochSet<f64>;
pub type CspModel32 = preprocess::CspModel<f32>;
pub type CspModel64 = preprocess::CspModel<f64>;
pub type NetworkParams32 = network::NetworkParams<f32>;
pub type NetworkParams64 = network::NetworkParams<f64>;
pub type Network32 = network::Network<f32>;
pub type Network64 = network::Network<f64>;
pub type MdnClassifier32 = classify::MdnClassifier<f32>;
pub type MdnClassifier64 = classify::MdnClassifier<f64>;

/// Library version recorded in experiment reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
