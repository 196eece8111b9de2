//! Verification-friendly sparsification of dense ReLU classifiers.
//!
//! A trained network is rewritten layer by layer into the sparsest one, by L1
//! mass, that keeps the same activation regions and classes on a validation
//! set. The crate also ships interval and polyhedral robustness verifiers, an
//! exact region-enumerating oracle, a magnitude-pruning baseline and the
//! harness that compares them. Numeric code is generic over [`Scalar`]
//! (`f32` or `f64`).

pub mod baselines;
pub mod data;
pub mod error;
pub mod harness;
pub mod lp;
pub mod network;
pub mod oracle;
pub mod scalar;
pub mod sparsify;
pub mod train;
pub mod util;
pub mod verify;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use network::{Activation, ActivationPattern, Layer, Network, NnzCount};
pub use scalar::Scalar;

pub type NetworkF32 = Network<f32>;
pub type NetworkF64 = Network<f64>;
pub type LayerF32 = Layer<f32>;
pub type LayerF64 = Layer<f64>;
pub type SampleF32 = data::LabeledSample<f32>;
pub type SampleF64 = data::LabeledSample<f64>;
pub type DatasetF32 = data::Dataset<f32>;
pub type DatasetF64 = data::Dataset<f64>;
