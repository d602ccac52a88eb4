//! Wind gust detection from drone IMU logs.
//!
//! The crate covers the whole offline and online path: parsing 100 Hz flight
//! logs, cutting them into one-second windows, summarizing each window with 40
//! statistical features, optional dominant-frequency filtering, tree-ensemble
//! training and evaluation, and a streaming detector that replays a trained
//! model over a live sample feed.
//!
//! Feature and spectral code is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below pin the `f64` instantiations the rest of the pipeline uses.

// `!(x > 0.0)` style checks are used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod corpus;
pub mod datamodel;
pub mod error;
pub mod experiment;
pub mod features;
pub mod learn;
pub mod pipeline;
pub mod realtime;
pub mod scalar;
pub mod spectral;
pub mod synth;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Window = features::Window<f64>;
pub type FeatureVector = features::FeatureVector<f64>;
pub type Spectrum = spectral::Spectrum<f64>;
pub type PsdEstimate = spectral::PsdEstimate<f64>;
