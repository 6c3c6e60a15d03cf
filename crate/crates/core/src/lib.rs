//! Wavelet density estimation for spatially dependent lattice data.
//!
//! The crate has three layers:
//!
//! * sampling — [`lattice`] (index sets, concliques, train/validate splits)
//!   and [`gmrf`] (conclique-based Gibbs simulation of coupled Gaussian
//!   Markov random fields and the transformation to a bivariate mixture
//!   target with known density);
//! * estimation — [`wavelet`] (Haar and Daubechies-4 tensor bases with
//!   cascade evaluation), [`estimator`] (empirical coefficients, linear,
//!   hard- and soft-thresholded density estimates) and [`besov`]
//!   (sequence norms and the level/threshold schedules the convergence
//!   theory prescribes);
//! * assessment — [`postprocess`] (positive-part normalization, integrated
//!   squared error, the sample-based verification criterion and primary
//!   level selection) plus the [`quad`] helpers they integrate with.

pub mod besov;
pub mod error;
pub mod estimator;
pub mod gmrf;
pub mod lattice;
pub mod postprocess;
pub mod quad;
pub mod stats;
pub mod wavelet;

pub use error::{Error, Result};
