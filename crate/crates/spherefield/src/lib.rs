//! Simulation and empirical verification toolkit for isotropic Gaussian
//! random fields on the unit sphere whose angular power spectrum decays like
//! `C_l = G(l) * l^{-alpha}` with `2 < alpha < 4`.
//!
//! The crate provides
//! - the covariance/variogram machinery for such spectra, with certified
//!   truncation error control ([`spectral`]),
//! - exact Gaussian linear algebra on finite point sets (Cholesky sampling,
//!   conditional variances, determinant identities) ([`gaussian`]),
//! - spherical-harmonic synthesis of band-limited fields ([`synthesis`]),
//! - occupation-measure and local-time estimators ([`local_time`]),
//! - a set of Monte Carlo experiments that test the predicted variogram
//!   scaling, strong local nondeterminism, small-ball probabilities,
//!   Chung-type laws and local-time moments ([`experiments`]),
//! - a batch runner with JSON configs and reproducible outputs ([`runner`]).
//!
//! See the `examples/` directory for one runnable walkthrough per capability.

pub mod error;
pub mod experiments;
pub mod fit;
pub mod gaussian;
pub mod geometry;
pub mod local_time;
pub mod output;
pub mod rng;
pub mod runner;
pub mod spectral;
pub mod synthesis;

pub use error::{Error, Result};
