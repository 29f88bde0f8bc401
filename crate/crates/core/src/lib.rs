//! Fourier-series Kolmogorov–Arnold networks for molecular graphs.

pub mod error;
pub mod fitfn;
pub mod fkan;
pub mod gradcheck;
pub mod model;
pub mod molgraph;
pub mod parallel;
pub mod params;
pub mod rng;
pub mod synthetic;
pub mod train;

pub use error::{Error, Result};
