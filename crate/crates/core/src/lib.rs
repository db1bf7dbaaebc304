//! Interlaced particle processes on the circle.
//!
//! Exact finite-state kernels and couplings, continuous interlacing walks,
//! Brownian couplings through Skorohod reflection, and the determinantal
//! bead model on the cylinder.

pub mod bead;
pub mod brownian;
pub mod circle_discrete;
pub mod config;
pub mod error;
pub mod gt_line;
pub mod interlace;
pub mod matrix;
pub mod quadrature;
pub mod rng;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
