//! Sketched principal component analysis under spiked models.
//!
//! The crate has three layers:
//!
//! * [`numerics`] and [`sketch`] build and apply random sketching operators
//!   (Haar, iid, uniform sampling, SRHT, DFT, CountSketch, leverage, OSNAP).
//! * [`theory`] evaluates the limiting location of sketched spiked
//!   eigenvalues and the overlap of the sketched principal directions with
//!   the population ones.
//! * [`model`], [`harness`] and [`fielddata`] generate spiked data, run
//!   seeded Monte Carlo comparisons against the theory, and compute the
//!   pivotal `T` statistic on real matrices.

pub mod error;
pub mod fielddata;
pub mod harness;
pub mod model;
pub mod numerics;
pub mod sketch;
pub mod theory;

pub use error::{Error, Result};
pub use numerics::{DenseMatrix, RngStream};
