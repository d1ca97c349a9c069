//! Modeling of multi-port (multi-mode) antennas from spatially quantized
//! calibration data, and coherent maximum-likelihood direction finding on
//! top of those models.
//!
//! Two models are provided:
//!
//! - [`ait`]: sector-wise least-squares mapping from a virtual uniform linear
//!   array to the antenna response, with per-mode column selection in the
//!   overlap between neighbouring sectors.
//! - [`wm`]: a truncated Fourier expansion `a(θ) = H Ψ(θ)` whose sampling
//!   matrix `H` is found by least squares.
//!
//! Both implement [`AntennaResponse`], which is what the estimator in [`doa`]
//! searches over. [`sim`] drives Monte Carlo RMSE experiments and parameter
//! sweeps, and [`fixtures`] carries the published reference matrices of the
//! four-port prototype.
//!
//! Angles are in degrees at every public boundary.

pub mod ait;
pub mod doa;
pub mod emf;
mod error;
pub mod fixtures;
pub mod grid;
pub mod linalg;
pub mod response;
pub mod sim;
pub mod ula;
pub mod wm;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use emf::EmfDataset;
pub use response::AntennaResponse;

/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<Complex64>;
/// Dense complex column vector.
pub type CVector = nalgebra::DVector<Complex64>;

/// Lower edge of the field of view, degrees.
pub const FOV_MIN_DEG: f64 = -90.0;
/// Upper edge of the field of view, degrees.
pub const FOV_MAX_DEG: f64 = 90.0;

/// Tolerance used when matching angles against grid points, degrees.
pub(crate) const ANGLE_EPS: f64 = 1e-9;
