//! Layered NOMA compressive random access (L-CRA) with Gaussian spreading.
//!
//! Devices are split into `Q` power layers of `M` devices each. Every active
//! device spreads its symbols with a random complex Gaussian signature and
//! uses power control so that its receive power equals the level `V_q` of its
//! layer. The receiver detects the active set layer by layer, strongest first,
//! and cancels each reconstructed layer before moving on.
//!
//! * [`model`] draws spreading ensembles and received slots.
//! * [`stats`] holds the chi-squared distribution, tail bounds and the
//!   random-sum moment calculators.
//! * [`design`] computes the large-system MMSE SIR, the power-level recursion
//!   and the asymptotic and finite-size error probabilities.
//! * [`detect`] implements the exact MAP detector, the coordinate-ascent
//!   variational detector, LMMSE reconstruction and the SIC pipeline.
//! * [`harness`] runs reproducible Monte Carlo sweeps and writes CSV.

pub mod design;
pub mod detect;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod stats;

pub use error::{Error, Result};

/// Complex sample type used throughout.
pub type C64 = num_complex::Complex64;
/// Dense complex matrix (column-major).
pub type CMatrix = nalgebra::DMatrix<C64>;
/// Dense complex column vector.
pub type CVector = nalgebra::DVector<C64>;
