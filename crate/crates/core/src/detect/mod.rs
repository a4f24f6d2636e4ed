//! Per-layer activity detection and successive interference cancellation.
//!
//! Under the Gaussian signal model an active device of power `V` adds
//! `V g g^H` to the covariance of every received column, so the activity
//! vector `b` of a layer is identified through
//! `R(b) = sigma2 I + V G diag(b) G^H`.

mod cavi;
mod likelihood;
mod pep;
mod sic;

pub use cavi::{cavi_detect, cavi_detect_ordered, Cavi, PosteriorState};
pub use likelihood::{
    log_ap, log_prior, map_bruteforce, map_bruteforce_with_size, model_covariance, Hypothesis,
    MAX_BRUTEFORCE_DEVICES,
};
pub use pep::{empirical_pep, EmpiricalPep, FlipDirection};
pub use sic::{
    lmmse_reconstruct, select_top_b, sic_pipeline, Cancellation, DetectionReport, Detector,
    LayerDetection, SicOptions,
};

use crate::CMatrix;

/// `Y Y^H`, the unnormalized sample covariance of the received columns.
pub(crate) fn gram(y: &CMatrix) -> CMatrix {
    y * y.adjoint()
}

/// `Re tr(A S)` for Hermitian `A`, `S`.
pub(crate) fn trace_product(a: &CMatrix, s: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for j in 0..n {
        for i in 0..n {
            acc += (a[(i, j)] * s[(j, i)]).re;
        }
    }
    acc
}
