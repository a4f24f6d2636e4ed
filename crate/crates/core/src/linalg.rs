//! Small dense complex linear-algebra helpers on top of `nalgebra`.

use nalgebra::{Cholesky, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{CMatrix, C64};

/// Draws a circularly symmetric complex Gaussian sample with total variance `var`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, var: f64) -> C64 {
    let scale = (0.5 * var).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(scale * re, scale * im)
}

/// `rows x cols` matrix of i.i.d. CN(0, var) entries, filled column by column.
pub fn complex_normal_matrix<R: Rng + ?Sized>(
    rng: &mut R,
    rows: usize,
    cols: usize,
    var: f64,
) -> CMatrix {
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        data.push(complex_normal(rng, var));
    }
    CMatrix::from_vec(rows, cols, data)
}

/// Cholesky factor of a Hermitian positive-definite matrix.
///
/// Panics if the matrix is not numerically positive definite; every caller
/// passes `sigma2 * I + (PSD)` with `sigma2 > 0`.
pub fn cholesky(m: CMatrix) -> Cholesky<C64, Dyn> {
    Cholesky::new(m).expect("matrix is not Hermitian positive definite")
}

/// `ln det` of the matrix factored by `chol`.
pub fn ln_det(chol: &Cholesky<C64, Dyn>) -> f64 {
    let l = chol.l_dirty();
    2.0 * (0..l.nrows()).map(|i| l[(i, i)].re.ln()).sum::<f64>()
}

/// `sum_t y_t^H R^{-1} y_t` for the columns `y_t` of `y`, given the Cholesky
/// factor of `R`.
pub fn quad_form_sum(chol: &Cholesky<C64, Dyn>, y: &CMatrix) -> f64 {
    let mut w = y.clone();
    chol.l_dirty()
        .solve_lower_triangular_mut(&mut w);
    w.iter().map(|z| z.norm_sqr()).sum()
}

/// Inverse of a Hermitian positive-definite matrix.
pub fn inverse_hpd(m: CMatrix) -> CMatrix {
    cholesky(m).inverse()
}

/// `sigma2 * I + v * sum_m w_m g_m g_m^H`, accumulated column by column.
pub fn weighted_gram(g: &CMatrix, weights: &[f64], v: f64, sigma2: f64) -> CMatrix {
    let n = g.nrows();
    let mut r = CMatrix::identity(n, n) * C64::from(sigma2);
    for (m, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let col = g.column(m);
        r.gerc(C64::from(v * w), &col, &col, C64::from(1.0));
    }
    r
}

/// Columns of `g` listed in `idx`, in that order.
pub fn select_columns(g: &CMatrix, idx: &[usize]) -> CMatrix {
    CMatrix::from_fn(g.nrows(), idx.len(), |r, c| g[(r, idx[c])])
}

/// Sum of squared magnitudes of all entries.
pub fn frobenius_sq(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}
