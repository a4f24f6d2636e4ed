use rand::Rng;

use crate::linalg::{complex_normal_matrix, select_columns};
use crate::stats::{chi2_cdf, ks_pvalue, ks_statistic};
use crate::{CMatrix, Error, Result};

use super::gram;
use super::likelihood::Hypothesis;

/// Which single-device error a flip represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlipDirection {
    /// The flipped device is idle in the true vector.
    FalseAlarm,
    /// The flipped device is active in the true vector.
    MissedDetection,
}

impl FlipDirection {
    pub fn label(&self) -> &'static str {
        match self {
            FlipDirection::FalseAlarm => "fa",
            FlipDirection::MissedDetection => "md",
        }
    }
}

/// Monte Carlo estimate of a single-flip pairwise error probability.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalPep {
    pub direction: FlipDirection,
    pub estimate: f64,
    pub stderr: f64,
    pub n_trials: usize,
    /// `g_l^H R^{-1} g_l` with `R` the covariance of whichever of the two
    /// vectors leaves device `l` idle.
    pub alpha: f64,
    /// KS distance between the rescaled quadratic-form statistic and the
    /// chi-squared law with `2T` degrees of freedom.
    pub ks_statistic: f64,
    pub ks_pvalue: f64,
}

/// Frequency with which the single-flip neighbour of `b_true` outscores it
/// under data drawn from `b_true` with the Gaussian symbol model.
///
/// Alongside, `sum_t y_t^H (R(b)^{-1} - R(b')^{-1}) y_t` is rescaled to a
/// `chi2_{2T}` variable (by `2 (1 + V alpha) / (V alpha)` for a false alarm,
/// `-2 / (V alpha)` for a missed detection) and tested against that law.
#[allow(clippy::too_many_arguments)]
pub fn empirical_pep<R: Rng + ?Sized>(
    g: &CMatrix,
    b_true: &[bool],
    flip_index: usize,
    v: f64,
    sigma2: f64,
    rho: f64,
    t: usize,
    n_trials: usize,
    rng: &mut R,
) -> Result<EmpiricalPep> {
    let (n, m) = (g.nrows(), g.ncols());
    if b_true.len() != m || flip_index >= m {
        return Err(Error::Precondition(format!(
            "activity vector of length {} / flip index {flip_index} do not match M = {m}",
            b_true.len()
        )));
    }
    if n_trials == 0 || t == 0 {
        return Err(Error::Precondition("need at least one trial and one symbol".into()));
    }
    let mut b_flip = b_true.to_vec();
    b_flip[flip_index] = !b_flip[flip_index];
    let direction = if b_true[flip_index] {
        FlipDirection::MissedDetection
    } else {
        FlipDirection::FalseAlarm
    };
    let h_true = Hypothesis::new(g, b_true, v, sigma2, rho);
    let h_flip = Hypothesis::new(g, &b_flip, v, sigma2, rho);
    let idle = match direction {
        FlipDirection::FalseAlarm => &h_true,
        FlipDirection::MissedDetection => &h_flip,
    };
    let gl = g.column(flip_index);
    let alpha = gl.dotc(&(idle.inverse() * gl)).re;
    let va = v * alpha;
    let scale = match direction {
        FlipDirection::FalseAlarm => 2.0 * (1.0 + va) / va,
        FlipDirection::MissedDetection => -2.0 / va,
    };

    let support: Vec<usize> = (0..m).filter(|&i| b_true[i]).collect();
    let g_active = select_columns(g, &support);
    let mut errors = 0usize;
    let mut stats = Vec::with_capacity(n_trials);
    for _ in 0..n_trials {
        let mut y = complex_normal_matrix(rng, n, t, sigma2);
        if !support.is_empty() {
            y += &g_active * complex_normal_matrix(rng, support.len(), t, v);
        }
        let s = gram(&y);
        if h_flip.log_ap_gram(&s, t) > h_true.log_ap_gram(&s, t) {
            errors += 1;
        }
        stats.push(scale * (h_true.quad_gram(&s) - h_flip.quad_gram(&s)));
    }
    let estimate = errors as f64 / n_trials as f64;
    let dof = 2 * t as u32;
    let ks = ks_statistic(&stats, |x| chi2_cdf(dof, x.max(0.0)).unwrap_or(0.0));
    Ok(EmpiricalPep {
        direction,
        estimate,
        stderr: (estimate * (1.0 - estimate) / n_trials as f64).sqrt(),
        n_trials,
        alpha,
        ks_statistic: ks,
        ks_pvalue: ks_pvalue(n_trials, ks),
    })
}
