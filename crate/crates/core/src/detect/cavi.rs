use crate::linalg::{inverse_hpd, weighted_gram};
use crate::{CMatrix, CVector, C64};

use super::gram;

/// Mean-field activity beliefs after a CAVI run.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorState {
    /// `psi_m(1)` for every device.
    pub beliefs: Vec<f64>,
    pub iterations: usize,
    /// Largest absolute belief change in the final sweep.
    pub last_delta: f64,
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Coordinate-ascent mean-field detector for one layer.
///
/// The inverse of the soft covariance `sigma2 I + V sum_l q_l g_l g_l^H` is
/// cached and kept current with rank-one corrections as individual beliefs
/// change; it is rebuilt from scratch at the start of every sweep.
pub struct Cavi<'a> {
    g: &'a CMatrix,
    v: f64,
    sigma2: f64,
    t: usize,
    prior_log_odds: f64,
    gram: CMatrix,
    beliefs: Vec<f64>,
    inverse: CMatrix,
    a: CVector,
    sa: CVector,
    sweeps: usize,
    last_delta: f64,
}

impl<'a> Cavi<'a> {
    /// Beliefs start at the prior `rho`.
    pub fn new(y: &CMatrix, g: &'a CMatrix, v: f64, sigma2: f64, rho: f64) -> Self {
        let n = g.nrows();
        let m = g.ncols();
        let mut cavi = Cavi {
            g,
            v,
            sigma2,
            t: y.ncols(),
            prior_log_odds: (rho / (1.0 - rho)).ln(),
            gram: gram(y),
            beliefs: vec![rho; m],
            inverse: CMatrix::zeros(n, n),
            a: CVector::zeros(n),
            sa: CVector::zeros(n),
            sweeps: 0,
            last_delta: 0.0,
        };
        cavi.refactor();
        cavi
    }

    /// Rebuilds the cached inverse from the current beliefs.
    pub fn refactor(&mut self) {
        self.inverse = inverse_hpd(weighted_gram(self.g, &self.beliefs, self.v, self.sigma2));
    }

    pub fn beliefs(&self) -> &[f64] {
        &self.beliefs
    }

    /// Cached inverse of the soft covariance at the current beliefs.
    pub fn inverse(&self) -> &CMatrix {
        &self.inverse
    }

    /// Posterior log-odds of device `m` given the others' current beliefs.
    ///
    /// With `R` the leave-one-out soft covariance, `alpha = g^H R^{-1} g` and
    /// `z = sum_t |g^H R^{-1} y_t|^2`, the log-odds are
    /// `ln(rho/(1-rho)) - T ln(1 + V alpha) + V z / (1 + V alpha)`.
    fn log_odds(&mut self, m: usize) -> (f64, f64, f64) {
        let g = self.g.column(m);
        self.a.gemv(C64::from(1.0), &self.inverse, &g, C64::from(0.0));
        let c0 = g.dotc(&self.a).re;
        let w = self.v * self.beliefs[m];
        let denom = 1.0 - w * c0;
        let alpha = c0 / denom;
        self.sa.gemv(C64::from(1.0), &self.gram, &self.a, C64::from(0.0));
        let z = self.a.dotc(&self.sa).re / (denom * denom);
        let va = self.v * alpha;
        let lambda = self.prior_log_odds - self.t as f64 * va.ln_1p() + self.v * z / (1.0 + va);
        (lambda, alpha, denom)
    }

    /// Updates the belief of device `m` and returns the absolute change.
    pub fn update(&mut self, m: usize) -> f64 {
        let (lambda, alpha, denom) = self.log_odds(m);
        let old = self.beliefs[m];
        let new = logistic(lambda);
        let w_old = self.v * old;
        let w_new = self.v * new;
        // Remove the old rank-one term and add the new one in a single
        // correction along A g, where A is the inverse before the update.
        let coef = w_old / denom - w_new / ((1.0 + w_new * alpha) * denom * denom);
        if coef != 0.0 {
            self.inverse
                .gerc(C64::from(coef), &self.a, &self.a, C64::from(1.0));
        }
        self.beliefs[m] = new;
        (new - old).abs()
    }

    /// One sweep over the devices in `order`, starting from a fresh inverse.
    pub fn sweep_in_order(&mut self, order: &[usize]) -> f64 {
        self.refactor();
        let mut delta: f64 = 0.0;
        for &m in order {
            delta = delta.max(self.update(m));
        }
        self.sweeps += 1;
        self.last_delta = delta;
        delta
    }

    pub fn sweep(&mut self) -> f64 {
        let order: Vec<usize> = (0..self.g.ncols()).collect();
        self.sweep_in_order(&order)
    }

    pub fn into_state(self) -> PosteriorState {
        PosteriorState {
            beliefs: self.beliefs,
            iterations: self.sweeps,
            last_delta: self.last_delta,
        }
    }
}

/// Runs `n_sweeps` full CAVI sweeps in device-index order.
pub fn cavi_detect(
    y: &CMatrix,
    g: &CMatrix,
    v: f64,
    sigma2: f64,
    rho: f64,
    n_sweeps: usize,
) -> PosteriorState {
    let order: Vec<usize> = (0..g.ncols()).collect();
    cavi_detect_ordered(y, g, v, sigma2, rho, n_sweeps, &order)
}

/// Like [`cavi_detect`] with an explicit per-sweep device order.
pub fn cavi_detect_ordered(
    y: &CMatrix,
    g: &CMatrix,
    v: f64,
    sigma2: f64,
    rho: f64,
    n_sweeps: usize,
    order: &[usize],
) -> PosteriorState {
    assert!(n_sweeps >= 1, "at least one sweep");
    let mut cavi = Cavi::new(y, g, v, sigma2, rho);
    for _ in 0..n_sweeps {
        cavi.sweep_in_order(order);
    }
    cavi.into_state()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::{log_ap, map_bruteforce, select_top_b};
    use crate::linalg::{complex_normal_matrix, select_columns};
    use rand::seq::{index::sample, SliceRandom};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_device_matches_exact_posterior() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let n = rng.random_range(2..12);
            let t = rng.random_range(1..40);
            let v = 10f64.powf(rng.random_range(-1.0..1.5));
            let s2 = rng.random_range(0.2..2.0);
            let rho = rng.random_range(0.01..0.6);
            let g = complex_normal_matrix(&mut rng, n, 1, 1.0 / n as f64);
            let active = rng.random::<bool>();
            let mut y = complex_normal_matrix(&mut rng, n, t, s2);
            if active {
                y += &g * complex_normal_matrix(&mut rng, 1, t, v);
            }
            let st = cavi_detect(&y, &g, v, s2, rho, 1);
            let l1 = log_ap(&y, &g, &[true], v, s2, rho);
            let l0 = log_ap(&y, &g, &[false], v, s2, rho);
            let exact = 1.0 / (1.0 + (l0 - l1).exp());
            assert!((st.beliefs[0] - exact).abs() < 1e-8, "{} vs {exact}", st.beliefs[0]);
        }
    }

    #[test]
    fn vanishing_power_returns_prior() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = complex_normal_matrix(&mut rng, 8, 20, 0.125);
        let y = complex_normal_matrix(&mut rng, 8, 30, 1.0);
        let st = cavi_detect(&y, &g, 1e-14, 1.0, 0.07, 3);
        for q in st.beliefs {
            assert!((q - 0.07).abs() < 1e-9);
        }
    }

    #[test]
    fn incremental_inverse_tracks_direct_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let (n, m, t) = (12, 40, 30);
            let g = complex_normal_matrix(&mut rng, n, m, 1.0 / n as f64);
            let support: Vec<usize> = sample(&mut rng, m, 4).into_vec();
            let y = select_columns(&g, &support) * complex_normal_matrix(&mut rng, 4, t, 20.0)
                + complex_normal_matrix(&mut rng, n, t, 1.0);
            let mut cavi = Cavi::new(&y, &g, 20.0, 1.0, 0.1);
            cavi.sweep();
            cavi.sweep();
            let direct = inverse_hpd(weighted_gram(&g, cavi.beliefs(), 20.0, 1.0));
            let err = (cavi.inverse() - &direct).norm() / direct.norm();
            assert!(err < 1e-8, "{err}");
        }
    }

    #[test]
    fn repeated_runs_are_bit_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = complex_normal_matrix(&mut rng, 10, 30, 0.1);
        let y = complex_normal_matrix(&mut rng, 10, 20, 2.0);
        let a = cavi_detect(&y, &g, 5.0, 1.0, 0.1, 4);
        let b = cavi_detect(&y, &g, 5.0, 1.0, 0.1, 4);
        assert_eq!(a, b);
        assert_eq!(a.iterations, 4);
        assert!(a.beliefs.iter().all(|q| (0.0..=1.0).contains(q)));
    }

    #[test]
    fn permutation_equivariance_with_permuted_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (n, m, t) = (8, 12, 25);
        let g = complex_normal_matrix(&mut rng, n, m, 1.0 / n as f64);
        let y = select_columns(&g, &[1, 7]) * complex_normal_matrix(&mut rng, 2, t, 30.0)
            + complex_normal_matrix(&mut rng, n, t, 1.0);
        let mut perm: Vec<usize> = (0..m).collect();
        perm.shuffle(&mut rng);
        // Column j of the permuted matrix is original device perm[j].
        let gp = select_columns(&g, &perm);
        let mut inv = vec![0; m];
        for (j, &p) in perm.iter().enumerate() {
            inv[p] = j;
        }
        // Visit the permuted devices in the original index order.
        let order: Vec<usize> = (0..m).map(|i| inv[i]).collect();
        let base = cavi_detect(&y, &g, 30.0, 1.0, 0.15, 3);
        let permuted = cavi_detect_ordered(&y, &gp, 30.0, 1.0, 0.15, 3, &order);
        for (j, &p) in perm.iter().enumerate() {
            assert!((permuted.beliefs[j] - base.beliefs[p]).abs() < 1e-10);
        }
        let map_base = map_bruteforce(&y, &g, 30.0, 1.0, 0.15).unwrap();
        let map_perm = map_bruteforce(&y, &gp, 30.0, 1.0, 0.15).unwrap();
        for (j, &p) in perm.iter().enumerate() {
            assert_eq!(map_perm[j], map_base[p]);
        }
    }

    #[test]
    fn high_snr_support_agrees_with_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (n, m, t) = (8, 12, 50);
        let trials = 60;
        let mut agree = 0;
        for _ in 0..trials {
            let g = complex_normal_matrix(&mut rng, n, m, 1.0 / n as f64);
            let support: Vec<usize> = sample(&mut rng, m, 2).into_vec();
            let y = select_columns(&g, &support) * complex_normal_matrix(&mut rng, 2, t, 100.0)
                + complex_normal_matrix(&mut rng, n, t, 1.0);
            let st = cavi_detect(&y, &g, 100.0, 1.0, 2.0 / 12.0, 5);
            let map = map_bruteforce(&y, &g, 100.0, 1.0, 2.0 / 12.0).unwrap();
            let map_support: Vec<usize> = (0..m).filter(|&i| map[i]).collect();
            agree += (select_top_b(&st, map_support.len()) == map_support) as usize;
        }
        assert!(agree as f64 >= 0.9 * trials as f64, "{agree}/{trials}");
    }
}
