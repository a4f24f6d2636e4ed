use std::cmp::Ordering;

use crate::linalg::{cholesky, ln_det, weighted_gram};
use crate::{CMatrix, Error, Result};

use super::{gram, trace_product};

/// Largest layer size accepted by the exhaustive MAP search.
pub const MAX_BRUTEFORCE_DEVICES: usize = 16;

/// `sigma2 I + V G diag(w) G^H` for binary or fractional weights `w`.
pub fn model_covariance(g: &CMatrix, weights: &[f64], v: f64, sigma2: f64) -> CMatrix {
    assert_eq!(g.ncols(), weights.len(), "one weight per signature");
    weighted_gram(g, weights, v, sigma2)
}

/// `ln Pr(b)` under independent Bernoulli(`rho`) activity.
pub fn log_prior(b: &[bool], rho: f64) -> f64 {
    let active = b.iter().filter(|&&x| x).count();
    let idle = b.len() - active;
    let on = if active == 0 { 0.0 } else { active as f64 * rho.ln() };
    let off = if idle == 0 { 0.0 } else { idle as f64 * (1.0 - rho).ln() };
    on + off
}

/// One activity hypothesis with its covariance pre-factored, so it can be
/// scored against many received blocks.
#[derive(Debug, Clone)]
pub struct Hypothesis {
    inverse: CMatrix,
    ln_det: f64,
    prior: f64,
}

impl Hypothesis {
    pub fn new(g: &CMatrix, b: &[bool], v: f64, sigma2: f64, rho: f64) -> Self {
        let w: Vec<f64> = b.iter().map(|&x| if x { 1.0 } else { 0.0 }).collect();
        let chol = cholesky(model_covariance(g, &w, v, sigma2));
        Hypothesis {
            ln_det: ln_det(&chol),
            inverse: chol.inverse(),
            prior: log_prior(b, rho),
        }
    }

    /// `R(b)^{-1}`
    pub fn inverse(&self) -> &CMatrix {
        &self.inverse
    }

    /// Log posterior up to a `b`-independent constant, given the gram matrix
    /// `S = Y Y^H` of a block of `t` columns.
    pub fn log_ap_gram(&self, s: &CMatrix, t: usize) -> f64 {
        -(t as f64) * self.ln_det - trace_product(&self.inverse, s) + self.prior
    }

    /// `sum_t y_t^H R(b)^{-1} y_t` given `S = Y Y^H`.
    pub fn quad_gram(&self, s: &CMatrix) -> f64 {
        trace_product(&self.inverse, s)
    }
}

/// `ln f(Y | b) + ln Pr(b)` without the constant `-N T ln pi`.
pub fn log_ap(y: &CMatrix, g: &CMatrix, b: &[bool], v: f64, sigma2: f64, rho: f64) -> f64 {
    Hypothesis::new(g, b, v, sigma2, rho).log_ap_gram(&gram(y), y.ncols())
}

fn support_size(mask: u32) -> u32 {
    mask.count_ones()
}

/// True when `a` precedes `b` under the tie rule: smaller support first,
/// then the lexicographically smaller activity vector (device 0 first).
fn preferred_on_tie(a: u32, b: u32) -> bool {
    match support_size(a).cmp(&support_size(b)) {
        Ordering::Less => true,
        Ordering::Greater => false,
        Ordering::Equal => {
            let diff = a ^ b;
            diff != 0 && (a & (diff & diff.wrapping_neg())) == 0
        }
    }
}

fn mask_to_vec(mask: u32, m: usize) -> Vec<bool> {
    (0..m).map(|i| mask >> i & 1 == 1).collect()
}

fn search(
    y: &CMatrix,
    g: &CMatrix,
    v: f64,
    sigma2: f64,
    rho: f64,
    size: Option<usize>,
) -> Result<Vec<bool>> {
    let m = g.ncols();
    if m > MAX_BRUTEFORCE_DEVICES {
        return Err(Error::Precondition(format!(
            "exhaustive MAP search over {m} devices exceeds the limit of {MAX_BRUTEFORCE_DEVICES}"
        )));
    }
    if let Some(k) = size {
        if k > m {
            return Err(Error::Precondition(format!("support size {k} exceeds M = {m}")));
        }
    }
    let s = gram(y);
    let t = y.ncols();
    let mut best: Option<(f64, u32)> = None;
    for mask in 0u32..(1u32 << m) {
        if size.is_some_and(|k| support_size(mask) as usize != k) {
            continue;
        }
        let b = mask_to_vec(mask, m);
        let score = Hypothesis::new(g, &b, v, sigma2, rho).log_ap_gram(&s, t);
        let better = match best {
            None => true,
            Some((bs, bm)) => score > bs || (score == bs && preferred_on_tie(mask, bm)),
        };
        if better {
            best = Some((score, mask));
        }
    }
    let (_, mask) = best.expect("search space is never empty");
    Ok(mask_to_vec(mask, m))
}

/// Exhaustive MAP activity detection over all `2^M` vectors.
pub fn map_bruteforce(y: &CMatrix, g: &CMatrix, v: f64, sigma2: f64, rho: f64) -> Result<Vec<bool>> {
    search(y, g, v, sigma2, rho, None)
}

/// Exhaustive MAP detection restricted to vectors with exactly `size`
/// active devices.
pub fn map_bruteforce_with_size(
    y: &CMatrix,
    g: &CMatrix,
    v: f64,
    sigma2: f64,
    rho: f64,
    size: usize,
) -> Result<Vec<bool>> {
    search(y, g, v, sigma2, rho, Some(size))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{complex_normal_matrix, select_columns};
    use crate::C64;
    use rand::seq::index::sample;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn naive_covariance(g: &CMatrix, w: &[f64], v: f64, sigma2: f64) -> CMatrix {
        let n = g.nrows();
        CMatrix::from_fn(n, n, |i, j| {
            let mut acc = if i == j { C64::from(sigma2) } else { C64::from(0.0) };
            for (m, &wm) in w.iter().enumerate() {
                acc += g[(i, m)] * g[(j, m)].conj() * (v * wm);
            }
            acc
        })
    }

    #[test]
    fn covariance_of_empty_support_is_scaled_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = complex_normal_matrix(&mut rng, 6, 9, 1.0 / 6.0);
        let r = model_covariance(&g, &[0.0; 9], 4.0, 0.3);
        assert_eq!(r, CMatrix::identity(6, 6) * C64::from(0.3));
    }

    #[test]
    fn covariance_rank_one_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = complex_normal_matrix(&mut rng, 5, 3, 0.2);
        let (v, s2) = (2.5, 0.4);
        let r = model_covariance(&g, &[0.0, 1.0, 0.0], v, s2);
        let det = r.clone().determinant();
        let want = s2.powi(4) * (s2 + v * g.column(1).norm_squared());
        assert!((det.re - want).abs() < 1e-12 * want && det.im.abs() < 1e-12);
    }

    #[test]
    fn covariance_matches_naive_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = complex_normal_matrix(&mut rng, 30, 100, 1.0 / 30.0);
        let mut w = vec![0.0; 100];
        for i in sample(&mut rng, 100, 5) {
            w[i] = 1.0;
        }
        let fast = model_covariance(&g, &w, 4.347, 1.0);
        let slow = naive_covariance(&g, &w, 4.347, 1.0);
        for (a, b) in fast.iter().zip(slow.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn single_device_log_ratio_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let (n, t) = (6, 9);
            let g = complex_normal_matrix(&mut rng, n, 1, 1.0 / n as f64);
            let y = complex_normal_matrix(&mut rng, n, t, 1.3);
            let (v, s2, rho) = (3.0, 0.7, 0.2);
            let diff = log_ap(&y, &g, &[true], v, s2, rho) - log_ap(&y, &g, &[false], v, s2, rho);
            // det R1 = s2^N (1 + V a) with a = |g|^2 / s2; Sherman-Morrison
            // gives R0^{-1} - R1^{-1} = V/(s2^2 (1 + V a)) g g^H.
            let a = g.column(0).norm_squared() / s2;
            let energy: f64 = (0..t)
                .map(|c| g.column(0).dotc(&y.column(c)).norm_sqr())
                .sum();
            let want = (rho / (1.0 - rho)).ln() - t as f64 * (v * a).ln_1p()
                + v / (s2 * s2 * (1.0 + v * a)) * energy;
            assert!((diff - want).abs() < 1e-10 * want.abs().max(1.0), "{diff} {want}");
        }
    }

    #[test]
    fn unit_modulus_rotation_leaves_scores_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = complex_normal_matrix(&mut rng, 5, 4, 0.2);
        let y = complex_normal_matrix(&mut rng, 5, 7, 1.0);
        let rot = &y * C64::from_polar(1.0, 0.83);
        for mask in 0..16u32 {
            let b = mask_to_vec(mask, 4);
            let a = log_ap(&y, &g, &b, 2.0, 0.5, 0.3);
            let c = log_ap(&rot, &g, &b, 2.0, 0.5, 0.3);
            assert!((a - c).abs() < 1e-10 * a.abs().max(1.0));
        }
    }

    #[test]
    fn zero_data_picks_empty_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let g = complex_normal_matrix(&mut rng, 4, 8, 0.25);
        let y = CMatrix::zeros(4, 10);
        let b = map_bruteforce(&y, &g, 5.0, 1.0, 0.05).unwrap();
        assert!(b.iter().all(|&x| !x));
    }

    #[test]
    fn strong_single_device_is_found() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = complex_normal_matrix(&mut rng, 8, 1, 1.0 / 8.0);
        let s = complex_normal_matrix(&mut rng, 1, 20, 50.0);
        let y = &g * s + complex_normal_matrix(&mut rng, 8, 20, 1.0);
        assert_eq!(map_bruteforce(&y, &g, 50.0, 1.0, 0.1).unwrap(), vec![true]);
    }

    #[test]
    fn refuses_large_layers() {
        let g = CMatrix::zeros(4, 17);
        let y = CMatrix::zeros(4, 2);
        assert!(matches!(map_bruteforce(&y, &g, 1.0, 1.0, 0.1), Err(Error::Precondition(_))));
    }

    #[test]
    fn tie_rule_prefers_small_then_lexicographic() {
        assert!(preferred_on_tie(0b0001, 0b0011));
        // [0, 1] precedes [1, 0].
        assert!(preferred_on_tie(0b10, 0b01));
        assert!(!preferred_on_tie(0b01, 0b10));
        // Identical signatures produce exact ties between single devices.
        let mut g = CMatrix::zeros(3, 2);
        g[(0, 0)] = C64::new(1.0, 0.0);
        g[(0, 1)] = C64::new(1.0, 0.0);
        let y = {
            let mut y = CMatrix::zeros(3, 4);
            for c in 0..4 {
                y[(0, c)] = C64::new(3.0, -1.0);
            }
            y
        };
        let b = map_bruteforce_with_size(&y, &g, 2.0, 0.5, 0.1, 1).unwrap();
        assert_eq!(b, vec![false, true]);
    }

    #[test]
    fn recovers_noiseless_sparse_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (n, m, t) = (8, 10, 50);
        let trials = 200;
        let mut hits = 0;
        for _ in 0..trials {
            let g = complex_normal_matrix(&mut rng, n, m, 1.0 / n as f64);
            let support: Vec<usize> = sample(&mut rng, m, 2).into_vec();
            let s = complex_normal_matrix(&mut rng, 2, t, 100.0);
            let y = select_columns(&g, &support) * s;
            let b = map_bruteforce(&y, &g, 100.0, 1.0, 0.2).unwrap();
            let truth: Vec<bool> = (0..m).map(|i| support.contains(&i)).collect();
            hits += (b == truth) as usize;
        }
        assert!(hits as f64 >= 0.99 * trials as f64, "{hits}/{trials}");
    }
}
