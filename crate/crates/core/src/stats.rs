//! Chi-squared distribution, the MD tail bound, random-sum moments and a few
//! small sample statistics used by the tests and the `moments` command.

use rand::Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};

use crate::{Error, Result};

const EPS: f64 = 1e-16;
const MAX_ITER: usize = 100_000;

/// Natural log of the gamma function (Lanczos, g = 7, 9 terms).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Reflection.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    let t = x + 7.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized incomplete gamma pair `(P(a, x), Q(a, x))`.
///
/// Series for `x < a + 1`, Lentz continued fraction otherwise; the smaller of
/// the two tails is always computed directly.
pub fn gamma_pq(a: f64, x: f64) -> Result<(f64, f64)> {
    if !(a > 0.0) || a.is_nan() {
        return Err(Error::Domain(format!("incomplete gamma shape {a} must be positive")));
    }
    if x.is_nan() || x < 0.0 {
        return Err(Error::Domain(format!("incomplete gamma argument {x} must be non-negative")));
    }
    if x == 0.0 {
        return Ok((0.0, 1.0));
    }
    if x.is_infinite() {
        return Ok((1.0, 0.0));
    }
    let log_prefactor = -x + a * x.ln() - ln_gamma(a);
    if x < a + 1.0 {
        let mut ap = a;
        let mut del = 1.0 / a;
        let mut sum = del;
        for _ in 0..MAX_ITER {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if del.abs() < sum.abs() * EPS {
                break;
            }
        }
        let p = (sum.ln() + log_prefactor).exp().min(1.0);
        Ok((p, 1.0 - p))
    } else {
        const TINY: f64 = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < EPS {
                break;
            }
        }
        let q = (h.ln() + log_prefactor).exp().min(1.0);
        Ok((1.0 - q, q))
    }
}

fn check_dof(dof: u32) -> Result<()> {
    if dof == 0 {
        return Err(Error::Domain("chi-squared degrees of freedom must be positive".into()));
    }
    Ok(())
}

/// `Pr(chi2_dof <= x)`.
pub fn chi2_cdf(dof: u32, x: f64) -> Result<f64> {
    check_dof(dof)?;
    Ok(gamma_pq(0.5 * dof as f64, 0.5 * x)?.0)
}

/// `Pr(chi2_dof > x)`, computed without cancellation in the far tail.
pub fn chi2_sf(dof: u32, x: f64) -> Result<f64> {
    check_dof(dof)?;
    Ok(gamma_pq(0.5 * dof as f64, 0.5 * x)?.1)
}

/// Upper bound `exp(-(T/2)(1 - r))` on `Pr(chi2_{2T} / 2T < r)`.
///
/// Only meaningful below the mean, so `r` must lie in `(0, 1)`.
pub fn md_tail_bound(t: usize, r: f64) -> Result<f64> {
    if t == 0 {
        return Err(Error::Precondition("slot length T must be positive".into()));
    }
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::Precondition(format!(
            "threshold ratio {r} is outside (0, 1); the low-error conditions do not hold"
        )));
    }
    Ok((-0.5 * t as f64 * (1.0 - r)).exp())
}

/// Moments of `Y = X_1 + ... + X_B` with `B ~ Binomial(M, rho)`,
/// `X_i ~ N(0, sigma2)`, next to those of the Gaussian `Z ~ N(0, M rho sigma2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentReport {
    pub k: u32,
    pub ey: f64,
    pub ez: f64,
    /// `E[B^(k/2)]` for even `k`.
    pub eb: Option<f64>,
    /// `E[Y^4] / E[Y^2]^2 - 3`, the same in every row.
    pub excess_kurtosis: f64,
}

/// `ln Pr(B = m)` for `B ~ Binomial(M, rho)`.
pub fn binomial_ln_pmf(m_total: u64, rho: f64, m: u64) -> f64 {
    if m > m_total {
        return f64::NEG_INFINITY;
    }
    let ln_choose = ln_factorial(m_total) - ln_factorial(m) - ln_factorial(m_total - m);
    let a = if m == 0 { 0.0 } else { m as f64 * rho.ln() };
    let b = if m == m_total { 0.0 } else { (m_total - m) as f64 * (1.0 - rho).ln() };
    ln_choose + a + b
}

fn ln_factorial(n: u64) -> f64 {
    if n < 64 {
        (2..=n).map(|i| (i as f64).ln()).sum()
    } else {
        ln_gamma(n as f64 + 1.0)
    }
}

/// `E[B^l]` for `B ~ Binomial(M, rho)` by direct summation over the pmf.
pub fn binomial_raw_moment(m_total: u64, rho: f64, l: u32) -> f64 {
    (0..=m_total)
        .map(|m| {
            let p = binomial_ln_pmf(m_total, rho, m).exp();
            if l == 0 {
                p
            } else {
                (m as f64).powi(l as i32) * p
            }
        })
        .sum()
}

/// `(k - 1)!!` for even `k >= 0`.
fn odd_double_factorial(k: u32) -> f64 {
    (1..k).step_by(2).map(|i| i as f64).product()
}

/// Exact moments of the random sum for orders `1..=k_max`.
pub fn random_sum_moments(m: u64, rho: f64, sigma2: f64, k_max: u32) -> Result<Vec<MomentReport>> {
    if !k_max.is_multiple_of(2) || k_max == 0 {
        return Err(Error::Precondition(format!("k_max = {k_max} must be a positive even order")));
    }
    if k_max > 12 {
        return Err(Error::Precondition(format!("k_max = {k_max} exceeds the supported order 12")));
    }
    if m == 0 || !(0.0..=1.0).contains(&rho) || !(sigma2 > 0.0) {
        return Err(Error::Precondition(format!(
            "need M >= 1, rho in [0, 1], sigma2 > 0 (got {m}, {rho}, {sigma2})"
        )));
    }
    let mean_b = m as f64 * rho;
    let even = |k: u32| -> Result<(f64, f64, f64)> {
        let l = k / 2;
        let eb = binomial_raw_moment(m, rho, l);
        let scale = sigma2.powi(l as i32) * odd_double_factorial(k);
        let ey = eb * scale;
        let ez = mean_b.powi(l as i32) * scale;
        if !ey.is_finite() || !ez.is_finite() {
            return Err(Error::Overflow(format!("order-{k} moment is not representable")));
        }
        Ok((eb, ey, ez))
    };
    let (_, ey2, _) = even(2)?;
    let (_, ey4, _) = even(4)?;
    let excess_kurtosis = if ey2 > 0.0 { ey4 / (ey2 * ey2) - 3.0 } else { f64::NAN };
    (1..=k_max)
        .map(|k| {
            if k % 2 == 1 {
                Ok(MomentReport {
                    k,
                    ey: 0.0,
                    ez: 0.0,
                    eb: None,
                    excess_kurtosis,
                })
            } else {
                let (eb, ey, ez) = even(k)?;
                Ok(MomentReport {
                    k,
                    ey,
                    ez,
                    eb: Some(eb),
                    excess_kurtosis,
                })
            }
        })
        .collect()
}

/// Moment generating function of the random sum at `s`.
pub fn random_sum_mgf(m: u64, rho: f64, sigma2: f64, s: f64) -> f64 {
    (1.0 + rho * ((0.5 * sigma2 * s * s).exp() - 1.0)).powf(m as f64)
}

/// Draws `n_samples` realizations of the random sum.
///
/// Given `B = b`, the sum is exactly `N(0, b sigma2)`, so one normal draw per
/// sample suffices.
pub fn random_sum_sample<R: Rng + ?Sized>(
    m: u64,
    rho: f64,
    sigma2: f64,
    n_samples: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if n_samples == 0 {
        return Err(Error::Precondition("n_samples must be at least 1".into()));
    }
    let binom = Binomial::new(m, rho)
        .map_err(|e| Error::Precondition(format!("binomial({m}, {rho}): {e}")))?;
    Ok((0..n_samples)
        .map(|_| {
            let b = binom.sample(rng);
            if b == 0 {
                0.0
            } else {
                let z: f64 = rng.sample(StandardNormal);
                (b as f64 * sigma2).sqrt() * z
            }
        })
        .collect())
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::default();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Sample mean and unbiased variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().copied().collect::<CompensatedSum>().value() / n;
    let ss = xs
        .iter()
        .map(|x| (x - mean) * (x - mean))
        .collect::<CompensatedSum>()
        .value();
    let var = if xs.len() > 1 { ss / (n - 1.0) } else { 0.0 };
    (mean, var)
}

/// Sample excess kurtosis `m4 / m2^2 - 3` with central moments.
pub fn excess_kurtosis(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mean, _) = mean_var(xs);
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    m4 / (m2 * m2) - 3.0
}

/// Density of `N(0, var)`.
pub fn gaussian_pdf(x: f64, var: f64) -> f64 {
    (-0.5 * x * x / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramBin {
    pub center: f64,
    pub count: u64,
}

/// Equal-width histogram on `[lo, hi)`; samples outside are dropped.
pub fn histogram(samples: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<HistogramBin> {
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins];
    for &x in samples {
        if x >= lo && x < hi {
            let idx = (((x - lo) / width) as usize).min(bins - 1);
            counts[idx] += 1;
        }
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistogramBin {
            center: lo + (i as f64 + 0.5) * width,
            count,
        })
        .collect()
}

/// One-sample Kolmogorov-Smirnov statistic `sup |F_n - F|`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i as f64 + 1.0) / n - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic p-value of a KS statistic `d` from `n` samples, with
/// Stephens' small-sample correction.
pub fn ks_pvalue(n: usize, d: f64) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}
