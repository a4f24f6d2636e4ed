//! Large-system design criteria: the MMSE SIR limit, the power-level
//! recursion, cell regions and the FA/MD error probabilities.

use std::fmt;
use std::str::FromStr;

use crate::linalg::cholesky;
use crate::model::SystemConfig;
use crate::stats::{chi2_cdf, chi2_sf, md_tail_bound};
use crate::{CMatrix, CVector, Error, Result, C64};

/// Large-system output SIR of the linear MMSE receiver with random
/// spreading, SNR `gamma` and load `kappa`.
///
/// This is the positive root of `b^2 + b (1 - gamma + gamma kappa) - gamma = 0`.
pub fn beta(gamma: f64, kappa: f64) -> f64 {
    if kappa == 0.0 {
        return gamma;
    }
    let a = (1.0 - kappa) * gamma;
    let disc = 0.25 * a * a + 0.5 * (1.0 + kappa) * gamma + 0.25;
    let root = 0.5 * a - 0.5 + disc.sqrt();
    if root > 1e-3 * gamma {
        root
    } else {
        // Same root in cancellation-free form for heavily loaded systems.
        gamma / (disc.sqrt() - 0.5 * a + 0.5)
    }
}

/// Converts a linear power ratio to dB.
pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Converts dB to a linear power ratio.
pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Power plan entry for one layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerLevel {
    /// Receive power level `V_q`.
    pub v: f64,
    /// Interference-plus-noise variance seen by layer `q`.
    pub sigma2: f64,
    /// `1 / sigma2`
    pub gamma: f64,
    /// Outer radius of region `q`, normalized so the outermost ring ends at 1.
    pub radius: f64,
    /// Worst-case transmit power `R_q^eta V_q`.
    pub tx: f64,
    /// In-layer load `rho_q M / N`.
    pub kappa: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerPlan {
    pub gamma_target: f64,
    pub n0: f64,
    /// Load of the weakest layer, used for the feasibility check.
    pub kappa: f64,
    pub feasible: bool,
    /// One entry per layer, strongest first. Empty when infeasible.
    pub layers: Vec<LayerLevel>,
}

impl PowerPlan {
    pub fn q(&self) -> usize {
        self.layers.len()
    }

    /// Levels `V_1, ..., V_Q`.
    pub fn levels(&self) -> Vec<f64> {
        self.layers.iter().map(|l| l.v).collect()
    }
}

/// Decides the receive levels from the weakest layer up.
///
/// Layer `q` treats the (Gaussian-approximated) signals of all weaker layers
/// plus noise as interference of variance `sum_{l>q} V_l M rho_l + N0` and
/// gets the level that brings its large-system SIR to the target.
pub fn plan_power_levels(config: &SystemConfig) -> PowerPlan {
    let q = config.q;
    let m = config.m() as f64;
    let n = config.n as f64;
    let kappas: Vec<f64> = config.rho.iter().map(|r| r * m / n).collect();
    let weakest_kappa = kappas[q - 1];
    let feasible = config.gamma >= beta(1.0 / config.n0, weakest_kappa);
    let mut plan = PowerPlan {
        gamma_target: config.gamma,
        n0: config.n0,
        kappa: weakest_kappa,
        feasible,
        layers: Vec::new(),
    };
    if !feasible {
        return plan;
    }
    let mut layers = vec![
        LayerLevel {
            v: 0.0,
            sigma2: 0.0,
            gamma: 0.0,
            radius: 0.0,
            tx: 0.0,
            kappa: 0.0,
            rho: 0.0,
        };
        q
    ];
    let mut interference = 0.0;
    for idx in (0..q).rev() {
        let sigma2 = interference + config.n0;
        let gamma = 1.0 / sigma2;
        let v = config.gamma / beta(gamma, kappas[idx]);
        let radius = ((idx + 1) as f64 / q as f64).sqrt();
        layers[idx] = LayerLevel {
            v,
            sigma2,
            gamma,
            radius,
            tx: radius.powf(config.eta) * v,
            kappa: kappas[idx],
            rho: config.rho[idx],
        };
        interference += v * m * config.rho[idx];
    }
    plan.layers = layers;
    plan
}

/// Asymptotic per-layer quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerAsymptotics {
    pub beta: f64,
    /// `V beta`, equal to the target SNR by construction of the plan.
    pub product: f64,
    pub fa_threshold: f64,
    pub md_threshold: f64,
    pub p_fa: f64,
    pub p_md: f64,
    /// `None` when `md_threshold >= 1` and the bound is vacuous.
    pub md_bound: Option<f64>,
    /// `V beta > 1`
    pub cond_product: bool,
    /// `V >= 1`
    pub cond_level: bool,
}

impl LayerAsymptotics {
    pub fn cond_ok(&self) -> bool {
        self.cond_product && self.cond_level
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticReport {
    pub t: usize,
    pub layers: Vec<LayerAsymptotics>,
}

/// Large-system single-FA and single-MD probabilities for each layer.
pub fn asymptotic_analysis(plan: &PowerPlan, t: usize) -> Result<AsymptoticReport> {
    if !plan.feasible {
        return Err(Error::Infeasible("asymptotic analysis needs a feasible plan".into()));
    }
    if t == 0 {
        return Err(Error::Precondition("slot length T must be positive".into()));
    }
    let dof = 2 * t as u32;
    let scale = 2.0 * t as f64;
    let layers = plan
        .layers
        .iter()
        .map(|l| {
            let b = beta(l.gamma, l.kappa);
            let product = l.v * b;
            let log_term = product.ln_1p();
            let fa_threshold = (1.0 + b) * log_term / b;
            let md_threshold = log_term / product;
            let md_bound = if md_threshold < 1.0 {
                Some(md_tail_bound(t, md_threshold)?)
            } else {
                None
            };
            Ok(LayerAsymptotics {
                beta: b,
                product,
                fa_threshold,
                md_threshold,
                p_fa: chi2_sf(dof, scale * fa_threshold)?,
                p_md: chi2_cdf(dof, scale * md_threshold)?,
                md_bound,
                cond_product: product > 1.0,
                cond_level: l.v >= 1.0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AsymptoticReport { t, layers })
}

/// Output SIR `gamma g^H (I + gamma G G^H)^{-1} g` of the MMSE receiver for
/// signature `g` against the interferers in the columns of `g_active`.
pub fn mmse_sir(g: &CVector, g_active: &CMatrix, sigma2: f64) -> f64 {
    let n = g.len();
    let gamma = 1.0 / sigma2;
    let mut r = CMatrix::identity(n, n);
    if g_active.ncols() > 0 {
        r.gemm(
            C64::from(gamma),
            g_active,
            &g_active.adjoint(),
            C64::from(1.0),
        );
    }
    let x = cholesky(r).solve(g);
    gamma * g.dotc(&x).re
}

/// Which quadratic-form coefficient scales the FA chi-squared threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum XiConvention {
    /// `alpha / (1 + alpha)`
    #[default]
    Unscaled,
    /// `V alpha / (1 + V alpha)`, the coefficient of the FA quadratic form
    /// when the covariance carries the signal power `V`.
    PowerScaled,
}

impl FromStr for XiConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "printed" => Ok(XiConvention::Unscaled),
            "lemma2" => Ok(XiConvention::PowerScaled),
            other => Err(Error::config(
                "xi-convention",
                format!("expected `printed` or `lemma2`, got `{other}`"),
            )),
        }
    }
}

impl fmt::Display for XiConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            XiConvention::Unscaled => "printed",
            XiConvention::PowerScaled => "lemma2",
        })
    }
}

/// Finite-size single-flip error probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PepReport {
    pub b0: usize,
    pub alpha: f64,
    pub alpha_prime: f64,
    pub xi: f64,
    /// `None` when every device is active and no FA is possible.
    pub d_fa: Option<f64>,
    /// `None` when no device is active and no MD is possible.
    pub d_md: Option<f64>,
    pub p_fa: Option<f64>,
    pub p_md: Option<f64>,
}

/// Pairwise error probabilities of one FA and one MD for a true activity
/// vector with `b0` active devices out of `m`.
///
/// `alpha` is `g_l^H R(b)^{-1} g_l` for an inactive device `l`; `alpha_prime`
/// is `g_l^H R(b')^{-1} g_l` with `b'` the true vector minus an active
/// device `l`. A negative FA margin puts the threshold below the support of
/// the chi-squared variable (probability 1); a negative MD margin makes the
/// error event empty (probability 0).
#[allow(clippy::too_many_arguments)]
pub fn pep_probabilities(
    b0: usize,
    m: usize,
    rho: f64,
    t: usize,
    v: f64,
    alpha: f64,
    alpha_prime: f64,
    xi_convention: XiConvention,
) -> Result<PepReport> {
    if b0 > m {
        return Err(Error::Precondition(format!("B0 = {b0} exceeds M = {m}")));
    }
    if !(alpha > 0.0 && alpha_prime > 0.0) {
        return Err(Error::Precondition("alpha and alpha' must be positive".into()));
    }
    if t == 0 {
        return Err(Error::Precondition("slot length T must be positive".into()));
    }
    let tf = t as f64;
    let dof = 2 * t as u32;
    let xi = match xi_convention {
        XiConvention::Unscaled => alpha / (1.0 + alpha),
        XiConvention::PowerScaled => v * alpha / (1.0 + v * alpha),
    };
    let prior_odds = ((1.0 - rho) / rho).ln();
    let d_fa = (b0 < m).then(|| {
        tf * (v * alpha).ln_1p() + ((b0 + 1) as f64 / (m - b0) as f64).ln() + prior_odds
    });
    let d_md = (b0 > 0).then(|| {
        tf * (v * alpha_prime).ln_1p() - ((m - b0 + 1) as f64 / b0 as f64).ln() + prior_odds
    });
    let p_fa = d_fa
        .map(|d| if d < 0.0 { Ok(1.0) } else { chi2_sf(dof, 2.0 * d / xi) })
        .transpose()?;
    let p_md = d_md
        .map(|d| {
            if d < 0.0 {
                Ok(0.0)
            } else {
                chi2_cdf(dof, 2.0 * d / (v * alpha_prime))
            }
        })
        .transpose()?;
    Ok(PepReport {
        b0,
        alpha,
        alpha_prime,
        xi,
        d_fa,
        d_md,
        p_fa,
        p_md,
    })
}
