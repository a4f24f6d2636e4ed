use std::fmt;
use std::str::FromStr;

use crate::design::PowerPlan;
use crate::linalg::{cholesky, select_columns};
use crate::model::{SlotRealization, SpreadingEnsemble};
use crate::{CMatrix, Error, Result, C64};

use super::cavi::{cavi_detect, PosteriorState};
use super::likelihood::{map_bruteforce, map_bruteforce_with_size};

/// Indices of the `b` largest beliefs in ascending index order. Equal beliefs
/// favour the smaller index.
pub fn select_top_b(state: &PosteriorState, b: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..state.beliefs.len()).collect();
    idx.sort_by(|&i, &j| state.beliefs[j].total_cmp(&state.beliefs[i]).then(i.cmp(&j)));
    idx.truncate(b);
    idx.sort_unstable();
    idx
}

/// LMMSE estimate of the symbols of the detected devices,
/// `V G_d^H (V G_d G_d^H + sigma2 I)^{-1} Y`, evaluated in the equivalent
/// `B x B` form `(G_d^H G_d + (sigma2 / V) I)^{-1} G_d^H Y`.
pub fn lmmse_reconstruct(y: &CMatrix, g_detected: &CMatrix, v: f64, sigma2: f64) -> CMatrix {
    let b = g_detected.ncols();
    if b == 0 {
        return CMatrix::zeros(0, y.ncols());
    }
    let gh = g_detected.adjoint();
    let mut normal = &gh * g_detected;
    for i in 0..b {
        normal[(i, i)] += C64::from(sigma2 / v);
    }
    cholesky(normal).solve(&(gh * y))
}

/// Activity detector run on each layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Detector {
    Cavi { sweeps: usize },
    Map,
}

impl FromStr for Detector {
    type Err = Error;

    /// Accepts `map`, `cavi` (5 sweeps) or `cavi:<sweeps>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.split_once(':') {
            None if s == "map" => Ok(Detector::Map),
            None if s == "cavi" => Ok(Detector::Cavi { sweeps: 5 }),
            Some(("cavi", n)) => match n.trim().parse::<usize>() {
                Ok(sweeps) if sweeps >= 1 => Ok(Detector::Cavi { sweeps }),
                _ => Err(Error::config("detector", format!("bad sweep count `{n}`"))),
            },
            _ => Err(Error::config(
                "detector",
                format!("expected `map` or `cavi:<sweeps>`, got `{s}`"),
            )),
        }
    }
}

impl fmt::Display for Detector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Detector::Cavi { sweeps } => write!(f, "cavi:{sweeps}"),
            Detector::Map => f.write_str("map"),
        }
    }
}

/// How a detected layer is removed before the next one is processed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Cancellation {
    /// Subtract the LMMSE reconstruction of the detected devices.
    #[default]
    Lmmse,
    /// Subtract the true layer signal (genie-aided).
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SicOptions {
    pub detector: Detector,
    /// Select exactly the true number of active devices per layer.
    pub known_b: bool,
    pub cancellation: Cancellation,
}

impl Default for SicOptions {
    fn default() -> Self {
        SicOptions {
            detector: Detector::Cavi { sweeps: 5 },
            known_b: true,
            cancellation: Cancellation::Lmmse,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerDetection {
    pub detected: Vec<usize>,
    pub truth: Vec<usize>,
    pub md: usize,
    pub fa: usize,
    /// CAVI beliefs, when that detector was used.
    pub beliefs: Option<Vec<f64>>,
    /// Received block after this layer was cancelled.
    pub residual: CMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionReport {
    pub layers: Vec<LayerDetection>,
    pub total_md: usize,
    pub total_fa: usize,
}

fn sorted_difference(a: &[usize], b: &[usize]) -> usize {
    a.iter().filter(|x| b.binary_search(x).is_err()).count()
}

/// Successive detection and cancellation from the strongest layer down.
///
/// Layer `q` is detected with level `V_q`, interference variance
/// `sigma_q^2` and prior `rho_q` from the plan, treating all weaker layers as
/// Gaussian noise.
pub fn sic_pipeline(
    slot: &SlotRealization,
    ens: &SpreadingEnsemble,
    plan: &PowerPlan,
    options: SicOptions,
) -> Result<DetectionReport> {
    let q_count = plan.layers.len();
    if ens.layers.len() != q_count || slot.activity.len() != q_count {
        return Err(Error::Precondition(format!(
            "plan has {q_count} layers, ensemble {}, slot {}",
            ens.layers.len(),
            slot.activity.len()
        )));
    }
    let mut residual = slot.received.clone();
    let mut layers = Vec::with_capacity(q_count);
    for (q, level) in plan.layers.iter().enumerate() {
        let g = ens.layer(q);
        let truth = slot.support(q);
        let (detected, beliefs) = match options.detector {
            Detector::Cavi { sweeps } => {
                let st = cavi_detect(&residual, g, level.v, level.sigma2, level.rho, sweeps);
                let detected = if options.known_b {
                    select_top_b(&st, truth.len())
                } else {
                    (0..st.beliefs.len()).filter(|&m| st.beliefs[m] > 0.5).collect()
                };
                (detected, Some(st.beliefs))
            }
            Detector::Map => {
                let b = if options.known_b {
                    map_bruteforce_with_size(&residual, g, level.v, level.sigma2, level.rho, truth.len())?
                } else {
                    map_bruteforce(&residual, g, level.v, level.sigma2, level.rho)?
                };
                ((0..b.len()).filter(|&m| b[m]).collect(), None)
            }
        };
        match options.cancellation {
            Cancellation::Lmmse => {
                let gd = select_columns(g, &detected);
                let s_hat = lmmse_reconstruct(&residual, &gd, level.v, level.sigma2);
                if !detected.is_empty() {
                    residual -= gd * s_hat;
                }
            }
            Cancellation::Oracle => {
                residual -= g * &slot.symbols[q];
            }
        }
        layers.push(LayerDetection {
            md: sorted_difference(&truth, &detected),
            fa: sorted_difference(&detected, &truth),
            detected,
            truth,
            beliefs,
            residual: residual.clone(),
        });
    }
    Ok(DetectionReport {
        total_md: layers.iter().map(|l| l.md).sum(),
        total_fa: layers.iter().map(|l| l.fa).sum(),
        layers,
    })
}
