//! Reproducible Monte Carlo sweeps over the SIC pipeline and their CSV form.
//!
//! Every trial owns a ChaCha stream selected by `(seed, sweep index, trial
//! index)`, and per-trial results are reduced in trial order, so the output
//! does not depend on how many worker threads ran the trials.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::design::{from_db, plan_power_levels};
use crate::detect::{sic_pipeline, Detector, SicOptions};
use crate::model::{gen_spreading, parse_kv, synth_slot, SystemConfig};
use crate::stats::{mean_var, CompensatedSum};
use crate::{Error, Result};

/// Parameter varied across the points of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    /// Access probability, applied to every layer.
    Rho,
    /// Spreading gain.
    N,
    /// Target SNR in dB.
    GammaDb,
    /// CAVI sweeps per layer.
    NSweeps,
    /// Layer count at fixed `K`.
    Q,
}

impl FromStr for SweepVariable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "rho" => Ok(SweepVariable::Rho),
            "N" => Ok(SweepVariable::N),
            "gamma_db" => Ok(SweepVariable::GammaDb),
            "n_sweeps" => Ok(SweepVariable::NSweeps),
            "Q" => Ok(SweepVariable::Q),
            other => Err(Error::config(
                "sweep",
                format!("unknown sweep variable `{other}` (rho, N, gamma_db, n_sweeps, Q)"),
            )),
        }
    }
}

impl fmt::Display for SweepVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepVariable::Rho => "rho",
            SweepVariable::N => "N",
            SweepVariable::GammaDb => "gamma_db",
            SweepVariable::NSweeps => "n_sweeps",
            SweepVariable::Q => "Q",
        })
    }
}

/// Experiment keys accepted next to the system configuration keys.
pub const EXPERIMENT_KEYS: [&str; 7] = [
    "sweep",
    "values",
    "trials",
    "detector",
    "known_b",
    "out",
    "common_random_numbers",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub base: SystemConfig,
    pub sweep: SweepVariable,
    pub values: Vec<f64>,
    pub n_trials: usize,
    pub options: SicOptions,
    pub output: Option<PathBuf>,
    /// Reuse the same trial streams at every sweep point, pairing the
    /// comparisons between points.
    pub common_random_numbers: bool,
}

/// Default trial count per sweep point.
pub const DEFAULT_TRIALS: usize = 1000;

impl ExperimentSpec {
    pub fn new(base: SystemConfig, sweep: SweepVariable, values: Vec<f64>) -> Self {
        ExperimentSpec {
            base,
            sweep,
            values,
            n_trials: DEFAULT_TRIALS,
            options: SicOptions::default(),
            output: None,
            common_random_numbers: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.values.is_empty() {
            return Err(Error::config("values", "sweep needs at least one value"));
        }
        if self.n_trials == 0 {
            return Err(Error::config("trials", "must be at least 1"));
        }
        for &v in &self.values {
            self.point(v)?;
        }
        Ok(())
    }

    /// Parses an experiment from the flat key/value format: the system keys
    /// plus [`EXPERIMENT_KEYS`]. `values` is a comma-separated list.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut map = parse_kv(text)?;
        let mut take = |k: &str| map.remove(k);
        let sweep: SweepVariable = take("sweep")
            .ok_or_else(|| Error::config("sweep", "missing"))?
            .parse()?;
        let values = take("values")
            .ok_or_else(|| Error::config("values", "missing"))?
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::config("values", format!("`{}`: {e}", v.trim())))
            })
            .collect::<Result<Vec<_>>>()?;
        let n_trials = take("trials")
            .map(|v| v.parse::<usize>().map_err(|e| Error::config("trials", format!("`{v}`: {e}"))))
            .transpose()?
            .unwrap_or(DEFAULT_TRIALS);
        let detector = take("detector")
            .map(|v| v.parse::<Detector>())
            .transpose()?
            .unwrap_or(SicOptions::default().detector);
        let known_b = take("known_b").map(|v| parse_bool("known_b", &v)).transpose()?.unwrap_or(true);
        let crn = take("common_random_numbers")
            .map(|v| parse_bool("common_random_numbers", &v))
            .transpose()?
            .unwrap_or(false);
        let output = take("out").map(PathBuf::from);
        let base = SystemConfig::from_kv_map(&map)?;
        let spec = ExperimentSpec {
            base,
            sweep,
            values,
            n_trials,
            options: SicOptions {
                detector,
                known_b,
                ..SicOptions::default()
            },
            output,
            common_random_numbers: crn,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// System configuration and detector options at one sweep value.
    pub fn point(&self, value: f64) -> Result<(SystemConfig, SicOptions)> {
        let mut cfg = self.base.clone();
        let mut opts = self.options;
        let as_count = |key: &str| -> Result<usize> {
            if value >= 1.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(Error::config(key, format!("sweep value {value} is not a positive integer")))
            }
        };
        match self.sweep {
            SweepVariable::Rho => cfg.rho = vec![value; cfg.q],
            SweepVariable::N => cfg.n = as_count("N")?,
            SweepVariable::GammaDb => cfg.gamma = from_db(value),
            SweepVariable::NSweeps => {
                opts.detector = Detector::Cavi {
                    sweeps: as_count("n_sweeps")?,
                }
            }
            SweepVariable::Q => {
                let q = as_count("Q")?;
                let first = cfg.rho[0];
                if cfg.rho.iter().any(|&r| r != first) {
                    return Err(Error::config("rho", "a Q sweep needs the same rho in every layer"));
                }
                cfg.q = q;
                cfg.rho = vec![first; q];
            }
        }
        cfg.validate()?;
        Ok((cfg, opts))
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(Error::config(key, format!("expected true/false, got `{other}`"))),
    }
}

/// Means over trials of the MD and FA counts, plus the standard error of the
/// mean of `md + fa`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerMetrics {
    pub mean_md: f64,
    pub mean_fa: f64,
    pub stderr: f64,
}

impl LayerMetrics {
    pub fn total(&self) -> f64 {
        self.mean_md + self.mean_fa
    }

    fn from_counts(md: &[f64], fa: &[f64]) -> Self {
        let n = md.len() as f64;
        let sum: Vec<f64> = md.iter().zip(fa).map(|(a, b)| a + b).collect();
        let (_, var) = mean_var(&sum);
        LayerMetrics {
            mean_md: md.iter().copied().collect::<CompensatedSum>().value() / n,
            mean_fa: fa.iter().copied().collect::<CompensatedSum>().value() / n,
            stderr: (var / n).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub sweep: SweepVariable,
    pub value: f64,
    pub feasible: bool,
    /// Per layer, strongest first. Empty for infeasible points.
    pub layers: Vec<LayerMetrics>,
    pub total: LayerMetrics,
    pub n_trials: usize,
    pub seconds: f64,
}

/// Stream for one trial.
pub fn trial_rng(seed: u64, sweep_index: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((sweep_index << 32) | (trial & 0xffff_ffff));
    rng
}

/// Per-layer `(md, fa)` counts of one trial.
pub fn run_trial(
    cfg: &SystemConfig,
    plan: &crate::design::PowerPlan,
    options: SicOptions,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(usize, usize)>> {
    let ens = gen_spreading(cfg, rng);
    let slot = synth_slot(cfg, plan, &ens, rng, cfg.symbol_model)?;
    let rep = sic_pipeline(&slot, &ens, plan, options)?;
    Ok(rep.layers.iter().map(|l| (l.md, l.fa)).collect())
}

/// Runs `n_trials` trials of one configuration on the current rayon pool.
pub fn run_point(
    cfg: &SystemConfig,
    options: SicOptions,
    n_trials: usize,
    sweep: SweepVariable,
    value: f64,
    stream: u64,
) -> Result<MetricsRow> {
    let start = Instant::now();
    let plan = plan_power_levels(cfg);
    if !plan.feasible {
        let nan = LayerMetrics {
            mean_md: f64::NAN,
            mean_fa: f64::NAN,
            stderr: f64::NAN,
        };
        return Ok(MetricsRow {
            sweep,
            value,
            feasible: false,
            layers: Vec::new(),
            total: nan,
            n_trials: 0,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    let results = (0..n_trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(cfg.seed, stream, trial);
            run_trial(cfg, &plan, options, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let q = cfg.q;
    let layers = (0..q)
        .map(|l| {
            let md: Vec<f64> = results.iter().map(|r| r[l].0 as f64).collect();
            let fa: Vec<f64> = results.iter().map(|r| r[l].1 as f64).collect();
            LayerMetrics::from_counts(&md, &fa)
        })
        .collect();
    let md: Vec<f64> = results.iter().map(|r| r.iter().map(|x| x.0).sum::<usize>() as f64).collect();
    let fa: Vec<f64> = results.iter().map(|r| r.iter().map(|x| x.1).sum::<usize>() as f64).collect();
    Ok(MetricsRow {
        sweep,
        value,
        feasible: true,
        layers,
        total: LayerMetrics::from_counts(&md, &fa),
        n_trials,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Runs every sweep point of `spec` on the current rayon pool.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<MetricsRow>> {
    spec.validate()?;
    spec.values
        .iter()
        .enumerate()
        .map(|(idx, &value)| {
            let (cfg, opts) = spec.point(value)?;
            let stream = if spec.common_random_numbers { 0 } else { idx as u64 };
            run_point(&cfg, opts, spec.n_trials, spec.sweep, value, stream)
        })
        .collect()
}

/// Same as [`run_experiment`] on a dedicated pool of `threads` workers.
pub fn run_experiment_with_threads(spec: &ExperimentSpec, threads: usize) -> Result<Vec<MetricsRow>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Usage(format!("cannot start {threads} worker threads: {e}")))?;
    pool.install(|| run_experiment(spec))
}

pub const CSV_HEADER: &str = "sweep_name,sweep_value,layer,mean_md,mean_fa,total,stderr,n_trials,seconds";

/// Writes the rows as CSV: per sweep point one line per layer and a `total`
/// line (or a single `infeasible` line).
pub fn write_csv<W: Write>(rows: &[MetricsRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for row in rows {
        let mut line = |layer: &str, m: &LayerMetrics| {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                row.sweep,
                row.value,
                layer,
                m.mean_md,
                m.mean_fa,
                m.total(),
                m.stderr,
                row.n_trials,
                row.seconds
            )
        };
        if !row.feasible {
            line("infeasible", &row.total)?;
            continue;
        }
        for (q, m) in row.layers.iter().enumerate() {
            line(&(q + 1).to_string(), m)?;
        }
        line("total", &row.total)?;
    }
    Ok(())
}

/// Writes [`write_csv`] output to `path`. Refuses an empty row set.
pub fn emit_csv(rows: &[MetricsRow], path: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::Usage("no rows to write".into()));
    }
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).map_err(|e| Error::io(path, e))?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Inverse of [`write_csv`].
pub fn parse_csv(text: &str, path: &Path) -> Result<Vec<MetricsRow>> {
    let parse_err = |line: usize, reason: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == CSV_HEADER => {}
        _ => return Err(parse_err(1, "missing header".into())),
    }
    // Keyed by first appearance so the original order survives.
    let mut rows: Vec<MetricsRow> = Vec::new();
    let mut open: BTreeMap<usize, ()> = BTreeMap::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(parse_err(lineno, format!("expected 9 fields, got {}", f.len())));
        }
        let num = |i: usize| {
            f[i].parse::<f64>()
                .map_err(|e| parse_err(lineno, format!("field {}: {e}", i + 1)))
        };
        let sweep: SweepVariable = f[0].parse().map_err(|e: Error| parse_err(lineno, e.to_string()))?;
        let value = num(1)?;
        let metrics = LayerMetrics {
            mean_md: num(3)?,
            mean_fa: num(4)?,
            stderr: num(6)?,
        };
        let n_trials = f[7]
            .parse::<usize>()
            .map_err(|e| parse_err(lineno, format!("n_trials: {e}")))?;
        let seconds = num(8)?;
        let current = rows.len();
        if open.is_empty() {
            rows.push(MetricsRow {
                sweep,
                value,
                feasible: true,
                layers: Vec::new(),
                total: metrics,
                n_trials,
                seconds,
            });
            open.insert(current, ());
        }
        let row = rows.last_mut().expect("row opened above");
        match f[2] {
            "infeasible" => {
                row.feasible = false;
                row.total = metrics;
                open.clear();
            }
            "total" => {
                row.total = metrics;
                open.clear();
            }
            layer => {
                let q: usize = layer
                    .parse()
                    .map_err(|_| parse_err(lineno, format!("bad layer `{layer}`")))?;
                if q != row.layers.len() + 1 {
                    return Err(parse_err(lineno, format!("layer {q} out of order")));
                }
                row.layers.push(metrics);
            }
        }
    }
    if !open.is_empty() {
        return Err(parse_err(text.lines().count(), "last sweep point has no total line".into()));
    }
    Ok(rows)
}
