use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use lcra::design::{asymptotic_analysis, from_db, pep_probabilities, plan_power_levels, to_db, XiConvention};
use lcra::detect::{empirical_pep, Detector, SicOptions};
use lcra::harness::{
    run_point, trial_rng, write_csv, ExperimentSpec, MetricsRow, SweepVariable, DEFAULT_TRIALS,
    EXPERIMENT_KEYS,
};
use lcra::linalg::complex_normal_matrix;
use lcra::model::{gen_spreading, parse_kv, synth_slot, SystemConfig};
use lcra::stats::{gaussian_pdf, histogram, random_sum_moments, random_sum_sample};
use lcra::{Error, Result};

#[derive(Parser)]
#[command(name = "lcra", version, about = "Layered compressive random access: design, simulation and sweeps")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Flat key/value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the seed from the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// CSV output path; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// `cavi:<sweeps>` or `map`.
    #[arg(long, global = true)]
    detector: Option<Detector>,
    #[arg(long, global = true, action = ArgAction::Set)]
    known_b: Option<bool>,
    #[arg(long, global = true, default_value_t = XiConvention::Unscaled)]
    xi_convention: XiConvention,
    /// Worker threads for Monte Carlo trials; all cores when absent.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Record wall-clock seconds in CSV output instead of 0.
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Power plan and asymptotic error analysis.
    Design {
        /// Target SNR in dB.
        #[arg(long, allow_negative_numbers = true)]
        gamma_db: Option<f64>,
    },
    /// Monte Carlo run of one configuration.
    Simulate {
        /// Also write one synthesized slot in text form.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Monte Carlo sweep described by the configuration file.
    Sweep,
    /// Empirical single-flip error probability against the closed forms.
    Pep {
        /// Layer whose level, noise and prior are used (1-based).
        #[arg(long, default_value_t = 1)]
        layer: usize,
        /// Active devices in the true vector; `round(M rho)` when absent.
        #[arg(long)]
        b0: Option<usize>,
        /// Comma-separated slot lengths.
        #[arg(long, value_delimiter = ',', default_value = "1,10,50,100")]
        t_values: Vec<usize>,
    },
    /// Moments and histogram of the binomial random sum.
    Moments {
        /// Number of summands; the per-layer M of the configuration when absent.
        #[arg(long)]
        m: Option<u64>,
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        sigma2: f64,
        #[arg(long, default_value_t = 8)]
        k_max: u32,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 60)]
        bins: usize,
        /// Histogram CSV path; appended to the main output when absent.
        #[arg(long)]
        hist_out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lcra: {e}");
            match e {
                Error::Config { .. } | Error::Usage(_) | Error::Parse { .. } => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    if let Some(threads) = g.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::Usage(format!("--threads {threads}: {e}")))?;
    }
    match &cli.command {
        Command::Design { gamma_db } => design(g, *gamma_db),
        Command::Simulate { dump } => simulate(g, dump.as_deref()),
        Command::Sweep => sweep(g),
        Command::Pep { layer, b0, t_values } => pep(g, *layer, *b0, t_values),
        Command::Moments {
            m,
            rho,
            sigma2,
            k_max,
            samples,
            bins,
            hist_out,
        } => moments(g, *m, *rho, *sigma2, *k_max, *samples, *bins, hist_out.as_deref()),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// System configuration from `--config` (experiment keys ignored) or the
/// defaults, with `--seed` applied.
fn load_config(g: &Global) -> Result<SystemConfig> {
    let mut cfg = match &g.config {
        Some(path) => {
            let mut map = parse_kv(&read_text(path)?)?;
            for key in EXPERIMENT_KEYS {
                map.remove(key);
            }
            SystemConfig::from_kv_map(&map)?
        }
        None => SystemConfig::default(),
    };
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn sic_options(g: &Global, mut base: SicOptions) -> SicOptions {
    if let Some(d) = g.detector {
        base.detector = d;
    }
    if let Some(k) = g.known_b {
        base.known_b = k;
    }
    base
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        }),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::Usage(format!("stdout: {e}"))),
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

fn design(g: &Global, gamma_db: Option<f64>) -> Result<()> {
    let mut cfg = load_config(g)?;
    if let Some(db) = gamma_db {
        cfg.gamma = from_db(db);
        cfg.validate()?;
    }
    let plan = plan_power_levels(&cfg);
    if !plan.feasible {
        return Err(Error::Infeasible(format!(
            "target SNR {:.3} dB is unreachable with Q = {} layers of kappa = {:.4}",
            to_db(cfg.gamma),
            cfg.q,
            plan.kappa
        )));
    }
    let rep = asymptotic_analysis(&plan, cfg.t)?;
    println!(
        "K={} Q={} N={} T={} gamma={:.3} dB eta={} N0={}",
        cfg.k,
        cfg.q,
        cfg.n,
        cfg.t,
        to_db(cfg.gamma),
        cfg.eta,
        cfg.n0
    );
    println!(
        "{:>5} {:>7} {:>9} {:>10} {:>9} {:>9} {:>11} {:>11} {:>11} {:>5}",
        "layer", "R", "V_dB", "sigma2", "tx_dB", "beta", "p_fa", "p_md", "md_bound", "cond"
    );
    let mut csv = String::from("layer,R,V_dB,sigma2,tx_dB,beta,p_fa,p_md,md_bound\n");
    for (q, (lv, a)) in plan.layers.iter().zip(&rep.layers).enumerate() {
        println!(
            "{:>5} {:>7.4} {:>9.4} {:>10.4} {:>9.4} {:>9.5} {:>11.4e} {:>11.4e} {:>11} {:>5}",
            q + 1,
            lv.radius,
            to_db(lv.v),
            lv.sigma2,
            to_db(lv.tx),
            a.beta,
            a.p_fa,
            a.p_md,
            a.md_bound.map_or_else(|| "NA".into(), |b| format!("{b:.4e}")),
            if a.cond_ok() { "ok" } else { "fail" }
        );
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            q + 1,
            lv.radius,
            to_db(lv.v),
            lv.sigma2,
            to_db(lv.tx),
            a.beta,
            a.p_fa,
            a.p_md,
            fmt_opt(a.md_bound)
        ));
    }
    match &g.out {
        Some(p) => write_out(Some(p), &csv),
        None => {
            println!();
            write_out(None, &csv)
        }
    }
}

fn finish_rows(g: &Global, mut rows: Vec<MetricsRow>) -> Vec<MetricsRow> {
    if !g.timing {
        for r in &mut rows {
            r.seconds = 0.0;
        }
    }
    rows
}

fn rows_csv(rows: &[MetricsRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).map_err(|e| Error::Usage(format!("csv: {e}")))?;
    Ok(String::from_utf8(buf).expect("csv is ascii"))
}

fn simulate(g: &Global, dump: Option<&Path>) -> Result<()> {
    let cfg = load_config(g)?;
    let opts = sic_options(g, SicOptions::default());
    let trials = g.trials.unwrap_or(DEFAULT_TRIALS);
    let plan = plan_power_levels(&cfg);
    if let Some(path) = dump {
        if !plan.feasible {
            return Err(Error::Infeasible("no slot to dump for an infeasible plan".into()));
        }
        let mut rng = trial_rng(cfg.seed, 0, 0);
        let ens = gen_spreading(&cfg, &mut rng);
        let slot = synth_slot(&cfg, &plan, &ens, &mut rng, cfg.symbol_model)?;
        let mut buf = Vec::new();
        slot.write_dump(&mut buf).map_err(|e| Error::io(path, e))?;
        fs::write(path, buf).map_err(|e| Error::io(path, e))?;
    }
    let row = run_point(&cfg, opts, trials, SweepVariable::Rho, cfg.rho[0], 0)?;
    let rows = finish_rows(g, vec![row]);
    let row = &rows[0];
    eprintln!("detector={} known_b={} trials={}", opts.detector, opts.known_b, trials);
    if !row.feasible {
        eprintln!("infeasible power plan");
    }
    for (q, m) in row.layers.iter().enumerate() {
        eprintln!(
            "layer {}: md={:.4} fa={:.4} total={:.4} +/- {:.4}",
            q + 1,
            m.mean_md,
            m.mean_fa,
            m.total(),
            m.stderr
        );
    }
    eprintln!(
        "total:   md={:.4} fa={:.4} total={:.4} +/- {:.4}",
        row.total.mean_md,
        row.total.mean_fa,
        row.total.total(),
        row.total.stderr
    );
    write_out(g.out.as_deref(), &rows_csv(&rows)?)
}

fn sweep(g: &Global) -> Result<()> {
    let path = g
        .config
        .as_ref()
        .ok_or_else(|| Error::Usage("sweep needs --config <experiment file>".into()))?;
    let mut spec = ExperimentSpec::from_kv_str(&read_text(path)?)?;
    if let Some(seed) = g.seed {
        spec.base.seed = seed;
    }
    if let Some(t) = g.trials {
        spec.n_trials = t;
    }
    spec.options = sic_options(g, spec.options);
    spec.validate()?;
    let rows = finish_rows(g, lcra::harness::run_experiment(&spec)?);
    let out = g.out.clone().or(spec.output.clone());
    write_out(out.as_deref(), &rows_csv(&rows)?)
}

fn pep(g: &Global, layer: usize, b0: Option<usize>, t_values: &[usize]) -> Result<()> {
    let cfg = load_config(g)?;
    let plan = plan_power_levels(&cfg);
    if !plan.feasible {
        return Err(Error::Infeasible("power plan is infeasible".into()));
    }
    if layer == 0 || layer > cfg.q {
        return Err(Error::Usage(format!("--layer must be in 1..={}", cfg.q)));
    }
    let lv = &plan.layers[layer - 1];
    let (n, m) = (cfg.n, cfg.m());
    let b0 = b0.unwrap_or((m as f64 * lv.rho).round() as usize);
    if b0 == 0 || b0 >= m {
        return Err(Error::Usage(format!("--b0 must be in 1..{m} so both flips exist")));
    }
    let trials = g.trials.unwrap_or(DEFAULT_TRIALS);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let gm = complex_normal_matrix(&mut rng, n, m, 1.0 / n as f64);
    let active = sample(&mut rng, m, b0).into_vec();
    let b_true: Vec<bool> = (0..m).map(|i| active.contains(&i)).collect();
    let fa_idx = (0..m).find(|&i| !b_true[i]).expect("b0 < m");
    let md_idx = active[0];

    let mut csv = String::from("direction,T,V,alpha,p_formula,p_empirical,stderr\n");
    for &t in t_values {
        let fa = empirical_pep(&gm, &b_true, fa_idx, lv.v, lv.sigma2, lv.rho, t, trials, &mut rng)?;
        let md = empirical_pep(&gm, &b_true, md_idx, lv.v, lv.sigma2, lv.rho, t, trials, &mut rng)?;
        let f = pep_probabilities(b0, m, lv.rho, t, lv.v, fa.alpha, md.alpha, g.xi_convention)?;
        for (e, p) in [(&fa, f.p_fa), (&md, f.p_md)] {
            csv.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                e.direction.label(),
                t,
                lv.v,
                e.alpha,
                fmt_opt(p),
                e.estimate,
                e.stderr
            ));
        }
    }
    write_out(g.out.as_deref(), &csv)
}

#[allow(clippy::too_many_arguments)]
fn moments(
    g: &Global,
    m: Option<u64>,
    rho: Option<f64>,
    sigma2: f64,
    k_max: u32,
    samples: usize,
    bins: usize,
    hist_out: Option<&Path>,
) -> Result<()> {
    let cfg = load_config(g)?;
    let m = m.unwrap_or(cfg.m() as u64);
    let rho = rho.unwrap_or(cfg.rho[0]);
    let reports = random_sum_moments(m, rho, sigma2, k_max)?;
    let mut csv = String::from("k,EY_k,EZ_k\n");
    for r in &reports {
        csv.push_str(&format!("{},{},{}\n", r.k, r.ey, r.ez));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let xs = random_sum_sample(m, rho, sigma2, samples, &mut rng)?;
    let var = m as f64 * rho * sigma2;
    let half = 4.0 * var.sqrt();
    let mut hist = String::from("bin_center,count,gaussian_pdf\n");
    for b in histogram(&xs, -half, half, bins) {
        hist.push_str(&format!("{},{},{}\n", b.center, b.count, gaussian_pdf(b.center, var)));
    }
    match hist_out {
        Some(p) => {
            write_out(g.out.as_deref(), &csv)?;
            write_out(Some(p), &hist)
        }
        None => write_out(g.out.as_deref(), &format!("{csv}\n{hist}")),
    }
}
