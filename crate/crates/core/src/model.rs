//! System configuration, spreading ensembles and received-slot synthesis.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::Rng;

use crate::design::PowerPlan;
use crate::linalg::{complex_normal, complex_normal_matrix};
use crate::{CMatrix, Error, Result, C64};

/// Distribution of the effective per-device symbols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SymbolModel {
    /// i.i.d. CN(0, V_q) entries for active devices.
    #[default]
    Gaussian,
    /// Unit QPSK symbols scaled by `sqrt(V_q)` and rotated by a per-device
    /// channel phase.
    Qpsk,
}

impl FromStr for SymbolModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" => Ok(SymbolModel::Gaussian),
            "qpsk" => Ok(SymbolModel::Qpsk),
            other => Err(Error::config(
                "symbol_model",
                format!("expected `gaussian` or `qpsk`, got `{other}`"),
            )),
        }
    }
}

impl fmt::Display for SymbolModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SymbolModel::Gaussian => "gaussian",
            SymbolModel::Qpsk => "qpsk",
        })
    }
}

/// Scalar parameters of one L-CRA system.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// Total number of devices.
    pub k: usize,
    /// Number of power layers.
    pub q: usize,
    /// Spreading gain.
    pub n: usize,
    /// Symbols per slot.
    pub t: usize,
    /// Access probability of each layer, length `q`.
    pub rho: Vec<f64>,
    /// Target SNR (linear).
    pub gamma: f64,
    /// Path-loss exponent.
    pub eta: f64,
    /// Background noise power (linear).
    pub n0: f64,
    pub seed: u64,
    pub symbol_model: SymbolModel,
}

/// Keys accepted in the flat key/value configuration format.
pub const CONFIG_KEYS: [&str; 10] = [
    "K",
    "Q",
    "N",
    "T",
    "rho",
    "gamma_target",
    "eta",
    "n0",
    "seed",
    "symbol_model",
];

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            k: 300,
            q: 3,
            n: 30,
            t: 100,
            rho: vec![0.05; 3],
            gamma: 4.0,
            eta: 3.5,
            n0: 1.0,
            seed: 0,
            symbol_model: SymbolModel::Gaussian,
        }
    }
}

impl SystemConfig {
    /// Configuration with the same access probability in every layer.
    pub fn uniform(k: usize, q: usize, n: usize, t: usize, rho: f64, gamma: f64) -> Result<Self> {
        let cfg = SystemConfig {
            k,
            q,
            n,
            t,
            rho: vec![rho; q],
            gamma,
            ..SystemConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Devices per layer, `K / Q`.
    pub fn m(&self) -> usize {
        self.k / self.q
    }

    /// Checks every invariant, naming the offending key on failure.
    ///
    /// Access probabilities are accepted on the closed interval `[0, 1]` so
    /// that empty and fully loaded slots can be exercised.
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::config("K", "must be positive"));
        }
        if self.q == 0 {
            return Err(Error::config("Q", "must be positive"));
        }
        if !self.k.is_multiple_of(self.q) {
            return Err(Error::config(
                "K",
                format!("{} is not divisible by Q = {}", self.k, self.q),
            ));
        }
        if self.n == 0 {
            return Err(Error::config("N", "must be positive"));
        }
        if self.t == 0 {
            return Err(Error::config("T", "must be positive"));
        }
        if self.rho.len() != self.q {
            return Err(Error::config(
                "rho",
                format!("expected {} values, got {}", self.q, self.rho.len()),
            ));
        }
        if let Some(bad) = self.rho.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(Error::config("rho", format!("{bad} is not a probability")));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::config("gamma_target", "must be positive"));
        }
        if !(self.eta >= 2.0 && self.eta.is_finite()) {
            return Err(Error::config("eta", "must be at least 2"));
        }
        if !(self.n0 > 0.0 && self.n0.is_finite()) {
            return Err(Error::config("n0", "must be positive"));
        }
        Ok(())
    }

    /// Parses the flat `key = value` text format. Blank lines and `#`
    /// comments are ignored; unknown keys are rejected.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let map = parse_kv(text)?;
        Self::from_kv_map(&map)
    }

    /// Builds a configuration from already-split key/value pairs. Keys other
    /// than [`CONFIG_KEYS`] are rejected.
    pub fn from_kv_map(map: &BTreeMap<String, String>) -> Result<Self> {
        if let Some(key) = map.keys().find(|k| !CONFIG_KEYS.contains(&k.as_str())) {
            return Err(Error::config(key.clone(), "unknown key"));
        }
        let defaults = SystemConfig::default();
        let k: usize = required(map, "K")?;
        let q: usize = required(map, "Q")?;
        let n: usize = required(map, "N")?;
        let t: usize = required(map, "T")?;
        let rho_text = map
            .get("rho")
            .ok_or_else(|| Error::config("rho", "missing"))?;
        let mut rho = rho_text
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::config("rho", format!("`{}`: {e}", v.trim())))
            })
            .collect::<Result<Vec<_>>>()?;
        if rho.len() == 1 && q > 1 {
            rho = vec![rho[0]; q];
        }
        let cfg = SystemConfig {
            k,
            q,
            n,
            t,
            rho,
            gamma: required(map, "gamma_target")?,
            eta: optional(map, "eta")?.unwrap_or(defaults.eta),
            n0: optional(map, "n0")?.unwrap_or(defaults.n0),
            seed: optional(map, "seed")?.unwrap_or(defaults.seed),
            symbol_model: optional(map, "symbol_model")?.unwrap_or_default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Renders the configuration in the format accepted by [`Self::from_kv_str`].
    pub fn to_kv_string(&self) -> String {
        let rho = self
            .rho
            .iter()
            .map(|r| r.to_string())
            .collect::<Vec<_>>()
            .join(",");
        format!(
            "K = {}\nQ = {}\nN = {}\nT = {}\nrho = {}\ngamma_target = {}\neta = {}\nn0 = {}\nseed = {}\nsymbol_model = {}\n",
            self.k, self.q, self.n, self.t, rho, self.gamma, self.eta, self.n0, self.seed, self.symbol_model
        )
    }
}

/// Splits `key = value` lines into a map. Later duplicates are an error.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .or_else(|| line.split_once(':'))
            .ok_or_else(|| {
                Error::config(
                    line.to_string(),
                    format!("line {}: expected `key = value`", lineno + 1),
                )
            })?;
        let key = key.trim().to_string();
        if map.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(Error::config(key, "given more than once"));
        }
    }
    Ok(map)
}

fn required<T: FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    optional(map, key)?.ok_or_else(|| Error::config(key, "missing"))
}

fn optional<T: FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>>
where
    T::Err: fmt::Display,
{
    map.get(key)
        .map(|v| v.parse::<T>().map_err(|e| Error::config(key, format!("`{v}`: {e}"))))
        .transpose()
}

/// Per-layer signature matrices. Layer `q` holds an `N x M` matrix whose
/// column `m` is the signature of device `m` in that layer.
#[derive(Debug, Clone, PartialEq)]
pub struct SpreadingEnsemble {
    pub layers: Vec<CMatrix>,
}

impl SpreadingEnsemble {
    pub fn layer(&self, q: usize) -> &CMatrix {
        &self.layers[q]
    }
}

/// Draws `Q` independent `N x M` signature matrices with CN(0, 1/N) entries.
pub fn gen_spreading<R: Rng + ?Sized>(config: &SystemConfig, rng: &mut R) -> SpreadingEnsemble {
    let var = 1.0 / config.n as f64;
    let layers = (0..config.q)
        .map(|_| complex_normal_matrix(rng, config.n, config.m(), var))
        .collect();
    SpreadingEnsemble { layers }
}

/// One slot: activity, effective symbols and the received block.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotRealization {
    /// `activity[q][m]` is true when device `m` of layer `q` transmits.
    pub activity: Vec<Vec<bool>>,
    /// Per layer, `M x T` effective symbols (zero rows for idle devices).
    pub symbols: Vec<CMatrix>,
    /// `N x T` received block.
    pub received: CMatrix,
    /// `N x T` noise that was added.
    pub noise: CMatrix,
    pub noise_var: f64,
}

impl SlotRealization {
    /// Indices of active devices in layer `q`.
    pub fn support(&self, q: usize) -> Vec<usize> {
        self.activity[q]
            .iter()
            .enumerate()
            .filter_map(|(m, &a)| a.then_some(m))
            .collect()
    }

    /// Number of active devices per layer.
    pub fn active_counts(&self) -> Vec<usize> {
        self.activity
            .iter()
            .map(|layer| layer.iter().filter(|&&a| a).count())
            .collect()
    }

    /// Writes a plain-text dump: a header line, then one `b` line per layer
    /// with the activity bits, then the received block as `re im` pairs, one
    /// row of `Y` per line. Intended for debugging only.
    pub fn write_dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "# slot layers={} N={} T={} noise_var={}",
            self.activity.len(),
            self.received.nrows(),
            self.received.ncols(),
            self.noise_var
        )?;
        for (q, layer) in self.activity.iter().enumerate() {
            let bits: String = layer.iter().map(|&a| if a { '1' } else { '0' }).collect();
            writeln!(w, "b{} {}", q + 1, bits)?;
        }
        for r in 0..self.received.nrows() {
            let row: Vec<String> = (0..self.received.ncols())
                .map(|c| {
                    let z = self.received[(r, c)];
                    format!("{} {}", z.re, z.im)
                })
                .collect();
            writeln!(w, "{}", row.join(" "))?;
        }
        Ok(())
    }
}

/// Synthesizes one received slot.
///
/// Each device of layer `q` is active with probability `rho_q`. Power control
/// is taken as perfect, so an active device contributes receive power `V_q`;
/// the channel and transmit power are never realized separately.
pub fn synth_slot<R: Rng + ?Sized>(
    config: &SystemConfig,
    plan: &PowerPlan,
    ens: &SpreadingEnsemble,
    rng: &mut R,
    symbol_model: SymbolModel,
) -> Result<SlotRealization> {
    if !plan.feasible || plan.layers.len() != config.q {
        return Err(Error::Precondition(format!(
            "power plan has {} levels, config has Q = {}",
            plan.layers.len(),
            config.q
        )));
    }
    if ens.layers.len() != config.q {
        return Err(Error::Precondition(format!(
            "ensemble has {} layers, config has Q = {}",
            ens.layers.len(),
            config.q
        )));
    }
    let (n, m, t) = (config.n, config.m(), config.t);
    let qpsk = [
        C64::new(1.0, 1.0),
        C64::new(-1.0, 1.0),
        C64::new(-1.0, -1.0),
        C64::new(1.0, -1.0),
    ]
    .map(|x| x * std::f64::consts::FRAC_1_SQRT_2);

    let mut activity = Vec::with_capacity(config.q);
    let mut symbols = Vec::with_capacity(config.q);
    let mut signal = CMatrix::zeros(n, t);
    for q in 0..config.q {
        let v = plan.layers[q].v;
        let rho = config.rho[q];
        let bits: Vec<bool> = (0..m).map(|_| rng.random::<f64>() < rho).collect();
        let mut s = CMatrix::zeros(m, t);
        for (dev, &active) in bits.iter().enumerate() {
            if !active {
                continue;
            }
            match symbol_model {
                SymbolModel::Gaussian => {
                    for col in 0..t {
                        s[(dev, col)] = complex_normal(rng, v);
                    }
                }
                SymbolModel::Qpsk => {
                    let theta = rng.random::<f64>() * std::f64::consts::TAU;
                    let phase = C64::from_polar(v.sqrt(), theta);
                    for col in 0..t {
                        s[(dev, col)] = phase * qpsk[rng.random_range(0..4)];
                    }
                }
            }
        }
        signal += ens.layer(q) * &s;
        activity.push(bits);
        symbols.push(s);
    }
    let noise = complex_normal_matrix(rng, n, t, config.n0);
    let received = &signal + &noise;
    Ok(SlotRealization {
        activity,
        symbols,
        received,
        noise,
        noise_var: config.n0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::plan_power_levels;
    use crate::linalg::frobenius_sq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kv_round_trip() {
        let cfg = SystemConfig {
            rho: vec![0.05, 0.04, 0.03],
            seed: 99,
            symbol_model: SymbolModel::Qpsk,
            ..SystemConfig::default()
        };
        let back = SystemConfig::from_kv_str(&cfg.to_kv_string()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn kv_scalar_rho_is_broadcast() {
        let cfg = SystemConfig::from_kv_str(
            "# reference setup\nK = 300\nQ = 3\nN = 30\nT = 100\nrho = 0.05\ngamma_target = 4\n",
        )
        .unwrap();
        assert_eq!(cfg.rho, vec![0.05; 3]);
        assert_eq!(cfg.m(), 100);
        assert_eq!(cfg.eta, 3.5);
    }

    #[test]
    fn kv_errors_name_the_key() {
        let base = "K = 300\nQ = 3\nN = 30\nT = 100\nrho = 0.05\ngamma_target = 4\n";
        let cases = [
            (format!("{base}bogus = 1\n"), "bogus"),
            (base.replace("K = 300", "K = 301"), "K"),
            (base.replace("rho = 0.05", "rho = 0.1,0.2"), "rho"),
            (base.replace("gamma_target = 4", "gamma_target = -1"), "gamma_target"),
            (format!("{base}eta = 1.5\n"), "eta"),
            (base.replace("N = 30\n", ""), "N"),
        ];
        for (text, key) in cases {
            match SystemConfig::from_kv_str(&text) {
                Err(Error::Config { key: k, .. }) => assert_eq!(k, key, "{text}"),
                other => panic!("expected config error for {key}, got {other:?}"),
            }
        }
    }

    #[test]
    fn spreading_shapes_and_column_norms() {
        let cfg = SystemConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ens = gen_spreading(&cfg, &mut rng);
        assert_eq!(ens.layers.len(), 3);
        let norms: Vec<f64> = ens
            .layers
            .iter()
            .flat_map(|g| {
                assert_eq!(g.shape(), (30, 100));
                g.column_iter()
                    .map(|c| c.norm_squared())
                    .collect::<Vec<_>>()
            })
            .collect();
        let mean = norms.iter().sum::<f64>() / norms.len() as f64;
        // Var ||g||^2 = 1/N for CN(0, 1/N) entries.
        let se = (1.0 / 30.0 / norms.len() as f64).sqrt();
        assert!((mean - 1.0).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn spreading_degenerate_shape_has_unit_variance() {
        let cfg = SystemConfig {
            k: 1,
            q: 1,
            n: 1,
            rho: vec![0.5],
            ..SystemConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let draws = 20_000;
        let mut acc = 0.0;
        for _ in 0..draws {
            let ens = gen_spreading(&cfg, &mut rng);
            assert_eq!(ens.layers[0].shape(), (1, 1));
            acc += ens.layers[0][(0, 0)].norm_sqr();
        }
        let var = acc / draws as f64;
        assert!((var - 1.0).abs() < 3.0 / (draws as f64).sqrt(), "{var}");
    }

    #[test]
    fn spreading_is_deterministic_per_seed() {
        let cfg = SystemConfig::default();
        let a = gen_spreading(&cfg, &mut ChaCha8Rng::seed_from_u64(42));
        let b = gen_spreading(&cfg, &mut ChaCha8Rng::seed_from_u64(42));
        assert_eq!(a, b);
    }

    #[test]
    fn empty_activity_gives_pure_noise() {
        let cfg = SystemConfig {
            rho: vec![0.0; 3],
            ..SystemConfig::default()
        };
        let plan = plan_power_levels(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let ens = gen_spreading(&cfg, &mut rng);
        let slot = synth_slot(&cfg, &plan, &ens, &mut rng, SymbolModel::Gaussian).unwrap();
        let energy: f64 = slot.symbols.iter().map(frobenius_sq).sum();
        assert_eq!(energy, 0.0);
        assert_eq!(slot.received, slot.noise);
    }

    #[test]
    fn reconstruction_identity_and_zero_rows() {
        let cfg = SystemConfig::default();
        let plan = plan_power_levels(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let ens = gen_spreading(&cfg, &mut rng);
        for model in [SymbolModel::Gaussian, SymbolModel::Qpsk] {
            let slot = synth_slot(&cfg, &plan, &ens, &mut rng, model).unwrap();
            let mut resid = slot.received.clone();
            for q in 0..cfg.q {
                resid -= ens.layer(q) * &slot.symbols[q];
                for (m, &a) in slot.activity[q].iter().enumerate() {
                    let row_energy: f64 = slot.symbols[q].row(m).iter().map(|z| z.norm_sqr()).sum();
                    assert_eq!(row_energy == 0.0, !a);
                }
            }
            let scale = frobenius_sq(&slot.received).sqrt();
            assert!((&resid - &slot.noise).norm() <= 1e-12 * scale);
        }
    }

    #[test]
    fn active_symbol_power_matches_level() {
        let cfg = SystemConfig::default();
        let plan = plan_power_levels(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let ens = gen_spreading(&cfg, &mut rng);
        for model in [SymbolModel::Gaussian, SymbolModel::Qpsk] {
            let mut acc = vec![(0.0, 0usize); cfg.q];
            for _ in 0..200 {
                let slot = synth_slot(&cfg, &plan, &ens, &mut rng, model).unwrap();
                for q in 0..cfg.q {
                    for m in slot.support(q) {
                        for z in slot.symbols[q].row(m).iter() {
                            acc[q].0 += z.norm_sqr();
                            acc[q].1 += 1;
                        }
                    }
                }
            }
            for q in 0..cfg.q {
                let ratio = acc[q].0 / acc[q].1 as f64 / plan.layers[q].v;
                assert!((ratio - 1.0).abs() < 0.02, "{model} layer {q}: {ratio}");
            }
        }
    }

    #[test]
    fn single_device_received_variance() {
        let cfg = SystemConfig {
            k: 1,
            q: 1,
            n: 4,
            t: 50,
            rho: vec![1.0],
            gamma: 20.0,
            ..SystemConfig::default()
        };
        let plan = plan_power_levels(&cfg);
        let v = plan.layers[0].v;
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut acc = 0.0;
        let mut count = 0usize;
        for _ in 0..2000 {
            let ens = gen_spreading(&cfg, &mut rng);
            let slot = synth_slot(&cfg, &plan, &ens, &mut rng, SymbolModel::Gaussian).unwrap();
            acc += frobenius_sq(&slot.received);
            count += cfg.n * cfg.t;
        }
        let per_entry = acc / count as f64;
        let expected = v / cfg.n as f64 + cfg.n0;
        assert!((per_entry / expected - 1.0).abs() < 0.05, "{per_entry} vs {expected}");
    }

    #[test]
    fn mean_active_count_reference_setup() {
        let cfg = SystemConfig::default();
        let plan = plan_power_levels(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let ens = gen_spreading(&cfg, &mut rng);
        let slots = 10_000;
        let mut total = 0usize;
        for _ in 0..slots {
            let slot = synth_slot(&cfg, &plan, &ens, &mut rng, SymbolModel::Gaussian).unwrap();
            total += slot.active_counts().iter().sum::<usize>();
        }
        let mean = total as f64 / slots as f64;
        // Var of the total count is 3 * 100 * 0.05 * 0.95.
        let se = (14.25f64 / slots as f64).sqrt();
        assert!((mean - 15.0).abs() < 4.0 * se, "{mean}");
    }

    #[test]
    fn layer_counts_follow_binomial_law() {
        use crate::stats::{binomial_ln_pmf, chi2_sf};
        let cfg = SystemConfig::default();
        let plan = plan_power_levels(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let ens = gen_spreading(&cfg, &mut rng);
        let m = cfg.m();
        let slots = 2000;
        let mut observed = vec![0.0; m + 1];
        for _ in 0..slots {
            let slot = synth_slot(&cfg, &plan, &ens, &mut rng, SymbolModel::Gaussian).unwrap();
            for c in slot.active_counts() {
                observed[c] += 1.0;
            }
        }
        let draws = (slots * cfg.q) as f64;
        // Pool the tails so every cell expects at least 5 counts.
        let (mut cells, mut obs_acc, mut exp_acc) = (Vec::new(), 0.0, 0.0);
        for (b, &o) in observed.iter().enumerate() {
            obs_acc += o;
            exp_acc += draws * binomial_ln_pmf(m as u64, 0.05, b as u64).exp();
            if exp_acc >= 5.0 {
                cells.push((obs_acc, exp_acc));
                obs_acc = 0.0;
                exp_acc = 0.0;
            }
        }
        let last = cells.last_mut().unwrap();
        last.0 += obs_acc;
        last.1 += exp_acc;
        let stat: f64 = cells.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
        let p = chi2_sf((cells.len() - 1) as u32, stat).unwrap();
        assert!(p > 0.01, "chi2 {stat} over {} cells, p {p}", cells.len());
    }

    #[test]
    fn layer_aggregate_power_matches_interference_term() {
        let cfg = SystemConfig::default();
        let plan = plan_power_levels(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let trials = 3000;
        let mut acc = vec![0.0; cfg.q];
        for _ in 0..trials {
            let ens = gen_spreading(&cfg, &mut rng);
            let slot = synth_slot(&cfg, &plan, &ens, &mut rng, SymbolModel::Gaussian).unwrap();
            for q in 0..cfg.q {
                let agg = ens.layer(q) * &slot.symbols[q];
                acc[q] += frobenius_sq(&agg) / cfg.t as f64;
            }
        }
        for q in 0..cfg.q {
            let expected = plan.layers[q].v * cfg.m() as f64 * cfg.rho[q];
            let got = acc[q] / trials as f64;
            assert!((got / expected - 1.0).abs() < 0.05, "layer {q}: {got} vs {expected}");
        }
    }

    #[test]
    fn dump_lists_activity_bits() {
        let cfg = SystemConfig {
            k: 4,
            q: 2,
            n: 2,
            t: 3,
            rho: vec![1.0, 0.0],
            ..SystemConfig::default()
        };
        let plan = plan_power_levels(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let ens = gen_spreading(&cfg, &mut rng);
        let slot = synth_slot(&cfg, &plan, &ens, &mut rng, SymbolModel::Gaussian).unwrap();
        let mut buf = Vec::new();
        slot.write_dump(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "b1 11");
        assert_eq!(lines[2], "b2 00");
        assert_eq!(lines.len(), 1 + 2 + 2);
    }
}
