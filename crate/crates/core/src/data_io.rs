//! Trade traces, synthetic trace generation and scenario configuration.
//!
//! Trace files are CSV with the exact header `direction,amount_in`, where
//! `direction` is `a2b` or `b2a` and `amount_in` is a positive decimal.
//!
//! Scenario files are flat text, one `key = value` per line, `#` starts a
//! comment. See [`ScenarioConfig`] for the keys.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};

use crate::analytical::ModelParams;
use crate::cpmm::Direction;
use crate::error::{Error, Result};
use crate::simulation::{
    MarketSetup, TradeEvent, DEFAULT_DEVIATION_THRESHOLD, DEFAULT_LIQUIDITY_STEP, DEFAULT_TAKE_STEP,
};

pub const TRACE_HEADER: &str = "direction,amount_in";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn direction_code(direction: Direction) -> &'static str {
    match direction {
        Direction::AToB => "a2b",
        Direction::BToA => "b2a",
    }
}

fn parse_direction(s: &str) -> Option<Direction> {
    match s {
        "a2b" => Some(Direction::AToB),
        "b2a" => Some(Direction::BToA),
        _ => None,
    }
}

/// Reads a trace file in file order.
pub fn load_trades(path: impl AsRef<Path>) -> Result<Vec<TradeEvent>> {
    let path = path.as_ref();
    let parse_err = |line: u64, reason: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => Error::Io {
                path: path.to_path_buf(),
                source,
            },
            other => parse_err(1, format!("{other:?}")),
        })?;

    let header = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != TRACE_HEADER {
        return Err(parse_err(1, format!("expected header `{TRACE_HEADER}`, found `{header}`")));
    }

    let mut trades = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let direction = parse_direction(&record[0])
            .ok_or_else(|| parse_err(line, format!("unknown direction `{}` (expected a2b or b2a)", &record[0])))?;
        let amount: f64 = record[1]
            .parse()
            .map_err(|_| parse_err(line, format!("amount `{}` is not a decimal number", &record[1])))?;
        if !(amount > 0.0 && amount.is_finite()) {
            return Err(Error::Validation {
                path: path.to_path_buf(),
                line,
                reason: format!("amount_in must be positive, got {amount}"),
            });
        }
        trades.push(TradeEvent::new(direction, amount)?);
    }

    if trades.is_empty() {
        log::warn!("trace {} contains no trades", path.display());
    } else {
        let total: f64 = trades.iter().map(|t| t.amount_in).sum();
        log::info!("loaded {} trades from {} (raw volume {total})", trades.len(), path.display());
    }
    Ok(trades)
}

pub fn write_trades(path: impl AsRef<Path>, trades: &[TradeEvent]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::with_capacity(16 * (trades.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for t in trades {
        out.push_str(direction_code(t.direction));
        out.push(',');
        // Display for f64 prints the shortest string that round-trips
        out.push_str(&t.amount_in.to_string());
        out.push('\n');
    }
    let mut file = fs::File::create(path).map_err(io_err(path))?;
    file.write_all(out.as_bytes()).map_err(io_err(path))
}

/// Log-normal trade sizes with independent directions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub n_trades: usize,
    /// Location of `ln(size)`.
    pub mu: f64,
    /// Scale of `ln(size)`.
    pub sigma: f64,
    /// Probability that a trade is `a2b`.
    pub bias: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_trades: 10_000,
            mu: 0.0,
            sigma: 1.0,
            bias: 0.5,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_trades == 0 {
            return Err(Error::param("synthetic_n", "need at least one trade"));
        }
        if !(0.0..=1.0).contains(&self.bias) {
            return Err(Error::param("synthetic_bias", format!("must lie in [0, 1], got {}", self.bias)));
        }
        if !self.mu.is_finite() {
            return Err(Error::param("synthetic_mu", "must be finite"));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::param("synthetic_sigma", format!("must be nonnegative, got {}", self.sigma)));
        }
        Ok(())
    }

    /// Mean trade size `exp(mu + sigma^2 / 2)`.
    pub fn mean_size(&self) -> f64 {
        (self.mu + 0.5 * self.sigma * self.sigma).exp()
    }
}

pub fn generate_trades(spec: &SyntheticSpec) -> Result<Vec<TradeEvent>> {
    spec.validate()?;
    let sizes = LogNormal::new(spec.mu, spec.sigma).map_err(|e| Error::param("synthetic_sigma", e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    (0..spec.n_trades)
        .map(|_| {
            let direction = if rng.random_bool(spec.bias) {
                Direction::AToB
            } else {
                Direction::BToA
            };
            let amount = sizes.sample(&mut rng).max(f64::MIN_POSITIVE);
            TradeEvent::new(direction, amount)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum TraceSource {
    File(PathBuf),
    Synthetic(SyntheticSpec),
}

/// A validated scenario.
///
/// Required keys: `t2`, `s1`, `f`, `L_total`. Optional keys and defaults:
/// `s2 = 0`, `d = 0`, `take_step = 0.01`, `liquidity_step = 0.005`,
/// `deviation_threshold = 0.1`, `seed = 0`, `initial_price = 1`,
/// `trace` (a CSV path relative to the config file, or `synthetic`), and
/// `synthetic_n`, `synthetic_mu`, `synthetic_sigma`, `synthetic_bias`,
/// `synthetic_seed` for the generator.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub t2: f64,
    pub s1: f64,
    pub s2: f64,
    pub d: f64,
    pub f: f64,
    pub take_step: f64,
    pub liquidity_step: f64,
    pub deviation_threshold: f64,
    pub seed: u64,
    pub l_total: f64,
    pub initial_price: f64,
    pub trace: Option<TraceSource>,
}

const KNOWN_KEYS: &[&str] = &[
    "t2",
    "s1",
    "s2",
    "d",
    "f",
    "L_total",
    "trace",
    "take_step",
    "liquidity_step",
    "deviation_threshold",
    "seed",
    "initial_price",
    "synthetic_n",
    "synthetic_mu",
    "synthetic_sigma",
    "synthetic_bias",
    "synthetic_seed",
];

impl ScenarioConfig {
    /// Model parameters with `t1 = 0`.
    pub fn model_params(&self) -> ModelParams {
        ModelParams {
            t1: 0.0,
            t2: self.t2,
            s1: self.s1,
            s2: self.s2,
            d: self.d,
            f: self.f,
            volume: 1.0,
        }
    }

    pub fn market_setup(&self) -> MarketSetup {
        MarketSetup {
            l_total: self.l_total,
            price: self.initial_price,
            fee: self.f,
            deviation_threshold: self.deviation_threshold,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fraction = |key: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::config(key, format!("must lie in [0, 1], got {v}")))
            }
        };
        let step = |key: &str, v: f64| {
            if v > 0.0 && v <= 0.5 {
                Ok(())
            } else {
                Err(Error::config(key, format!("must lie in (0, 0.5], got {v}")))
            }
        };
        fraction("t2", self.t2)?;
        fraction("s1", self.s1)?;
        fraction("s2", self.s2)?;
        if self.s1 + self.s2 > 1.0 + 1e-12 {
            return Err(Error::config("s2", format!("s1 + s2 must not exceed 1, got {}", self.s1 + self.s2)));
        }
        if !(self.d >= 0.0 && self.d.is_finite()) {
            return Err(Error::config("d", format!("must be nonnegative, got {}", self.d)));
        }
        if !(0.0..1.0).contains(&self.f) {
            return Err(Error::config("f", format!("must lie in [0, 1), got {}", self.f)));
        }
        step("take_step", self.take_step)?;
        step("liquidity_step", self.liquidity_step)?;
        fraction("deviation_threshold", self.deviation_threshold)?;
        if !(self.l_total > 0.0 && self.l_total.is_finite()) {
            return Err(Error::config("L_total", format!("must be positive, got {}", self.l_total)));
        }
        if !(self.initial_price > 0.0 && self.initial_price.is_finite()) {
            return Err(Error::config("initial_price", format!("must be positive, got {}", self.initial_price)));
        }
        if let Some(TraceSource::Synthetic(spec)) = &self.trace {
            spec.validate().map_err(|e| match e {
                Error::InvalidParam { name, reason } => Error::Config { key: name, reason },
                other => other,
            })?;
        }
        Ok(())
    }

    /// Loads or generates the configured trace.
    pub fn load_trace(&self) -> Result<Vec<TradeEvent>> {
        match &self.trace {
            Some(TraceSource::File(path)) => load_trades(path),
            Some(TraceSource::Synthetic(spec)) => generate_trades(spec),
            None => Err(Error::config("trace", "a trace is required for simulation")),
        }
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_config(&text, path.parent().unwrap_or_else(|| Path::new(".")))
}

/// Parses config text; relative trace paths resolve against `base_dir`.
pub fn parse_config(text: &str, base_dir: &Path) -> Result<ScenarioConfig> {
    let mut entries: HashMap<String, String> = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::config(line, format!("line {}: expected `key = value`", idx + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        if !KNOWN_KEYS.contains(&key) {
            return Err(Error::config(key, format!("line {}: unknown key", idx + 1)));
        }
        if entries.insert(key.to_string(), value.to_string()).is_some() {
            return Err(Error::config(key, format!("line {}: duplicate key", idx + 1)));
        }
    }

    let number = |key: &str| -> Result<Option<f64>> {
        entries
            .get(key)
            .map(|v| {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::config(key, format!("`{v}` is not a number")))
            })
            .transpose()
    };
    let integer = |key: &str| -> Result<Option<u64>> {
        entries
            .get(key)
            .map(|v| {
                v.parse::<u64>()
                    .map_err(|_| Error::config(key, format!("`{v}` is not a nonnegative integer")))
            })
            .transpose()
    };
    let required = |key: &str| -> Result<f64> { number(key)?.ok_or_else(|| Error::config(key, "missing required key")) };

    let trace = match entries.get("trace").map(String::as_str) {
        None => None,
        Some("") => return Err(Error::config("trace", "empty value")),
        Some("synthetic") => {
            let defaults = SyntheticSpec::default();
            Some(TraceSource::Synthetic(SyntheticSpec {
                n_trades: integer("synthetic_n")?.map_or(defaults.n_trades, |n| n as usize),
                mu: number("synthetic_mu")?.unwrap_or(defaults.mu),
                sigma: number("synthetic_sigma")?.unwrap_or(defaults.sigma),
                bias: number("synthetic_bias")?.unwrap_or(defaults.bias),
                seed: integer("synthetic_seed")?.unwrap_or(defaults.seed),
            }))
        }
        Some(file) => {
            let p = PathBuf::from(file);
            Some(TraceSource::File(if p.is_absolute() { p } else { base_dir.join(p) }))
        }
    };

    let config = ScenarioConfig {
        t2: required("t2")?,
        s1: required("s1")?,
        s2: number("s2")?.unwrap_or(0.0),
        d: number("d")?.unwrap_or(0.0),
        f: required("f")?,
        take_step: number("take_step")?.unwrap_or(DEFAULT_TAKE_STEP),
        liquidity_step: number("liquidity_step")?.unwrap_or(DEFAULT_LIQUIDITY_STEP),
        deviation_threshold: number("deviation_threshold")?.unwrap_or(DEFAULT_DEVIATION_THRESHOLD),
        seed: integer("seed")?.unwrap_or(0),
        l_total: required("L_total")?,
        initial_price: number("initial_price")?.unwrap_or(1.0),
        trace,
    };
    config.validate()?;
    Ok(config)
}

/// Renders a config in the flat format accepted by [`parse_config`].
pub fn render_config(config: &ScenarioConfig) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
    kv("t2", config.t2.to_string());
    kv("s1", config.s1.to_string());
    kv("s2", config.s2.to_string());
    kv("d", config.d.to_string());
    kv("f", config.f.to_string());
    kv("L_total", config.l_total.to_string());
    kv("initial_price", config.initial_price.to_string());
    kv("take_step", config.take_step.to_string());
    kv("liquidity_step", config.liquidity_step.to_string());
    kv("deviation_threshold", config.deviation_threshold.to_string());
    kv("seed", config.seed.to_string());
    match &config.trace {
        Some(TraceSource::File(p)) => kv("trace", p.display().to_string()),
        Some(TraceSource::Synthetic(s)) => {
            kv("trace", "synthetic".into());
            kv("synthetic_n", s.n_trades.to_string());
            kv("synthetic_mu", s.mu.to_string());
            kv("synthetic_sigma", s.sigma.to_string());
            kv("synthetic_bias", s.bias.to_string());
            kv("synthetic_seed", s.seed.to_string());
        }
        None => {}
    }
    out
}
