//! Command implementations behind the `takerate` binary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use takerate::analytical::{analytical_sweep, optimal_take_rate, OptimizerSettings, TakeRateOptimum};
use takerate::data_io::{generate_trades, render_config, write_trades, ScenarioConfig, SyntheticSpec};
use takerate::simulation::{assign_sticky, sweep_take_rate};
use takerate::{SweepCurve, SweepSample};

pub mod svg;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Analytical,
    Simulated,
}

/// Revenue-maximizing sample of a curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Optimum {
    pub t1_star: f64,
    pub rev1_star: f64,
    pub l1_at_optimum: f64,
}

/// Analytical values next to a simulated sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    pub t1: f64,
    pub l1_analytical: f64,
    pub rev1_analytical: f64,
    pub rev1_delta: f64,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub mode: Mode,
    pub config: ScenarioConfig,
    pub curve: SweepCurve,
    pub optimum: Optimum,
    /// Largest grid take rate at which pool 1 keeps all liquidity.
    pub full_retention_t1: Option<f64>,
    /// Continuous analytical optimum (closed form or refined numeric search).
    pub analytical_optimum: Option<TakeRateOptimum>,
    pub comparison: Option<Vec<Comparison>>,
    pub trade_count: Option<usize>,
}

impl RunReport {
    fn new(mode: Mode, config: &ScenarioConfig, curve: SweepCurve) -> Result<Self> {
        let best = *curve.argmax().context("take-rate grid is empty")?;
        Ok(RunReport {
            mode,
            config: config.clone(),
            full_retention_t1: curve.full_retention_t1(),
            optimum: Optimum {
                t1_star: best.t1,
                rev1_star: best.rev1,
                l1_at_optimum: best.l1,
            },
            curve,
            analytical_optimum: None,
            comparison: None,
            trade_count: None,
        })
    }

    pub fn max_abs_delta(&self) -> Option<f64> {
        self.comparison
            .as_ref()
            .map(|c| c.iter().map(|d| d.rev1_delta.abs()).fold(0.0, f64::max))
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub take_step: Option<f64>,
    pub liquidity_step: Option<f64>,
    pub seed: Option<u64>,
}

impl Overrides {
    pub fn apply(&self, config: &mut ScenarioConfig) -> Result<()> {
        let step = |flag: &str, v: f64| {
            anyhow::ensure!(v > 0.0 && v <= 0.5, "--{flag} must lie in (0, 0.5], got {v}");
            Ok(v)
        };
        if let Some(v) = self.take_step {
            config.take_step = step("take-step", v)?;
        }
        if let Some(v) = self.liquidity_step {
            config.liquidity_step = step("liquidity-step", v)?;
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        Ok(())
    }
}

/// Closed-form model over the take-rate grid.
pub fn cmd_analyze(config: &ScenarioConfig) -> Result<RunReport> {
    let params = config.model_params();
    let curve = analytical_sweep(&params, config.l_total, config.take_step)?;
    let mut report = RunReport::new(Mode::Analytical, config, curve)?;
    report.analytical_optimum = Some(optimal_take_rate(&params, OptimizerSettings::default())?);
    Ok(report)
}

/// Trade-level simulation over the take-rate grid, optionally next to the
/// analytical curve.
pub fn cmd_simulate(config: &ScenarioConfig, compare: bool) -> Result<RunReport> {
    let params = config.model_params();
    let trades = config.load_trace().context("loading trace")?;
    anyhow::ensure!(!trades.is_empty(), "trace contains no trades");
    let labeled = assign_sticky(&trades, config.s1, config.s2, config.seed, config.initial_price)?;
    let curve = sweep_take_rate(
        &params,
        &labeled,
        config.market_setup(),
        config.take_step,
        config.liquidity_step,
    )?;
    let mut report = RunReport::new(Mode::Simulated, config, curve)?;
    report.trade_count = Some(trades.len());
    if compare {
        let analytical = analytical_sweep(&params, config.l_total, config.take_step)?;
        report.comparison = Some(
            report
                .curve
                .samples
                .iter()
                .zip(&analytical.samples)
                .map(|(s, a)| Comparison {
                    t1: s.t1,
                    l1_analytical: a.l1,
                    rev1_analytical: a.rev1,
                    rev1_delta: s.rev1 - a.rev1,
                })
                .collect(),
        );
        report.analytical_optimum = Some(optimal_take_rate(&params, OptimizerSettings::default())?);
    }
    Ok(report)
}

/// Writes a synthetic trace to `output`.
pub fn cmd_gen_trace(spec: &SyntheticSpec, output: &Path) -> Result<usize> {
    if let Err(takerate::Error::InvalidParam { name, reason }) = spec.validate() {
        let flag = name.trim_start_matches("synthetic_");
        anyhow::bail!("--{flag}: {reason}");
    }
    let trades = generate_trades(spec)?;
    write_trades(output, &trades)?;
    Ok(trades.len())
}

fn opt_field(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `t1,l1,rev1`
pub fn curve_csv(curve: &SweepCurve) -> String {
    let mut out = String::from("t1,l1,rev1\n");
    for s in &curve.samples {
        let _ = writeln!(out, "{},{},{}", s.t1, s.l1, s.rev1);
    }
    out
}

/// `t1,l1,rev1,r1,r2`, plus analytical columns when compared.
pub fn sweep_csv(report: &RunReport) -> String {
    let mut out = String::from("t1,l1,rev1,r1,r2");
    if report.comparison.is_some() {
        out.push_str(",l1_analytical,rev1_analytical");
    }
    out.push('\n');
    for (i, s) in report.curve.samples.iter().enumerate() {
        let _ = write!(out, "{},{},{},{},{}", s.t1, s.l1, s.rev1, opt_field(s.r1), opt_field(s.r2));
        if let Some(cmp) = &report.comparison {
            let _ = write!(out, ",{},{}", cmp[i].l1_analytical, cmp[i].rev1_analytical);
        }
        out.push('\n');
    }
    out
}

pub fn report_text(report: &RunReport) -> String {
    let mut out = String::new();
    let mode = match report.mode {
        Mode::Analytical => "analytical",
        Mode::Simulated => "simulated",
    };
    let _ = writeln!(out, "mode: {mode}");
    if let Some(n) = report.trade_count {
        let _ = writeln!(out, "trades: {n}");
    }
    let _ = writeln!(out, "\n[scenario]");
    out.push_str(&render_config(&report.config));
    let _ = writeln!(out, "\n[optimum on grid]");
    let _ = writeln!(out, "t1_star = {}", report.optimum.t1_star);
    let _ = writeln!(out, "rev1_star = {}", report.optimum.rev1_star);
    let _ = writeln!(out, "l1_at_optimum = {}", report.optimum.l1_at_optimum);
    match report.full_retention_t1 {
        Some(t) => {
            let _ = writeln!(out, "max_t1_full_liquidity = {t}");
        }
        None => {
            let _ = writeln!(out, "max_t1_full_liquidity = none (pool 1 never holds all liquidity)");
        }
    }
    if let Some(opt) = report.analytical_optimum {
        let _ = writeln!(out, "\n[analytical optimum]");
        let _ = writeln!(out, "t1_star = {}", opt.t1);
        let _ = writeln!(out, "rev1_star = {}", opt.rev1);
    }
    if let Some(delta) = report.max_abs_delta() {
        let _ = writeln!(out, "\n[simulated vs analytical]");
        let _ = writeln!(out, "max_abs_rev1_delta = {delta}");
    }
    out
}

pub fn chart_svg(report: &RunReport) -> String {
    use svg::{Panel, Series};
    let line = |name: &str, color, dashed, f: &dyn Fn(&SweepSample) -> f64| Series {
        name: name.to_string(),
        color,
        dashed,
        points: report.curve.samples.iter().map(|s| (s.t1, f(s))).collect(),
    };
    let label = match report.mode {
        Mode::Analytical => "analytical",
        Mode::Simulated => "simulated",
    };
    let mut share = Panel {
        title: "Liquidity share of pool 1".into(),
        y_label: "l1".into(),
        series: vec![line(label, "#1f77b4", false, &|s| s.l1)],
    };
    let mut revenue = Panel {
        title: "Protocol revenue of pool 1".into(),
        y_label: "rev1".into(),
        series: vec![line(label, "#d62728", false, &|s| s.rev1)],
    };
    if let Some(cmp) = &report.comparison {
        share.series.push(Series {
            name: "analytical".into(),
            color: "#555555",
            dashed: true,
            points: cmp.iter().map(|c| (c.t1, c.l1_analytical)).collect(),
        });
        revenue.series.push(Series {
            name: "analytical".into(),
            color: "#555555",
            dashed: true,
            points: cmp.iter().map(|c| (c.t1, c.rev1_analytical)).collect(),
        });
    }
    let c = &report.config;
    let title = format!("t2 = {}, s1 = {}, s2 = {}, d = {}", c.t2, c.s1, c.s2, c.d);
    svg::render(&title, "take rate t1", &[share, revenue])
}

fn write_file(dir: &Path, name: &str, body: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

/// Writes the report's files into `out_dir` and returns their paths.
pub fn write_outputs(report: &RunReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let mut written = Vec::new();
    match report.mode {
        Mode::Analytical => {
            written.push(write_file(out_dir, "curve.csv", &curve_csv(&report.curve))?);
            written.push(write_file(out_dir, "curve.svg", &chart_svg(report))?);
        }
        Mode::Simulated => {
            written.push(write_file(out_dir, "sweep.csv", &sweep_csv(report))?);
            written.push(write_file(out_dir, "sweep.svg", &chart_svg(report))?);
            if let Some(cmp) = &report.comparison {
                let analytical = SweepCurve {
                    samples: cmp
                        .iter()
                        .map(|c| SweepSample {
                            t1: c.t1,
                            l1: c.l1_analytical,
                            rev1: c.rev1_analytical,
                            r1: None,
                            r2: None,
                        })
                        .collect(),
                    grid_step: report.curve.grid_step,
                };
                written.push(write_file(out_dir, "curve.csv", &curve_csv(&analytical))?);
            }
        }
    }
    written.push(write_file(out_dir, "report.txt", &report_text(report))?);
    Ok(written)
}
