use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use nsbke_core::harness::{
    compare_report, render_results, run_experiment, ExperimentConfig, QuantityEntry, RegimeTag, ResultSet, Route,
    SweepMode, Target, Tolerance,
};
use nsbke_core::model::OscillatorKind;
use nsbke_core::Error;

#[derive(Parser)]
#[command(name = "nsbke", version, about = "Kolmogorov PDE and Monte Carlo estimates for constrained random oscillators")]
struct Cli {
    /// Output directory (overrides the config file).
    #[arg(long, global = true, env = "NSBKE_OUT")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a single quantity.
    Solve {
        /// Preset name, e.g. E1, E3-plastic, E2'.
        #[arg(long)]
        preset: String,
        /// Long-run version of the preset.
        #[arg(long)]
        long_run: bool,
        /// Transient horizon or MC averaging window.
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        lag: Option<f64>,
        #[arg(long)]
        eps: Option<f64>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run the sweeps of a config file.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Reproduce a named table or figure.
    Reproduce {
        /// table1, table2, tabemper, fig2, fig3 or fig4.
        target: Target,
        /// Start from this file instead of the built-in setup.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
        /// Print the effective config and exit.
        #[arg(long)]
        print_config: bool,
    },
    /// Compare methods in a stored result set.
    Compare {
        /// `summary.json` of a previous run.
        summary: PathBuf,
        /// Take tolerances from this config file.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        abs: Option<f64>,
        #[arg(long)]
        rel: Option<f64>,
        #[arg(long)]
        sigma: Option<f64>,
    },
}

#[derive(Args, Default)]
struct Overrides {
    /// Methods: pde, mc, sup, long-cycle.
    #[arg(long, value_delimiter = ',')]
    method: Vec<Route>,
    #[arg(long)]
    kind: Option<OscillatorKind>,
    #[arg(long)]
    c0: Option<f64>,
    #[arg(long)]
    k: Option<f64>,
    /// Plastic yield or obstacle position.
    #[arg(long)]
    bound: Option<f64>,
    #[arg(long)]
    restitution: Option<f64>,
    /// Square grid half count.
    #[arg(long)]
    half: Option<usize>,
    #[arg(long)]
    truncation: Option<f64>,
    /// PDE time step.
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    mc_dt: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    burn_in: Option<f64>,
    /// Write horizon traces.
    #[arg(long)]
    trace: bool,
    #[arg(long, value_delimiter = ',')]
    sweep_bound: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    sweep_half: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    sweep_truncation: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    sweep_mc_dt: Option<Vec<f64>>,
    /// Vary each swept axis alone.
    #[arg(long)]
    separate: bool,
}

impl Overrides {
    fn apply(self, cfg: &mut ExperimentConfig) {
        if !self.method.is_empty() {
            cfg.methods = self.method;
        }
        let o = &mut cfg.oscillator;
        o.kind = self.kind.unwrap_or(o.kind);
        o.c0 = self.c0.unwrap_or(o.c0);
        o.k = self.k.unwrap_or(o.k);
        o.bound = self.bound.unwrap_or(o.bound);
        o.restitution = self.restitution.unwrap_or(o.restitution);
        if let Some(h) = self.half {
            cfg.grid.half_i = h;
            cfg.grid.half_j = h;
        }
        cfg.grid.truncation = self.truncation.unwrap_or(cfg.grid.truncation);
        cfg.solver.dt = self.dt.unwrap_or(cfg.solver.dt);
        cfg.solver.lambda = self.lambda.unwrap_or(cfg.solver.lambda);
        cfg.mc.paths = self.paths.unwrap_or(cfg.mc.paths);
        cfg.cycles.paths = self.paths.unwrap_or(cfg.cycles.paths);
        cfg.mc.dt = self.mc_dt.unwrap_or(cfg.mc.dt);
        cfg.cycles.dt = self.mc_dt.unwrap_or(cfg.cycles.dt);
        cfg.mc.seed = self.seed.unwrap_or(cfg.mc.seed);
        cfg.cycles.seed = self.seed.unwrap_or(cfg.cycles.seed);
        cfg.mc.burn_in = self.burn_in.unwrap_or(cfg.mc.burn_in);
        cfg.trace |= self.trace;
        let s = &mut cfg.sweep;
        s.bound = self.sweep_bound.or(s.bound.take());
        s.half = self.sweep_half.or(s.half.take());
        s.truncation = self.sweep_truncation.or(s.truncation.take());
        s.mc_dt = self.sweep_mc_dt.or(s.mc_dt.take());
        if self.separate {
            s.mode = SweepMode::Separate;
        }
    }
}

fn execute(cfg: ExperimentConfig) -> Result<ExitCode> {
    let outcome = run_experiment(&cfg)?;
    print!("{}", render_results(&outcome.results));
    println!("results written to {}", outcome.output_dir.display());
    Ok(if outcome.is_success() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn load(path: &PathBuf) -> Result<ExperimentConfig> {
    ExperimentConfig::load(path).with_context(|| format!("reading {}", path.display()))
}

fn run(cli: Cli) -> Result<ExitCode> {
    let out = cli.out;
    let finish = |mut cfg: ExperimentConfig| -> Result<ExitCode> {
        if let Some(dir) = &out {
            cfg.output_dir = dir.clone();
        }
        execute(cfg)
    };
    match cli.command {
        Command::Solve { preset, long_run, horizon, lag, eps, overrides } => {
            let mut cfg = ExperimentConfig { output_dir: PathBuf::from("solve"), ..Default::default() };
            let regime = if long_run { RegimeTag::LongRun } else { RegimeTag::Transient };
            let mut entry = QuantityEntry::new(&preset, regime, horizon.map(|h| vec![h]));
            entry.lag = lag.unwrap_or(entry.lag);
            entry.eps = eps.unwrap_or(entry.eps);
            if entry.preset_name()?.oscillator() == OscillatorKind::Obstacle {
                cfg.oscillator.kind = OscillatorKind::Obstacle;
            }
            cfg.quantity = vec![entry];
            overrides.apply(&mut cfg);
            finish(cfg)
        }
        Command::Sweep { config, overrides } => {
            let mut cfg = load(&config)?;
            overrides.apply(&mut cfg);
            finish(cfg)
        }
        Command::Reproduce { target, config, overrides, print_config } => {
            if target == Target::Custom {
                bail!("reproduce needs a named target; use `sweep` for custom configs");
            }
            let mut cfg = match &config {
                Some(p) => ExperimentConfig { target, ..load(p)? },
                None => ExperimentConfig::for_target(target),
            };
            overrides.apply(&mut cfg);
            if print_config {
                print!("{}", cfg.to_toml_string()?);
                return Ok(ExitCode::SUCCESS);
            }
            finish(cfg)
        }
        Command::Compare { summary, config, abs, rel, sigma } => {
            let results = ResultSet::load(&summary).with_context(|| format!("reading {}", summary.display()))?;
            let mut tol = match &config {
                Some(p) => load(p)?.tolerances,
                None => ExperimentConfig::for_target(results.target).tolerances,
            };
            let d = &mut tol.default;
            *d = Tolerance { abs: abs.unwrap_or(d.abs), rel: rel.unwrap_or(d.rel), sigma: sigma.unwrap_or(d.sigma) };
            match compare_report(&results, &tol) {
                Ok(report) => {
                    print!("{}", report.render_text());
                    if let Some(dir) = &out {
                        std::fs::create_dir_all(dir)?;
                        report.write_csv(std::fs::File::create(dir.join("report.csv"))?)?;
                    }
                    Ok(if report.all_pass() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
                }
                Err(Error::NoComparablePairs) => {
                    println!("no comparable pairs");
                    Ok(ExitCode::from(2))
                }
                Err(e) => Err(e.into()),
            }
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
