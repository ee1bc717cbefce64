//! Job expansion, parallel execution and result persistence.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::{Grid, GridSpec};
use crate::harness::config::{ExperimentConfig, RegimeTag, Route, SweepMode, Target};
use crate::mc::estimator::estimate_trace;
use crate::mc::{estimate_quantity, long_cycle_rate, CycleConfig, McConfig};
use crate::model::{OscillatorKind, Pipeline, PresetName, SecondOrder};
use crate::operators::assemble;
use crate::pde::solve_spec;
use crate::superposition::{glue, solve_local_triple, GlueCondition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "PDE")]
    Pde,
    #[serde(rename = "MC")]
    Mc,
    #[serde(rename = "SUP")]
    Sup,
}

impl Method {
    pub fn tag(&self) -> &'static str {
        match self {
            Method::Pde => "PDE",
            Method::Mc => "MC",
            Method::Sup => "SUP",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub grid: Option<GridSpec>,
    pub dt: f64,
    pub lambda: f64,
    pub seed: Option<u64>,
    pub paths: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub job: String,
    pub family: String,
    pub quantity: String,
    pub method: Method,
    /// `pde`, `mc`, `superposition` or `long-cycle`.
    pub estimator: String,
    pub regime: RegimeTag,
    pub bound: f64,
    /// Transient horizon, or the averaging window of a long-run MC
    /// estimate.
    pub horizon: Option<f64>,
    pub value: f64,
    pub stderr: Option<f64>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub time: f64,
    pub value: f64,
    pub stderr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub job: String,
    pub family: String,
    pub quantity: String,
    pub series: String,
    pub points: Vec<TracePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobFailure {
    pub job: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ResultSet {
    pub target: Target,
    pub rows: Vec<ResultRow>,
    pub failures: Vec<JobFailure>,
    #[serde(skip)]
    pub traces: Vec<Trace>,
}

impl ResultSet {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    /// Rows of one quantity by method tag.
    pub fn find<'a>(&'a self, quantity: &'a str, method: Method) -> impl Iterator<Item = &'a ResultRow> + 'a {
        self.rows.iter().filter(move |r| r.quantity == quantity && r.method == method)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobStatus {
    pub job: String,
    pub ok: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub target: Target,
    pub created_unix: u64,
    pub files: Vec<String>,
    pub jobs: Vec<JobStatus>,
    pub success: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub results: ResultSet,
    pub manifest: Manifest,
    pub output_dir: PathBuf,
}

impl RunOutcome {
    pub fn is_success(&self) -> bool {
        self.manifest.success
    }
}

#[derive(Debug, Clone)]
struct Point {
    family: String,
    bound: f64,
    grid: GridSpec,
    mc_dt: Option<f64>,
}

#[derive(Debug, Clone)]
struct Job {
    id: String,
    family: String,
    entry: usize,
    route: Route,
    bound: f64,
    grid: GridSpec,
    horizon: Option<f64>,
    mc_dt: Option<f64>,
    series: String,
}

fn points(cfg: &ExperimentConfig) -> Vec<Point> {
    let s = &cfg.sweep;
    let base = cfg.grid.spec();
    let truncated = |l: f64| match s.fixed_dy {
        Some(dy) => GridSpec::new(base.half_i, ((l / dy).round() as usize).max(1), l),
        None => GridSpec::new(base.half_i, base.half_j, l),
    };
    let square = |h: usize| GridSpec::new(h, h, base.truncation);
    let at = |family: &str, bound: f64, grid: GridSpec, mc_dt: Option<f64>| Point { family: family.into(), bound, grid, mc_dt };
    let b0 = cfg.oscillator.bound;
    match s.mode {
        SweepMode::Product => {
            let bounds = s.bound.clone().unwrap_or_else(|| vec![b0]);
            let grids: Vec<GridSpec> = match (&s.half, &s.truncation) {
                (Some(h), Some(t)) => h.iter().flat_map(|&h| t.iter().map(move |&l| GridSpec::new(h, h, l))).collect(),
                (Some(h), None) => h.iter().map(|&h| square(h)).collect(),
                (None, Some(t)) => t.iter().map(|&l| truncated(l)).collect(),
                (None, None) => vec![base],
            };
            let dts: Vec<Option<f64>> = s.mc_dt.as_ref().map_or(vec![None], |d| d.iter().map(|&x| Some(x)).collect());
            let mut out = vec![];
            for &b in &bounds {
                for &g in &grids {
                    for &d in &dts {
                        out.push(at("main", b, g, d));
                    }
                }
            }
            out
        }
        SweepMode::Separate => {
            let mut out = vec![];
            for &b in s.bound.iter().flatten() {
                out.push(at("bound", b, base, None));
            }
            for &h in s.half.iter().flatten() {
                out.push(at("resolution", b0, square(h), None));
            }
            for &l in s.truncation.iter().flatten() {
                out.push(at("truncation", b0, truncated(l), None));
            }
            for &d in s.mc_dt.iter().flatten() {
                out.push(at("mc-dt", b0, base, Some(d)));
            }
            if out.is_empty() {
                out.push(at("main", b0, base, None));
            }
            out
        }
    }
}

fn jobs(cfg: &ExperimentConfig) -> Result<Vec<Job>> {
    let mut seen = HashSet::new();
    let mut out = vec![];
    for p in points(cfg) {
        for (e, q) in cfg.quantity.iter().enumerate() {
            let name = q.preset_name()?;
            let long = q.regime == RegimeTag::LongRun;
            let one_point = matches!(name, PresetName::E1 | PresetName::E2 | PresetName::E1Obstacle | PresetName::E2Obstacle);
            for &route in &cfg.methods {
                let applies = match route {
                    Route::Pde | Route::Mc => true,
                    Route::Sup => long && one_point && cfg.oscillator.kind == OscillatorKind::ElastoPlastic,
                    Route::LongCycle => long && name == PresetName::E3Plastic,
                };
                if !applies {
                    continue;
                }
                let uses_grid = matches!(route, Route::Pde | Route::Sup);
                let uses_horizon = match route {
                    Route::Pde | Route::Sup => !long,
                    Route::Mc | Route::LongCycle => true,
                };
                let default_horizon = match route {
                    Route::LongCycle => cfg.cycles.horizon,
                    _ => cfg.mc.horizon,
                };
                let horizons: Vec<Option<f64>> = if uses_horizon {
                    q.horizon.clone().unwrap_or_else(|| vec![default_horizon]).into_iter().map(Some).collect()
                } else {
                    vec![None]
                };
                let mc_dt = if uses_grid { None } else { p.mc_dt };
                for horizon in horizons {
                    let mut desc = format!("b={}", p.bound);
                    if uses_grid {
                        let _ = write!(desc, ";I={};J={};L={}", p.grid.half_i, p.grid.half_j, p.grid.truncation);
                    }
                    if let Some(d) = mc_dt {
                        let _ = write!(desc, ";dt={d:e}");
                    }
                    let route_tag = match route {
                        Route::Pde => "pde",
                        Route::Mc => "mc",
                        Route::Sup => "superposition",
                        Route::LongCycle => "long-cycle",
                    };
                    let series = format!("{route_tag}:{desc}");
                    let mut id = format!("{}/{}/{}", p.family, name.label(), series);
                    if let Some(h) = horizon {
                        let _ = write!(id, ";T={h}");
                    }
                    if seen.insert(id.clone()) {
                        out.push(Job { id, family: p.family.clone(), entry: e, route, bound: p.bound, grid: p.grid, horizon, mc_dt, series });
                    }
                }
            }
        }
    }
    Ok(out)
}

#[derive(Default)]
struct JobOutput {
    rows: Vec<ResultRow>,
    traces: Vec<Trace>,
}

fn run_job(cfg: &ExperimentConfig, job: &Job) -> Result<JobOutput> {
    let entry = &cfg.quantity[job.entry];
    let name = entry.preset_name()?;
    let params = cfg.oscillator.params(job.bound)?;
    let lambda = cfg.solver.lambda;
    let horizon = job.horizon.unwrap_or(cfg.mc.horizon);
    let spec = entry.spec(&params, lambda, horizon)?;
    let transient = entry.regime == RegimeTag::Transient;
    let trace_wanted = cfg.trace && transient;
    let mut out = JobOutput::default();
    let row = |method: Method, estimator: &str, value: f64, stderr: Option<f64>, provenance: Provenance| ResultRow {
        job: job.id.clone(),
        family: job.family.clone(),
        quantity: name.label().into(),
        method,
        estimator: estimator.into(),
        regime: entry.regime,
        bound: job.bound,
        horizon: job.horizon,
        value,
        stderr,
        provenance,
    };
    let trace = |points: Vec<TracePoint>| Trace {
        job: job.id.clone(),
        family: job.family.clone(),
        quantity: name.label().into(),
        series: job.series.clone(),
        points,
    };
    let start = cfg.mc.start;

    match job.route {
        Route::Pde | Route::Sup => {
            let grid = Grid::new(job.grid, params.bound)?;
            let op = assemble(&grid, &params)?;
            let probe = grid.nearest(start.0, start.1);
            let prov = Provenance { grid: Some(job.grid), dt: cfg.solver.dt, lambda: spec.lambda, seed: None, paths: None };
            if job.route == Route::Pde {
                let v = solve_spec(&spec, &op, cfg.solver.dt, probe)?;
                out.rows.push(row(Method::Pde, "pde", v.value, None, prov));
                if trace_wanted {
                    out.traces.push(trace(v.trace.iter().map(|&(time, value)| TracePoint { time, value, stderr: None }).collect()));
                }
            } else {
                let triple = solve_local_triple(&op, spec.lambda, &grid.sample(&spec.terminal_f))?;
                let glued = glue(&triple, GlueCondition::FluxJump)?;
                out.rows.push(row(Method::Sup, "superposition", spec.lambda * glued.u[probe], None, prov));
            }
        }
        Route::Mc => {
            let mc = McConfig { dt: job.mc_dt.unwrap_or(cfg.mc.dt), horizon, ..cfg.mc };
            let prov = Provenance { grid: None, dt: mc.dt, lambda: spec.lambda, seed: Some(mc.seed), paths: Some(mc.paths) };
            let est = estimate_quantity(&spec, &params, &mc)?;
            out.rows.push(row(Method::Mc, "mc", est.value, Some(est.stderr), prov));
            if trace_wanted && cfg.trace_points > 0 {
                let n = cfg.trace_points;
                let times: Vec<f64> = (0..=n).map(|k| horizon * k as f64 / n as f64).collect();
                let direct = spec.pipeline == Pipeline::ParabolicA
                    || (spec.pipeline == Pipeline::ParabolicAPrime && spec.second_order == SecondOrder::Variance);
                let points = if direct {
                    estimate_trace(&spec, &params, &mc, &times)?
                        .into_iter()
                        .map(|(time, value, se)| TracePoint { time, value, stderr: Some(se) })
                        .collect()
                } else {
                    let mut pts = vec![];
                    for &t in &times[1..] {
                        let e = estimate_quantity(&entry.spec(&params, lambda, t)?, &params, &McConfig { horizon: t, ..mc })?;
                        pts.push(TracePoint { time: t, value: e.value, stderr: Some(e.stderr) });
                    }
                    pts
                };
                out.traces.push(trace(points));
            }
        }
        Route::LongCycle => {
            let cc = CycleConfig { dt: job.mc_dt.unwrap_or(cfg.cycles.dt), horizon, ..cfg.cycles };
            let prov = Provenance { grid: None, dt: cc.dt, lambda: 0.0, seed: Some(cc.seed), paths: Some(cc.paths) };
            let lc = long_cycle_rate(&params, &cc)?;
            out.rows.push(row(Method::Mc, "long-cycle", lc.rate, Some(lc.rate_stderr), prov));
        }
    }
    Ok(out)
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn file_stem(s: &str) -> String {
    s.chars()
        .map(|c| match c {
            '\'' => 'p',
            c if c.is_ascii_alphanumeric() || c == '-' || c == '.' => c,
            _ => '_',
        })
        .collect()
}

pub fn write_results_csv<W: Write>(mut w: W, rows: &[ResultRow]) -> std::io::Result<()> {
    writeln!(w, "job,family,quantity,method,estimator,regime,bound,horizon,value,stderr,half_i,half_j,truncation,dt,lambda,seed,paths")?;
    for r in rows {
        let p = &r.provenance;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.job,
            r.family,
            r.quantity,
            r.method.tag(),
            r.estimator,
            match r.regime {
                RegimeTag::Transient => "transient",
                RegimeTag::LongRun => "long-run",
            },
            num(r.bound),
            opt_num(r.horizon),
            num(r.value),
            opt_num(r.stderr),
            opt(p.grid.map(|g| g.half_i)),
            opt(p.grid.map(|g| g.half_j)),
            opt_num(p.grid.map(|g| g.truncation)),
            num(p.dt),
            num(p.lambda),
            opt(p.seed),
            opt(p.paths),
        )?;
    }
    Ok(())
}

/// Long-format curve file: `series,time,value,stderr`.
fn write_curve<W: Write>(mut w: W, traces: &[&Trace]) -> std::io::Result<()> {
    writeln!(w, "series,time,value,stderr")?;
    for t in traces {
        for p in &t.points {
            writeln!(w, "{},{},{},{}", t.series, num(p.time), num(p.value), opt_num(p.stderr))?;
        }
    }
    Ok(())
}

/// Quantity-by-bound layout: one line per quantity and estimator.
fn write_bound_table<W: Write>(mut w: W, results: &ResultSet, bounds: &[f64]) -> std::io::Result<()> {
    let header: Vec<String> = bounds.iter().map(|b| b.to_string()).collect();
    writeln!(w, "quantity,estimator,{}", header.join(","))?;
    let mut keys: Vec<(String, String)> = vec![];
    for r in &results.rows {
        let k = (r.quantity.clone(), r.estimator.clone());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    for (q, e) in keys {
        let cells: Vec<String> = bounds
            .iter()
            .map(|&b| {
                let hit = results.rows.iter().find(|r| r.quantity == q && r.estimator == e && r.bound == b);
                hit.map(|r| num(r.value)).unwrap_or_default()
            })
            .collect();
        writeln!(w, "{q},{e},{}", cells.join(","))?;
    }
    Ok(())
}

/// Horizon-by-time-step layout of an MC quantity.
fn write_step_table<W: Write>(mut w: W, rows: &[&ResultRow], steps: &[f64]) -> std::io::Result<()> {
    let header: Vec<String> = steps.iter().map(|d| format!("dt={d:e}")).collect();
    writeln!(w, "horizon,{}", header.join(","))?;
    let mut horizons: Vec<f64> = vec![];
    for r in rows {
        if let Some(h) = r.horizon {
            if !horizons.contains(&h) {
                horizons.push(h);
            }
        }
    }
    for h in horizons {
        let cells: Vec<String> = steps
            .iter()
            .map(|&d| rows.iter().find(|r| r.horizon == Some(h) && r.provenance.dt == d).map(|r| num(r.value)).unwrap_or_default())
            .collect();
        writeln!(w, "{h},{}", cells.join(","))?;
    }
    Ok(())
}

fn create(dir: &Path, rel: &str, files: &mut Vec<String>) -> Result<fs::File> {
    let path = dir.join(rel);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    files.push(rel.to_string());
    Ok(fs::File::create(path)?)
}

fn write_artifacts(cfg: &ExperimentConfig, results: &ResultSet, dir: &Path) -> Result<Vec<String>> {
    let mut files = vec![];
    write_results_csv(std::io::BufWriter::new(create(dir, "results.csv", &mut files)?), &results.rows)?;
    let summary = serde_json::to_string_pretty(results)?;
    create(dir, "summary.json", &mut files)?.write_all(summary.as_bytes())?;

    let mut groups: Vec<(String, String)> = vec![];
    for t in &results.traces {
        let k = (t.family.clone(), t.quantity.clone());
        if !groups.contains(&k) {
            groups.push(k);
        }
    }
    for (family, quantity) in groups {
        let members: Vec<&Trace> = results.traces.iter().filter(|t| t.family == family && t.quantity == quantity).collect();
        let rel = format!("curves/{}_{}.csv", file_stem(&family), file_stem(&quantity));
        write_curve(std::io::BufWriter::new(create(dir, &rel, &mut files)?), &members)?;
    }

    match cfg.target {
        Target::Table1 | Target::Table2 => {
            let bounds = cfg.sweep.bound.clone().unwrap_or_else(|| vec![cfg.oscillator.bound]);
            write_bound_table(std::io::BufWriter::new(create(dir, "table.csv", &mut files)?), results, &bounds)?;
        }
        Target::Tabemper => {
            let steps = cfg.sweep.mc_dt.clone().unwrap_or_else(|| vec![cfg.mc.dt]);
            for q in &cfg.quantity {
                let label = q.preset_name()?.label();
                let rows: Vec<&ResultRow> = results.find(label, Method::Mc).filter(|r| r.estimator == "mc").collect();
                let rel = format!("table_{}.csv", file_stem(label));
                write_step_table(std::io::BufWriter::new(create(dir, &rel, &mut files)?), &rows, &steps)?;
            }
        }
        _ => {}
    }
    Ok(files)
}

/// Runs every job of `cfg` and writes the artifacts below its output
/// directory. Job failures are recorded, not propagated; invalid
/// configurations and I/O errors are.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let dir = cfg.output_dir.clone();
    fs::create_dir_all(&dir)?;
    let jobs = jobs(cfg)?;
    let outputs: Vec<Result<JobOutput>> = jobs.par_iter().map(|j| run_job(cfg, j)).collect();

    let mut results = ResultSet { target: cfg.target, ..Default::default() };
    let mut statuses = vec![];
    for (job, out) in jobs.iter().zip(outputs) {
        match out {
            Ok(o) => {
                results.rows.extend(o.rows);
                results.traces.extend(o.traces);
                statuses.push(JobStatus { job: job.id.clone(), ok: true, error: None });
            }
            Err(e) => {
                results.failures.push(JobFailure { job: job.id.clone(), message: e.to_string() });
                statuses.push(JobStatus { job: job.id.clone(), ok: false, error: Some(e.to_string()) });
            }
        }
    }
    let mut files = write_artifacts(cfg, &results, &dir)?;
    files.push("manifest.json".into());
    let created_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let manifest = Manifest { target: cfg.target, created_unix, files, success: results.failures.is_empty(), jobs: statuses };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(RunOutcome { results, manifest, output_dir: dir })
}

/// Plain-text listing of the scalars.
pub fn render_results(results: &ResultSet) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<14} {:<6} {:<13} {:>7} {:>8} {:>14} {:>12}", "quantity", "method", "estimator", "bound", "horizon", "value", "stderr");
    for r in &results.rows {
        let _ = writeln!(
            s,
            "{:<14} {:<6} {:<13} {:>7} {:>8} {:>14.6} {:>12}",
            r.quantity,
            r.method.tag(),
            r.estimator,
            r.bound,
            opt(r.horizon),
            r.value,
            r.stderr.map(|e| format!("{e:.2e}")).unwrap_or_default()
        );
    }
    for f in &results.failures {
        let _ = writeln!(s, "FAILED {}: {}", f.job, f.message);
    }
    s
}
