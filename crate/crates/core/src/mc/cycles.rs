//! Long-cycle estimator of the plastic deformation growth rate.
//!
//! An event is the end of a plastic phase: the projection is active on the
//! step `n -> n + 1` with `Y_n` pointing out of the elastic range, and
//! `Y_{n+1}` has turned back. A long cycle starts at an event on one side,
//! visits the opposite side and ends at the next event on the starting
//! side. Cycles are i.i.d. and the growth rate is
//! `E[(increment)^2] / E[duration]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mc::{elastoplastic, path_rng, run_paths, SampleStats};
use crate::model::{OscillatorKind, OscillatorParams};
use crate::pde::step_count;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CycleConfig {
    pub paths: usize,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    pub batch_size: usize,
    pub start: (f64, f64),
    pub min_cycles: usize,
}

impl Default for CycleConfig {
    fn default() -> Self {
        Self { paths: 100, dt: 1e-3, horizon: 200.0, seed: 1, batch_size: 16, start: (0.0, 0.0), min_cycles: 100 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub path: u64,
    pub index: usize,
    pub duration: f64,
    pub increment: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongCycleOutput {
    /// `1 / E[duration]`.
    pub frequency: f64,
    /// `E[increment^2]`.
    pub gamma2: f64,
    pub rate: f64,
    pub rate_stderr: f64,
    pub cycles: Vec<CycleRecord>,
}

#[derive(Clone, Copy)]
enum Phase {
    Idle,
    AwayFrom { side: f64, t: f64, delta: f64 },
    Returning { side: f64, t: f64, delta: f64 },
}

/// Cycles of one path, given the sequence of `(time, side, deformation)`
/// events.
fn cycles_from_events(path: u64, events: &[(f64, f64, f64)]) -> Vec<CycleRecord> {
    let mut out = Vec::new();
    let mut phase = Phase::Idle;
    for &(t, s, d) in events {
        phase = match phase {
            Phase::Idle => Phase::AwayFrom { side: s, t, delta: d },
            Phase::AwayFrom { side, t: t0, delta } if s != side => Phase::Returning { side, t: t0, delta },
            Phase::Returning { side, t: t0, delta } if s == side => {
                out.push(CycleRecord { path, index: out.len(), duration: t - t0, increment: d - delta });
                Phase::AwayFrom { side, t, delta: d }
            }
            keep => keep,
        };
    }
    out
}

pub fn long_cycle_rate(params: &OscillatorParams, cfg: &CycleConfig) -> Result<LongCycleOutput> {
    if params.kind != OscillatorKind::ElastoPlastic {
        return Err(Error::InvalidParameter("long cycles are defined for the elasto-plastic oscillator".into()));
    }
    if cfg.paths == 0 || cfg.batch_size == 0 {
        return Err(Error::InvalidParameter("paths and batch size must be positive".into()));
    }
    let (steps, h) = step_count(cfg.horizon, cfg.dt)?;
    let bound = params.bound;
    let per_path = run_paths(cfg.paths, cfg.batch_size, |p| {
        let mut rng = path_rng(cfg.seed, p);
        let mut delta = 0.0;
        let mut events = Vec::new();
        elastoplastic::simulate(params, cfg.start, h, steps, &mut rng, |n, _, y, s| {
            delta += s.plastic;
            if s.z.abs() == bound {
                let side = bound.copysign(s.z).signum();
                if y * side > 0.0 && s.y * side <= 0.0 {
                    events.push(((n + 1) as f64 * h, side, delta));
                }
            }
        });
        cycles_from_events(p, &events)
    });
    let cycles: Vec<CycleRecord> = per_path.into_iter().flatten().collect();
    if cycles.len() < cfg.min_cycles.max(2) {
        return Err(Error::InsufficientCycles { found: cycles.len(), required: cfg.min_cycles.max(2) });
    }
    let sq: Vec<f64> = cycles.iter().map(|c| c.increment * c.increment).collect();
    let dur: Vec<f64> = cycles.iter().map(|c| c.duration).collect();
    let a = SampleStats::of(&sq);
    let b = SampleStats::of(&dur);
    let n = cycles.len() as f64;
    let cov = sq.iter().zip(&dur).map(|(x, y)| (x - a.mean) * (y - b.mean)).sum::<f64>() / (n - 1.0);
    let rate = a.mean / b.mean;
    // delta method for a ratio of means
    let var = (a.variance / b.mean.powi(2) - 2.0 * a.mean * cov / b.mean.powi(3) + a.mean.powi(2) * b.variance / b.mean.powi(4)) / n;
    Ok(LongCycleOutput { frequency: 1.0 / b.mean, gamma2: a.mean, rate, rate_stderr: var.max(0.0).sqrt(), cycles })
}

/// `index,path,duration,increment` CSV.
pub fn write_cycles<W: std::io::Write>(mut out: W, cycles: &[CycleRecord]) -> std::io::Result<()> {
    writeln!(out, "index,path,duration,increment")?;
    for c in cycles {
        writeln!(out, "{},{},{:.16e},{:.16e}", c.index, c.path, c.duration, c.increment)?;
    }
    Ok(())
}
