//! Ensemble estimators for every pipeline of [`QuantitySpec`].
//!
//! Running integrals use left-point sums `sum g(X_n) (t_{n+1} - t_n)`, so
//! they stay consistent on the irregular time grid of the impact scheme.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mc::exact::{build_exact_tables, ExactStepTables};
use crate::mc::{elastoplastic, obstacle, path_rng, run_paths, McConfig, SampleStats, Scheme};
use crate::model::{FieldFn, OscillatorKind, OscillatorParams, Pipeline, QuantitySpec, SecondOrder};
use crate::pde::step_count;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub stderr: f64,
    pub paths: usize,
    /// Bound on the truncation error of discounted integrals.
    pub tail_bound: Option<f64>,
    /// Standard error above the configured target.
    pub flagged: bool,
}

impl Scheme {
    pub fn for_kind(kind: OscillatorKind) -> Self {
        match kind {
            OscillatorKind::ElastoPlastic => Scheme::ElastoPlasticEuler,
            OscillatorKind::Obstacle => Scheme::ObstacleExact,
        }
    }
}

/// Path generator for either oscillator, advanced segment by segment.
pub(crate) enum Walker {
    Ep { params: OscillatorParams, dt: f64 },
    Obstacle { params: OscillatorParams, tables: ExactStepTables },
}

impl Walker {
    pub(crate) fn new(params: &OscillatorParams, dt: f64) -> Result<Self> {
        Ok(match Scheme::for_kind(params.kind) {
            Scheme::ElastoPlasticEuler => Walker::Ep { params: *params, dt },
            Scheme::ObstacleExact => Walker::Obstacle { params: *params, tables: build_exact_tables(params, dt)? },
        })
    }

    pub(crate) fn bound(&self) -> f64 {
        match self {
            Walker::Ep { params, .. } | Walker::Obstacle { params, .. } => params.bound,
        }
    }

    /// Advances `state` by `len`, calling `visit(t, h, z, y)` with the
    /// absolute start time of each step.
    pub(crate) fn advance(
        &self,
        state: (f64, f64),
        t0: f64,
        len: f64,
        rng: &mut ChaCha8Rng,
        mut visit: impl FnMut(f64, f64, f64, f64),
    ) -> Result<(f64, f64)> {
        if len <= 0.0 {
            return Ok(state);
        }
        match self {
            Walker::Ep { params, dt } => {
                let (steps, h) = step_count(len, *dt)?;
                Ok(elastoplastic::simulate(params, state, h, steps, rng, |n, z, y, _| {
                    visit(t0 + n as f64 * h, h, z, y)
                }))
            }
            Walker::Obstacle { params, tables } => {
                obstacle::simulate(params, tables, state, len, rng, |t, h, x, y, _| visit(t0 + t, h, x, y))
            }
        }
    }
}

struct PathSums {
    first: f64,
    second: f64,
    speed: f64,
}

fn finish(value: f64, stderr: f64, paths: usize, tail_bound: Option<f64>, cfg: &McConfig) -> McEstimate {
    let flagged = cfg.target_stderr.is_some_and(|t| stderr > t);
    McEstimate { value, stderr, paths, tail_bound, flagged }
}

fn collect<T>(results: Vec<Result<T>>) -> Result<Vec<T>> {
    results.into_iter().collect()
}

/// Monte Carlo value and standard error of `spec`.
pub fn estimate_quantity(spec: &QuantitySpec, params: &OscillatorParams, cfg: &McConfig) -> Result<McEstimate> {
    spec.validate()?;
    cfg.validate()?;
    let walker = Walker::new(params, cfg.dt)?;
    let bound = walker.bound();
    let (f, g) = (spec.terminal_f, spec.running_g);
    let (phi, psi) = spec.second_pair();
    let run = |body: &(dyn Fn(&mut ChaCha8Rng) -> Result<PathSums> + Sync)| -> Result<Vec<PathSums>> {
        collect(run_paths(cfg.paths, cfg.batch_size, |p| body(&mut path_rng(cfg.seed, p))))
    };
    let integrate = |fun: FieldFn| !fun.is_zero();

    match spec.pipeline {
        Pipeline::ParabolicA | Pipeline::ParabolicAPrime => {
            let horizon = spec.horizon;
            let lag = spec.lag;
            let primed = spec.pipeline == Pipeline::ParabolicAPrime;
            let body = |rng: &mut ChaCha8Rng| -> Result<PathSums> {
                let (mut s1, mut s2) = (0.0, 0.0);
                let state = walker.advance(cfg.start, 0.0, horizon, rng, |_, h, z, y| {
                    if integrate(g) {
                        s1 += g.eval(z, y, bound) * h;
                    }
                    if primed && integrate(psi) {
                        s2 += psi.eval(z, y, bound) * h;
                    }
                })?;
                s1 += f.eval(state.0, state.1, bound);
                if primed {
                    let end = walker.advance(state, horizon, lag, rng, |_, h, z, y| {
                        if integrate(psi) {
                            s2 += psi.eval(z, y, bound) * h;
                        }
                    })?;
                    s2 += phi.eval(end.0, end.1, bound);
                }
                Ok(PathSums { first: s1, second: s2, speed: 0.0 })
            };
            let sums = run(&body)?;
            let first: Vec<f64> = sums.iter().map(|s| s.first).collect();
            if !primed {
                let st = SampleStats::of(&first);
                return Ok(finish(st.mean, st.stderr, cfg.paths, None, cfg));
            }
            match spec.second_order {
                SecondOrder::Variance => {
                    let st = SampleStats::of(&first);
                    Ok(finish(st.variance, SampleStats::variance_stderr(&first), cfg.paths, None, cfg))
                }
                SecondOrder::Product => {
                    let prod: Vec<f64> = sums.iter().map(|s| s.first * s.second).collect();
                    let st = SampleStats::of(&prod);
                    Ok(finish(st.mean, st.stderr, cfg.paths, None, cfg))
                }
            }
        }
        Pipeline::EllipticB | Pipeline::EllipticBPrime => {
            let primed = spec.pipeline == Pipeline::EllipticBPrime;
            let (lambda, mu) = (spec.lambda, spec.mu);
            let body = |rng: &mut ChaCha8Rng| -> Result<PathSums> {
                let (mut s1, mut s2, mut speed) = (0.0f64, 0.0f64, cfg.start.1.abs());
                walker.advance(cfg.start, 0.0, cfg.t_max, rng, |t, h, z, y| {
                    speed = speed.max(y.abs());
                    s1 += (-lambda * t).exp() * g.eval(z, y, bound) * h;
                    if primed {
                        s2 += (-mu * t).exp() * psi.eval(z, y, bound) * h;
                    }
                })?;
                Ok(PathSums { first: s1, second: s2, speed })
            };
            let sums = run(&body)?;
            let ymax = sums.iter().fold(0.0f64, |a, s| a.max(s.speed));
            let gn = g.sup_norm(bound, ymax);
            if !primed {
                let first: Vec<f64> = sums.iter().map(|s| s.first).collect();
                let st = SampleStats::of(&first);
                let tail = (-lambda * cfg.t_max).exp() * gn / lambda;
                return Ok(finish(st.mean, st.stderr, cfg.paths, Some(tail), cfg));
            }
            let pn = psi.sup_norm(bound, ymax);
            let tail = gn * pn * ((-lambda * cfg.t_max).exp() + (-mu * cfg.t_max).exp()) / (lambda * mu);
            let prod: Vec<f64> = sums.iter().map(|s| s.first * s.second).collect();
            let st = SampleStats::of(&prod);
            Ok(finish(st.mean, st.stderr, cfg.paths, Some(tail), cfg))
        }
        Pipeline::StationaryC => {
            let window = cfg.horizon - cfg.burn_in;
            if !(window > 0.0) {
                return Err(Error::InvalidParameter("averaging window must be positive (horizon > burn-in)".into()));
            }
            let body = |rng: &mut ChaCha8Rng| -> Result<PathSums> {
                let state = walker.advance(cfg.start, 0.0, cfg.burn_in, rng, |_, _, _, _| {})?;
                let mut s = 0.0;
                walker.advance(state, cfg.burn_in, window, rng, |_, h, z, y| s += f.eval(z, y, bound) * h)?;
                Ok(PathSums { first: s / window, second: 0.0, speed: 0.0 })
            };
            let first: Vec<f64> = run(&body)?.iter().map(|s| s.first).collect();
            let st = SampleStats::of(&first);
            Ok(finish(st.mean, st.stderr, cfg.paths, None, cfg))
        }
        Pipeline::GrowthRateCPrime => growth_rate(&walker, g, cfg),
    }
}

fn growth_rate(walker: &Walker, g: FieldFn, cfg: &McConfig) -> Result<McEstimate> {
    let bound = walker.bound();
    match cfg.block_len {
        None => {
            if !(cfg.horizon > 0.0) {
                return Err(Error::InvalidParameter("growth rate needs a positive horizon".into()));
            }
            let totals = collect(run_paths(cfg.paths, cfg.batch_size, |p| {
                let mut rng = path_rng(cfg.seed, p);
                let mut s = 0.0;
                walker.advance(cfg.start, 0.0, cfg.horizon, &mut rng, |_, h, z, y| s += g.eval(z, y, bound) * h)?;
                Ok(s)
            }))?;
            let st = SampleStats::of(&totals);
            let se = SampleStats::variance_stderr(&totals);
            Ok(finish(st.variance / cfg.horizon, se / cfg.horizon, cfg.paths, None, cfg))
        }
        Some(block) => {
            let window = cfg.horizon - cfg.burn_in;
            let blocks = (window / block + 1e-9).floor() as usize;
            if !(block > 0.0) || blocks < 2 {
                return Err(Error::InvalidParameter(format!(
                    "block length {block} leaves fewer than two blocks in the window {window}"
                )));
            }
            let per_path = collect(run_paths(cfg.paths, cfg.batch_size, |p| {
                let mut rng = path_rng(cfg.seed, p);
                let mut state = walker.advance(cfg.start, 0.0, cfg.burn_in, &mut rng, |_, _, _, _| {})?;
                let mut out = Vec::with_capacity(blocks);
                for b in 0..blocks {
                    let mut s = 0.0;
                    let t0 = cfg.burn_in + b as f64 * block;
                    state = walker.advance(state, t0, block, &mut rng, |_, h, z, y| s += g.eval(z, y, bound) * h)?;
                    out.push(s);
                }
                Ok(out)
            }))?;
            let all: Vec<f64> = per_path.iter().flatten().copied().collect();
            let centre = SampleStats::of(&all).mean;
            let rates: Vec<f64> = per_path
                .iter()
                .map(|bs| bs.iter().map(|b| (b - centre) * (b - centre)).sum::<f64>() / (bs.len() as f64 * block))
                .collect();
            let st = SampleStats::of(&rates);
            Ok(finish(st.mean, st.stderr, cfg.paths, None, cfg))
        }
    }
}

/// `(horizon, estimate, stderr)` of a one-point functional or a variance at
/// several horizons from a single ensemble.
pub fn estimate_trace(spec: &QuantitySpec, params: &OscillatorParams, cfg: &McConfig, horizons: &[f64]) -> Result<Vec<(f64, f64, f64)>> {
    let variance = match (spec.pipeline, spec.second_order) {
        (Pipeline::ParabolicA, _) => false,
        (Pipeline::ParabolicAPrime, SecondOrder::Variance) => true,
        _ => return Err(Error::InvalidQuantity("traces are available for one-point and variance functionals".into())),
    };
    cfg.validate()?;
    if horizons.windows(2).any(|w| w[1] <= w[0]) || horizons.first().is_some_and(|&h| h < 0.0) {
        return Err(Error::InvalidParameter("trace horizons must be increasing and non-negative".into()));
    }
    let walker = Walker::new(params, cfg.dt)?;
    let bound = walker.bound();
    let (f, g) = (spec.terminal_f, spec.running_g);
    let per_path = collect(run_paths(cfg.paths, cfg.batch_size, |p| {
        let mut rng = path_rng(cfg.seed, p);
        let mut state = cfg.start;
        let mut t = 0.0;
        let mut integral = 0.0;
        let mut out = Vec::with_capacity(horizons.len());
        for &h_end in horizons {
            state = walker.advance(state, t, h_end - t, &mut rng, |_, h, z, y| {
                if !g.is_zero() {
                    integral += g.eval(z, y, bound) * h;
                }
            })?;
            t = h_end;
            out.push(integral + f.eval(state.0, state.1, bound));
        }
        Ok(out)
    }))?;
    Ok(horizons
        .iter()
        .enumerate()
        .map(|(k, &h)| {
            let col: Vec<f64> = per_path.iter().map(|v| v[k]).collect();
            let st = SampleStats::of(&col);
            if variance {
                (h, st.variance, SampleStats::variance_stderr(&col))
            } else {
                (h, st.mean, st.stderr)
            }
        })
        .collect())
}
