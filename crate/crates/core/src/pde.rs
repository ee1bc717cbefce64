//! Solve pipelines on an assembled operator: implicit parabolic marching,
//! the coupled `w`-chain for second-order functionals, and the discounted /
//! small-discount stationary systems.
//!
//! Parabolic levels are indexed by time-to-go: level `n` holds the value of
//! the functional with horizon `n dt`, so a single march yields the whole
//! trace in `T`.

use std::io::Write;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::model::{Pipeline, QuantitySpec, SecondOrder};
use crate::operators::DiscreteOperator;
use crate::sparse::LuFactor;

/// Grid-shaped fields at a few stored time levels.
#[derive(Debug, Clone)]
pub struct FieldSolution {
    pub grid: Grid,
    /// Time step; zero for stationary fields.
    pub dt: f64,
    pub level_index: Vec<usize>,
    pub levels: Vec<Vec<f64>>,
}

impl FieldSolution {
    pub fn single(grid: &Grid, field: Vec<f64>) -> Self {
        Self { grid: grid.clone(), dt: 0.0, level_index: vec![0], levels: vec![field] }
    }

    pub fn last(&self) -> &[f64] {
        self.levels.last().expect("at least one level")
    }

    pub fn value(&self, node: usize) -> f64 {
        self.last()[node]
    }

    pub fn level_count(&self) -> usize {
        self.levels.len()
    }
}

/// Number of implicit steps covering `horizon`; the step is shortened so the
/// last level lands on the horizon exactly.
pub fn step_count(horizon: f64, dt: f64) -> Result<(usize, f64)> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
    }
    if horizon == 0.0 {
        return Ok((0, dt));
    }
    let n = (horizon / dt - 1e-9).ceil().max(1.0) as usize;
    Ok((n, horizon / n as f64))
}

fn check_finite(field: &[f64], level: usize) -> Result<()> {
    match field.iter().position(|v| !v.is_finite()) {
        Some(node) => Err(Error::NonFinite { level, node }),
        None => Ok(()),
    }
}

fn solve_level(lu: &LuFactor, rhs: &mut [f64], level: usize) -> Result<()> {
    match lu.solve_in_place(rhs) {
        Err(Error::NonFinite { node, .. }) => Err(Error::NonFinite { level, node }),
        other => other,
    }
}

/// One implicit step `((1 + dt rate) I + dt M) x' = x + dt s` with the
/// constraint rows solved homogeneously.
struct Stepper<'a> {
    op: &'a DiscreteOperator,
    lu: LuFactor,
    dt: f64,
}

impl<'a> Stepper<'a> {
    fn new(op: &'a DiscreteOperator, dt: f64, rate: f64) -> Result<Self> {
        let lu = op.system_matrix(1.0 + dt * rate, dt).factorize()?;
        Ok(Self { op, lu, dt })
    }

    fn step(&self, x: &mut [f64], source: Option<&[f64]>, level: usize) -> Result<()> {
        if let Some(s) = source {
            for (xv, sv) in x.iter_mut().zip(s) {
                *xv += self.dt * sv;
            }
        }
        self.op.constrain_rhs(x);
        solve_level(&self.lu, x, level)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MarchOptions {
    /// Node whose value is traced at every level.
    pub probe: usize,
    /// Keep every `k`-th level in the returned solution (the last level is
    /// always kept).
    pub keep_every: Option<usize>,
}

/// Setup for `(I + dt (M + lambda I)) u^{n+1} = u^n + dt g`, `u^0 = f`.
#[derive(Debug, Clone)]
pub struct ParabolicRun<'a> {
    pub operator: &'a DiscreteOperator,
    pub dt: f64,
    pub steps: usize,
    pub lambda: f64,
    pub terminal: Vec<f64>,
    pub source: Vec<f64>,
}

impl<'a> ParabolicRun<'a> {
    pub fn new(operator: &'a DiscreteOperator, horizon: f64, dt: f64, lambda: f64, terminal: Vec<f64>, source: Vec<f64>) -> Result<Self> {
        let (steps, dt) = step_count(horizon, dt)?;
        let n = operator.len();
        if terminal.len() != n || source.len() != n {
            return Err(Error::InvalidGrid("data length does not match the grid".into()));
        }
        Ok(Self { operator, dt, steps, lambda, terminal, source })
    }
}

#[derive(Debug, Clone)]
pub struct MarchOutput {
    pub solution: FieldSolution,
    /// `(horizon, value at probe)` per level, starting with level 0.
    pub trace: Vec<(f64, f64)>,
}

pub fn parabolic_march(run: &ParabolicRun<'_>, opts: &MarchOptions) -> Result<MarchOutput> {
    let grid = &run.operator.grid;
    check_finite(&run.terminal, 0)?;
    let stepper = Stepper::new(run.operator, run.dt, run.lambda)?;
    let has_source = run.source.iter().any(|&v| v != 0.0);
    let mut u = run.terminal.clone();
    let mut trace = Vec::with_capacity(run.steps + 1);
    trace.push((0.0, u[opts.probe]));
    let mut solution = FieldSolution { grid: grid.clone(), dt: run.dt, level_index: vec![], levels: vec![] };
    let keep = |n: usize| opts.keep_every.is_some_and(|k| k > 0 && n % k == 0);
    if keep(0) {
        solution.level_index.push(0);
        solution.levels.push(u.clone());
    }
    for n in 1..=run.steps {
        stepper.step(&mut u, has_source.then_some(run.source.as_slice()), n)?;
        trace.push((n as f64 * run.dt, u[opts.probe]));
        if keep(n) && n != run.steps {
            solution.level_index.push(n);
            solution.levels.push(u.clone());
        }
    }
    solution.level_index.push(run.steps);
    solution.levels.push(u);
    Ok(MarchOutput { solution, trace })
}

/// Centred `y`-difference, one-sided on the rows `j = 1` and `j = J`.
pub fn velocity_derivative(grid: &Grid, u: &[f64]) -> Vec<f64> {
    let mut d = vec![0.0; grid.len()];
    let (ni, nj) = (grid.ni, grid.nj);
    let inv2 = 0.5 / grid.dy;
    let inv = 1.0 / grid.dy;
    for j in 0..nj {
        for i in 0..ni {
            let n = j * ni + i;
            d[n] = if j == 0 {
                (u[n + ni] - u[n]) * inv
            } else if j == nj - 1 {
                (u[n] - u[n - ni]) * inv
            } else {
                (u[n + ni] - u[n - ni]) * inv2
            };
        }
    }
    d
}

fn derivative_product(grid: &Grid, u: &[f64], v: &[f64]) -> Vec<f64> {
    let du = velocity_derivative(grid, u);
    if std::ptr::eq(u, v) {
        return du.iter().map(|d| d * d).collect();
    }
    let dv = velocity_derivative(grid, v);
    du.iter().zip(&dv).map(|(a, b)| a * b).collect()
}

/// Second-order functional `E[(f(X_T) + int g)(phi(X_{T+h}) + int psi)]`
/// through the fused march of `u`, `v` and `w`.
#[derive(Debug, Clone)]
pub struct CorrelationRun<'a> {
    pub operator: &'a DiscreteOperator,
    pub dt: f64,
    pub steps: usize,
    pub lag_steps: usize,
    pub lambda: f64,
    pub mu: f64,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    /// `v = u`, `h = 0`: only two fields are marched.
    pub variance: bool,
}

impl<'a> CorrelationRun<'a> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        operator: &'a DiscreteOperator,
        horizon: f64,
        lag: f64,
        dt: f64,
        lambda: f64,
        mu: f64,
        first: (Vec<f64>, Vec<f64>),
        second: Option<(Vec<f64>, Vec<f64>)>,
    ) -> Result<Self> {
        let (steps, dt_eff) = step_count(horizon, dt)?;
        let lag_steps = if lag == 0.0 { 0 } else { (lag / dt_eff).round() as usize };
        if (lag_steps as f64 * dt_eff - lag).abs() > 1e-9 * lag.max(1.0) {
            return Err(Error::LevelMisalignment(format!(
                "lag {lag} is not a multiple of the time step {dt_eff}"
            )));
        }
        let variance = second.is_none();
        if variance && (lag != 0.0 || lambda != mu) {
            return Err(Error::LevelMisalignment("variance march needs h = 0 and lambda = mu".into()));
        }
        let (f, g) = first;
        let (phi, psi) = second.unwrap_or_else(|| (f.clone(), g.clone()));
        Ok(Self { operator, dt: dt_eff, steps, lag_steps, lambda, mu, f, g, phi, psi, variance })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationSample {
    pub horizon: f64,
    pub u: f64,
    pub v: f64,
    pub w: f64,
}

impl CorrelationSample {
    /// `u v + w`.
    pub fn product(&self) -> f64 {
        self.u * self.v + self.w
    }
}

#[derive(Debug, Clone)]
pub struct CorrelationOutput {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    pub trace: Vec<CorrelationSample>,
}

impl CorrelationOutput {
    pub fn last(&self) -> CorrelationSample {
        *self.trace.last().expect("trace has level 0")
    }
}

/// Marches `v` over the lag first, then advances `u`, `v`, `w` in
/// lockstep so that `w` sees `(D_y u^n)(D_y v^{n + N_h})` at every step.
pub fn correlation_march(run: &CorrelationRun<'_>, probe: usize) -> Result<CorrelationOutput> {
    let op = run.operator;
    let grid = &op.grid;
    let u_step = Stepper::new(op, run.dt, run.lambda)?;
    let v_step = if run.variance || run.mu == run.lambda { None } else { Some(Stepper::new(op, run.dt, run.mu)?) };
    let w_step = if run.lambda + run.mu == run.lambda {
        None
    } else {
        Some(Stepper::new(op, run.dt, run.lambda + run.mu)?)
    };
    let v_stepper = v_step.as_ref().unwrap_or(&u_step);
    let w_stepper = w_step.as_ref().unwrap_or(&u_step);
    let src = |s: &[f64]| s.iter().any(|&x| x != 0.0);
    let (g_on, psi_on) = (src(&run.g), src(&run.psi));

    let mut u = run.f.clone();
    let mut v = run.phi.clone();
    let mut w = vec![0.0; grid.len()];
    check_finite(&u, 0)?;
    check_finite(&v, 0)?;
    if !run.variance {
        for n in 1..=run.lag_steps {
            v_stepper.step(&mut v, psi_on.then_some(run.psi.as_slice()), n)?;
        }
    }
    let sample = |n: usize, u: &[f64], v: &[f64], w: &[f64]| CorrelationSample {
        horizon: n as f64 * run.dt,
        u: u[probe],
        v: if run.variance { u[probe] } else { v[probe] },
        w: w[probe],
    };
    let mut trace = Vec::with_capacity(run.steps + 1);
    trace.push(sample(0, &u, &v, &w));
    for n in 1..=run.steps {
        let s = if run.variance { derivative_product(grid, &u, &u) } else { derivative_product(grid, &u, &v) };
        w_stepper.step(&mut w, Some(&s), n)?;
        u_step.step(&mut u, g_on.then_some(run.g.as_slice()), n)?;
        if !run.variance {
            v_stepper.step(&mut v, psi_on.then_some(run.psi.as_slice()), n + run.lag_steps)?;
        }
        trace.push(sample(n, &u, &v, &w));
    }
    let v = if run.variance { u.clone() } else { v };
    Ok(CorrelationOutput { u, v, w, trace })
}

/// Solution of `(lambda I + M) u = data` with the scaled estimate
/// `lambda u`.
#[derive(Debug, Clone)]
pub struct StationaryOutput {
    pub lambda: f64,
    pub solution: FieldSolution,
    /// `max - min` of `lambda u` over the stencil nodes.
    pub spread: f64,
}

impl StationaryOutput {
    pub fn scaled(&self, node: usize) -> f64 {
        self.lambda * self.solution.value(node)
    }
}

fn discounted_solve(op: &DiscreteOperator, rate: f64, data: &[f64]) -> Result<Vec<f64>> {
    if !(rate > 0.0) {
        return Err(Error::InvalidParameter(format!("discount rate must be positive, got {rate}")));
    }
    let lu = op.system_matrix(rate, 1.0).factorize()?;
    let mut rhs = data.to_vec();
    op.constrain_rhs(&mut rhs);
    solve_level(&lu, &mut rhs, 0)?;
    Ok(rhs)
}

pub fn stationary_solve(op: &DiscreteOperator, lambda: f64, data: &[f64]) -> Result<StationaryOutput> {
    let u = discounted_solve(op, lambda, data)?;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (n, &v) in u.iter().enumerate() {
        if !op.is_constraint(n) {
            lo = lo.min(lambda * v);
            hi = hi.max(lambda * v);
        }
    }
    Ok(StationaryOutput { lambda, solution: FieldSolution::single(&op.grid, u), spread: hi - lo })
}

#[derive(Debug, Clone)]
pub struct GrowthRateOutput {
    pub rate: f64,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
}

/// Long-run variance growth `lim Var(int_0^T g)/T` as `2 lambda w` with
/// `(lambda + M) u = g` and `(2 lambda + M) w = (D_y u)^2`.
pub fn growth_rate_solve(op: &DiscreteOperator, lambda: f64, g: &[f64], probe: usize) -> Result<GrowthRateOutput> {
    let u = discounted_solve(op, lambda, g)?;
    let src = derivative_product(&op.grid, &u, &u);
    let w = discounted_solve(op, 2.0 * lambda, &src)?;
    Ok(GrowthRateOutput { rate: 2.0 * lambda * w[probe], u, w })
}

#[derive(Debug, Clone)]
pub struct EllipticOutput {
    pub b: Vec<f64>,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    pub b_prime: Vec<f64>,
}

/// Discounted functionals `u_lambda`, `v_mu` and `B' = u v + w_{lambda+mu}`.
pub fn elliptic_b_solve(op: &DiscreteOperator, lambda: f64, mu: f64, g: &[f64], psi: &[f64]) -> Result<EllipticOutput> {
    let u = discounted_solve(op, lambda, g)?;
    let v = if mu == lambda && g == psi { u.clone() } else { discounted_solve(op, mu, psi)? };
    let src = derivative_product(&op.grid, &u, &v);
    let w = discounted_solve(op, lambda + mu, &src)?;
    let b_prime = u.iter().zip(&v).zip(&w).map(|((a, b), c)| a * b + c).collect();
    Ok(EllipticOutput { b: u, v, w, b_prime })
}

/// Text grid dump: a header with `I J Y dz dy`, then one row of `I` values
/// per velocity level, bottom row first.
pub fn write_field<W: Write>(mut out: W, grid: &Grid, field: &[f64]) -> std::io::Result<()> {
    writeln!(out, "# I={} J={} Y={:.16e} dz={:.16e} dy={:.16e}", grid.ni, grid.nj, grid.spec.truncation, grid.dz, grid.dy)?;
    for j in 0..grid.nj {
        let row = &field[j * grid.ni..(j + 1) * grid.ni];
        let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

/// `time,value` CSV of a scalar trace.
pub fn write_trace<W: Write>(mut out: W, trace: &[(f64, f64)]) -> std::io::Result<()> {
    writeln!(out, "time,value")?;
    for (t, v) in trace {
        writeln!(out, "{t:.16e},{v:.16e}")?;
    }
    Ok(())
}

/// Value of a quantity at one node, with the horizon trace for the
/// parabolic pipelines.
#[derive(Debug, Clone)]
pub struct SpecValue {
    pub value: f64,
    pub trace: Vec<(f64, f64)>,
}

/// Routes a spec to its pipeline and reads the result at `probe`.
pub fn solve_spec(spec: &QuantitySpec, op: &DiscreteOperator, dt: f64, probe: usize) -> Result<SpecValue> {
    spec.validate()?;
    if probe >= op.len() {
        return Err(Error::InvalidGrid(format!("probe {probe} outside a grid of {} nodes", op.len())));
    }
    let grid = &op.grid;
    let sample = |f: &crate::model::FieldFn| grid.sample(f);
    let single = |value: f64| SpecValue { value, trace: vec![] };
    match spec.pipeline {
        Pipeline::ParabolicA => {
            let run = ParabolicRun::new(op, spec.horizon, dt, spec.lambda, sample(&spec.terminal_f), sample(&spec.running_g))?;
            let out = parabolic_march(&run, &MarchOptions { probe, keep_every: None })?;
            Ok(SpecValue { value: out.solution.value(probe), trace: out.trace })
        }
        Pipeline::ParabolicAPrime => {
            let first = (sample(&spec.terminal_f), sample(&spec.running_g));
            let second = match spec.second_order {
                SecondOrder::Variance => None,
                SecondOrder::Product => Some((sample(&spec.terminal_phi), sample(&spec.running_psi))),
            };
            let run = CorrelationRun::new(op, spec.horizon, spec.lag, dt, spec.lambda, spec.mu, first, second)?;
            let out = correlation_march(&run, probe)?;
            let pick = |s: &CorrelationSample| match spec.second_order {
                SecondOrder::Variance => s.w,
                SecondOrder::Product => s.product(),
            };
            let trace = out.trace.iter().map(|s| (s.horizon, pick(s))).collect();
            Ok(SpecValue { value: pick(&out.last()), trace })
        }
        Pipeline::EllipticB => Ok(single(stationary_solve(op, spec.lambda, &sample(&spec.running_g))?.solution.value(probe))),
        Pipeline::EllipticBPrime => {
            let out = elliptic_b_solve(op, spec.lambda, spec.mu, &sample(&spec.running_g), &sample(&spec.running_psi))?;
            Ok(single(out.b_prime[probe]))
        }
        Pipeline::StationaryC => Ok(single(stationary_solve(op, spec.lambda, &sample(&spec.terminal_f))?.scaled(probe))),
        Pipeline::GrowthRateCPrime => Ok(single(growth_rate_solve(op, spec.lambda, &sample(&spec.running_g), probe)?.rate)),
    }
}
