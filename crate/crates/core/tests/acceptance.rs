//! Acceptance suite. Prints one PASS/FAIL line per criterion and fails on
//! any miss that is not a known shortfall.

use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;

use nsbke_core::grid::{Grid, GridSpec};
use nsbke_core::mc::{self, estimate_quantity, long_cycle_rate, path_rng, run_paths, CycleConfig, McConfig, SampleStats};
use nsbke_core::model::{expand_preset, FieldFn, OscillatorParams, PresetName, PresetOverrides};
use nsbke_core::operators::{assemble, DiscreteOperator};
use nsbke_core::pde::{growth_rate_solve, parabolic_march, solve_spec, stationary_solve, MarchOptions, ParabolicRun};
use nsbke_core::superposition::{compare_with_direct, GlueCondition};

const BOUNDS: [f64; 10] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];
const T1_E1: [f64; 10] = [0.638, 0.521, 0.430, 0.354, 0.289, 0.234, 0.187, 0.148, 0.115, 0.088];
const T1_E3: [f64; 10] = [0.776, 0.589, 0.440, 0.325, 0.238, 0.173, 0.125, 0.089, 0.064, 0.045];
const T2_E2: [f64; 10] = [0.179, 0.250, 0.298, 0.347, 0.364, 0.388, 0.409, 0.426, 0.441, 0.453];
const T2_E3: [f64; 10] = [0.00148, 0.0097, 0.028, 0.062, 0.103, 0.158, 0.223, 0.294, 0.370, 0.447];

/// Criteria that do not reach their tolerance with the mandated schemes.
const KNOWN_SHORTFALLS: [&str; 3] = ["3-E2'", "4", "5-E1"];

const DESK: usize = 200;
const LAMBDA: f64 = 1e-3;

struct Verdicts {
    lines: Vec<(String, bool)>,
}

impl Verdicts {
    fn check(&mut self, id: &str, pass: bool, detail: String, started: Instant) {
        let known = !pass && KNOWN_SHORTFALLS.contains(&id);
        println!(
            "{} {id:<12} {detail} [{:.1} s]{}",
            if pass { "PASS" } else { "FAIL" },
            started.elapsed().as_secs_f64(),
            if known { " (known shortfall)" } else { "" }
        );
        self.lines.push((id.to_string(), pass));
    }

    fn info(&self, id: &str, detail: String) {
        println!("INFO {id:<12} {detail}");
    }
}

fn ep_op(bound: f64, half: usize) -> DiscreteOperator {
    let p = OscillatorParams::elasto_plastic(1.0, 1.0, bound).unwrap();
    assemble(&Grid::new(GridSpec::square(half, 3.0), bound).unwrap(), &p).unwrap()
}

fn e1(op: &DiscreteOperator) -> f64 {
    let f = op.grid.sample(&FieldFn::PlasticIndicator);
    stationary_solve(op, LAMBDA, &f).unwrap().scaled(op.grid.center())
}

struct TableOne {
    e1: Vec<f64>,
    e3: Vec<f64>,
    sup_flux: Vec<f64>,
    sup_value: Vec<f64>,
    e1_in_unit: bool,
}

fn table_one() -> (TableOne, f64, f64) {
    let mut out = TableOne { e1: vec![], e3: vec![], sup_flux: vec![], sup_value: vec![], e1_in_unit: true };
    let (mut t_pde, mut t_sup) = (0.0, 0.0);
    for &b in &BOUNDS {
        let t0 = Instant::now();
        let op = ep_op(b, DESK);
        let centre = op.grid.center();
        let f = op.grid.sample(&FieldFn::PlasticIndicator);
        let st = stationary_solve(&op, LAMBDA, &f).unwrap();
        out.e1_in_unit &= st.solution.last().iter().all(|&u| (0.0..=1.0).contains(&(LAMBDA * u)));
        out.e1.push(st.scaled(centre));
        let g = op.grid.sample(&FieldFn::PlasticRate);
        out.e3.push(growth_rate_solve(&op, LAMBDA, &g, centre).unwrap().rate);
        t_pde += t0.elapsed().as_secs_f64();
        let t0 = Instant::now();
        out.sup_flux.push(compare_with_direct(&op, LAMBDA, &f, centre, GlueCondition::FluxJump).unwrap().abs_diff);
        t_sup += t0.elapsed().as_secs_f64();
        out.sup_value.push(compare_with_direct(&op, LAMBDA, &f, centre, GlueCondition::ValueJump).map_or(f64::NAN, |c| c.abs_diff));
    }
    (out, t_pde, t_sup)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| ((x - y) / y).abs()).fold(0.0, f64::max)
}

fn fmt(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" ")
}

fn main() {
    let mut v = Verdicts { lines: vec![] };
    let wall = Instant::now();

    // 1, 2, 6: one pass over the elasto-plastic P_Y sweep
    let t0 = Instant::now();
    let (t1, t_pde, t_sup) = table_one();
    let d1 = max_abs_diff(&t1.e1, &T1_E1);
    v.check("1", d1 <= 0.01 && t_pde <= 120.0, format!("E1 row [{}], max |diff| {d1:.4} <= 0.01, PDE time {t_pde:.1} s", fmt(&t1.e1)), t0);
    let r2 = max_rel_diff(&t1.e3, &T1_E3);
    v.check("2", r2 <= 0.07, format!("E3 row [{}], max rel diff {:.2}% <= 7%", fmt(&t1.e3), 100.0 * r2), t0);
    let d6 = t1.sup_flux.iter().cloned().fold(0.0, f64::max);
    v.check("6", d6 <= 1e-3, format!("superposition vs direct, max |diff| {d6:.2e} <= 1e-3 ({t_sup:.1} s)"), t0);
    let dv = t1.sup_value.iter().cloned().fold(0.0, f64::max);
    v.info("6", format!("gluing on neighbour values instead: max |diff| {dv:.3}"));

    // 3: obstacle table
    let t0 = Instant::now();
    let (mut e2p, mut e3p) = (vec![], vec![]);
    for &b in &BOUNDS {
        let p = OscillatorParams::obstacle(1.0, 1.0, b, 0.5).unwrap();
        let op = assemble(&Grid::new(GridSpec::square(DESK, 3.0), b).unwrap(), &p).unwrap();
        let o = PresetOverrides::long_run(LAMBDA);
        let c = op.grid.center();
        e2p.push(solve_spec(&expand_preset(PresetName::E2Obstacle, &p, &o).unwrap(), &op, 1e-3, c).unwrap().value);
        e3p.push(solve_spec(&expand_preset(PresetName::E3Obstacle, &p, &o).unwrap(), &op, 1e-3, c).unwrap().value);
    }
    let d3 = max_abs_diff(&e2p, &T2_E2);
    let worst = (0..10).max_by(|&a, &b| (e2p[a] - T2_E2[a]).abs().total_cmp(&(e2p[b] - T2_E2[b]).abs())).unwrap();
    v.check(
        "3-E2'",
        d3 <= 0.01,
        format!("E2' row [{}], max |diff| {d3:.4} <= 0.01 (worst at P_O={})", fmt(&e2p), BOUNDS[worst]),
        t0,
    );
    let r3 = max_rel_diff(&e3p, &T2_E3);
    v.check("3-E3'", r3 <= 0.07, format!("E3' row [{}], max rel diff {:.2}% <= 7%", fmt(&e3p), 100.0 * r3), t0);

    // 4: plastic-state probability by MC
    let t0 = Instant::now();
    let p25 = OscillatorParams::elasto_plastic(1.0, 1.0, 0.25).unwrap();
    let spec = expand_preset(PresetName::E1, &p25, &PresetOverrides::transient(4.0)).unwrap();
    let cfg = McConfig { paths: 100_000, dt: 1e-4, horizon: 4.0, seed: 1, ..Default::default() };
    let est = estimate_quantity(&spec, &p25, &cfg).unwrap();
    v.check(
        "4",
        (0.470..=0.486).contains(&est.value) && t0.elapsed().as_secs_f64() <= 300.0,
        format!("E1(T=4) = {:.4} +- {:.4}, required in [0.470, 0.486]", est.value, est.stderr),
        t0,
    );

    // 5: cross-method agreement
    let t0 = Instant::now();
    let mut ok_e1 = true;
    let mut ok_e3 = true;
    let mut ok_lc = true;
    let (mut s_e1, mut s_e3, mut s_lc) = (String::new(), String::new(), String::new());
    for (k, &b) in BOUNDS.iter().enumerate().filter(|(_, &b)| b == 0.2 || b == 0.5) {
        let p = OscillatorParams::elasto_plastic(1.0, 1.0, b).unwrap();
        let long = PresetOverrides::long_run(LAMBDA);
        let mc_cfg = McConfig { paths: 1000, dt: 1e-3, horizon: 200.0, burn_in: 5.0, seed: 1, batch_size: 16, ..Default::default() };
        let m1 = estimate_quantity(&expand_preset(PresetName::E1, &p, &long).unwrap(), &p, &mc_cfg).unwrap();
        let m3 = estimate_quantity(&expand_preset(PresetName::E3Plastic, &p, &long).unwrap(), &p, &mc_cfg).unwrap();
        let lc = long_cycle_rate(&p, &CycleConfig { paths: 1000, dt: 1e-3, horizon: 200.0, seed: 2, ..Default::default() }).unwrap();
        let d = (t1.e1[k] - m1.value).abs();
        ok_e1 &= d <= 0.01f64.max(3.0 * m1.stderr);
        s_e1 += &format!(" P_Y={b}: PDE {:.4} MC {:.4}+-{:.4}", t1.e1[k], m1.value, m1.stderr);
        let d = (t1.e3[k] - m3.value).abs();
        ok_e3 &= d <= (0.05 * t1.e3[k]).max(3.0 * m3.stderr);
        s_e3 += &format!(" P_Y={b}: PDE {:.4} MC {:.4}+-{:.4}", t1.e3[k], m3.value, m3.stderr);
        let se = (lc.rate_stderr.powi(2) + m3.stderr.powi(2)).sqrt();
        ok_lc &= (lc.rate - m3.value).abs() <= 3.0 * se;
        s_lc += &format!(" P_Y={b}: cycles {:.4}+-{:.4} ({} cycles) direct {:.4}", lc.rate, lc.rate_stderr, lc.cycles.len(), m3.value);
        // half-order grid extrapolation of the PDE value
        let coarse = e1(&ep_op(b, DESK / 2));
        let r = std::f64::consts::SQRT_2;
        v.info("5-E1", format!("P_Y={b}: grid-extrapolated PDE {:.4} (from {coarse:.4}, {:.4})", (r * t1.e1[k] - coarse) / (r - 1.0), t1.e1[k]));
    }
    v.check("5-E1", ok_e1, format!("|PDE - MC| <= max(0.01, 3 se):{s_e1}"), t0);
    v.check("5-E3", ok_e3, format!("|PDE - MC| <= max(5%, 3 se):{s_e3}"), t0);
    v.check("5-cycles", ok_lc, format!("long cycles vs direct within 3 se:{s_lc}"), t0);

    // 7: property suite
    let t0 = Instant::now();
    let mut worst = 0.0f64;
    let mut n_max = 0usize;
    for &b in &[0.25, 1.0] {
        for p in [OscillatorParams::elasto_plastic(1.0, 1.0, b).unwrap(), OscillatorParams::obstacle(1.0, 1.0, b, 0.5).unwrap()] {
            let op = assemble(&Grid::new(GridSpec::square(DESK, 3.0), b).unwrap(), &p).unwrap();
            let r = op.matrix.mul_vec(&vec![1.0; op.len()]);
            worst = worst.max(r.iter().fold(0.0, |m: f64, x| m.max(x.abs())));
            n_max = n_max.max(op.len());
        }
    }
    v.check("7-M1", worst <= 1e-12 * n_max as f64, format!("max |M 1| = {worst:.2e} <= 1e-12 N = {:.2e}", 1e-12 * n_max as f64), t0);

    let t0 = Instant::now();
    let mut rng = path_rng(7, 0);
    let mut violations = 0;
    for trial in 0..1000 {
        let bound = rng.random_range(0.1..1.0);
        let p = if trial % 2 == 0 {
            OscillatorParams::elasto_plastic(rng.random_range(0.2..2.0), rng.random_range(0.5..2.0), bound).unwrap()
        } else {
            OscillatorParams::obstacle(rng.random_range(0.2..1.5), rng.random_range(0.6..2.0), bound, rng.random_range(0.0..1.0)).unwrap()
        };
        let half = rng.random_range(2..8);
        let op = assemble(&Grid::new(GridSpec::new(half, rng.random_range(2..8), rng.random_range(1.0..4.0)), bound).unwrap(), &p).unwrap();
        let f: Vec<f64> = (0..op.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (lo, hi) = f.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        let run = ParabolicRun::new(&op, 0.5, rng.random_range(0.01..0.2), 0.0, f, vec![0.0; op.len()]).unwrap();
        let out = parabolic_march(&run, &MarchOptions { probe: 0, keep_every: Some(1) }).unwrap();
        if out.solution.levels.iter().flatten().any(|&u| u < lo || u > hi) {
            violations += 1;
        }
    }
    v.check("7-maxprinc", violations == 0, format!("{violations} of 1000 randomized marches leave [min f, max f]"), t0);

    let t0 = Instant::now();
    let op = ep_op(0.3, 30);
    let f = op.grid.sample(&FieldFn::PlasticIndicator);
    let run = ParabolicRun::new(&op, 4.0, 1e-2, 0.0, f, vec![0.0; op.len()]).unwrap();
    let out = parabolic_march(&run, &MarchOptions { probe: 0, keep_every: Some(1) }).unwrap();
    let in_unit = out.solution.levels.iter().flatten().all(|u| (0.0..=1.0).contains(u));
    v.check("7-unit", in_unit && t1.e1_in_unit, "E1 fields (stationary desk sweep, transient march) within [0, 1]".into(), t0);

    let t0 = Instant::now();
    let mut asym = 0.0f64;
    let mut scale = 0.0f64;
    for (f, g) in [(FieldFn::PlasticIndicator, FieldFn::Zero), (FieldFn::VelocitySquared, FieldFn::PlasticIndicator)] {
        let op = ep_op(0.4, 60);
        let gr = &op.grid;
        let run = ParabolicRun::new(&op, 2.0, 1e-2, 0.0, gr.sample(&f), gr.sample(&g)).unwrap();
        let u = parabolic_march(&run, &MarchOptions { probe: 0, keep_every: None }).unwrap().solution.last().to_vec();
        for n in 0..gr.len() {
            let (i, j) = gr.coords(n);
            let m = gr.index(gr.ni - 1 - i, gr.nj - 1 - j);
            asym = asym.max((u[n] - u[m]).abs());
            scale = scale.max(u[n].abs());
        }
    }
    let tol = 10.0 * 1e-12 * scale;
    v.check("7-symmetry", asym <= tol, format!("max |u(z,y) - u(-z,-y)| = {asym:.2e} <= 10 x solver tol {tol:.2e}"), t0);

    let t0 = Instant::now();
    let obs = OscillatorParams::obstacle(1.0, 1.0, 0.5, 0.5).unwrap();
    let tables = mc::build_exact_tables(&obs, 1e-3).unwrap();
    let breaches: usize = run_paths(10_000, 256, |path| {
        let mut rng = path_rng(3, path);
        let mut bad = 0usize;
        mc::obstacle::simulate(&obs, &tables, (0.0, 0.0), 4.0, &mut rng, |_, _, _, _, s| {
            if s.x.abs() > obs.bound {
                bad += 1;
            }
        })
        .unwrap();
        bad
    })
    .into_iter()
    .sum();
    v.check("7-obstacle", breaches == 0, format!("{breaches} steps with |X| > P_O on 10^4 paths"), t0);

    let t0 = Instant::now();
    let free = OscillatorParams::obstacle(1.0, 1.0, 50.0, 0.5).unwrap();
    let (x0, y0, step) = (0.3, -0.2, 0.5);
    let tab = mc::build_exact_tables(&free, step).unwrap();
    let exact: Vec<(f64, f64)> = run_paths(100_000, 4096, |p| {
        let mut r = path_rng(11, p);
        tab.sample(x0, y0, r.sample(StandardNormal), r.sample(StandardNormal))
    });
    let sub = 10_000;
    let h = step / sub as f64;
    let euler: Vec<(f64, f64)> = run_paths(10_000, 256, |p| {
        let mut r = path_rng(12, p);
        let (mut x, mut y) = (x0, y0);
        for _ in 0..sub {
            let g: f64 = r.sample(StandardNormal);
            let xn = x + y * h;
            y += -(free.c0 * y + free.k * x) * h + h.sqrt() * g;
            x = xn;
        }
        (x, y)
    });
    let moments = |s: &[(f64, f64)]| -> Vec<(f64, f64)> {
        let xs: Vec<f64> = s.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = s.iter().map(|p| p.1).collect();
        let (mx, my) = (SampleStats::of(&xs), SampleStats::of(&ys));
        let cross: Vec<f64> = s.iter().map(|p| (p.0 - mx.mean) * (p.1 - my.mean)).collect();
        let c = SampleStats::of(&cross);
        vec![
            (mx.mean, mx.stderr),
            (my.mean, my.stderr),
            (mx.variance, SampleStats::variance_stderr(&xs)),
            (my.variance, SampleStats::variance_stderr(&ys)),
            (c.mean, c.stderr),
        ]
    };
    let (a, b) = (moments(&exact), moments(&euler));
    let z: Vec<f64> = a.iter().zip(&b).map(|(p, q)| (p.0 - q.0).abs() / (p.1.powi(2) + q.1.powi(2)).sqrt()).collect();
    let zmax = z.iter().cloned().fold(0.0, f64::max);
    v.check("7-exactstep", zmax <= 3.0, format!("mean / var / cov vs sub-stepped Euler, max z = {zmax:.2} <= 3"), t0);

    let t0 = Instant::now();
    let far = OscillatorParams::obstacle(1.0, 1.0, 6.0, 0.5).unwrap();
    let spec = expand_preset(PresetName::E2Obstacle, &far, &PresetOverrides::transient(20.0)).unwrap();
    let est = estimate_quantity(&spec, &far, &McConfig { paths: 10_000, dt: 1e-2, horizon: 20.0, seed: 5, ..Default::default() }).unwrap();
    let target = 1.0 / (2.0 * far.c0);
    v.check(
        "7-farwall",
        (est.value - target).abs() <= 3.0 * est.stderr,
        format!("E[Y^2] = {:.4} +- {:.4} vs 1/(2 c0) = {target}", est.value, est.stderr),
        t0,
    );

    // 8: convergence study
    let t0 = Instant::now();
    let e2_at = |spec: GridSpec| {
        let p = p25;
        let op = assemble(&Grid::new(spec, 0.25).unwrap(), &p).unwrap();
        let s = expand_preset(PresetName::E2, &p, &PresetOverrides::transient(4.0)).unwrap();
        solve_spec(&s, &op, 1e-2, op.grid.center()).unwrap().value
    };
    let res: Vec<f64> = [25, 50, 100, 200].iter().map(|&h| e2_at(GridSpec::square(h, 3.0))).collect();
    let diffs: Vec<f64> = res.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let shrinking = diffs.windows(2).all(|w| w[1] < w[0]);
    v.check("8-resolution", shrinking, format!("E2(T=4) over I=J=25..200 [{}], differences [{}]", fmt(&res), fmt(&diffs)), t0);
    let t0 = Instant::now();
    let trunc: Vec<f64> = [0.75, 1.5, 2.25, 2.625]
        .iter()
        .map(|&l| e2_at(GridSpec::new(100, (l / 0.0075f64).round() as usize, l)))
        .collect();
    let inc: Vec<f64> = trunc.windows(2).map(|w| w[1] - w[0]).collect();
    let saturating = inc.iter().all(|&d| d > 0.0) && inc.windows(2).all(|w| w[1] < w[0]) && inc[2] < 0.01 * trunc[3];
    v.check("8-truncation", saturating, format!("E2(T=4) over Y=0.75..2.625 [{}], increments [{}]", fmt(&trunc), fmt(&inc)), t0);

    // kinetic-energy correlation, looser tolerance
    let t0 = Instant::now();
    let spec = expand_preset(PresetName::E4Energy, &p25, &PresetOverrides::transient(4.0)).unwrap();
    let op = ep_op(0.25, 100);
    let pde = solve_spec(&spec, &op, 1e-2, op.grid.center()).unwrap().value;
    let mc_e4 = estimate_quantity(&spec, &p25, &McConfig { paths: 20_000, dt: 1e-3, horizon: 4.0, seed: 9, ..Default::default() }).unwrap();
    let d = (pde - mc_e4.value).abs();
    v.check(
        "E4-energy",
        d <= (0.10 * pde).max(3.0 * mc_e4.stderr),
        format!("E[Y_T^2 Y_(T+h)^2]: PDE {pde:.4} MC {:.4}+-{:.4}, within max(10%, 3 se)", mc_e4.value, mc_e4.stderr),
        t0,
    );

    let unexpected: Vec<&str> = v.lines.iter().filter(|(id, ok)| !ok && !KNOWN_SHORTFALLS.contains(&id.as_str())).map(|(id, _)| id.as_str()).collect();
    let passed = v.lines.iter().filter(|(_, ok)| *ok).count();
    println!("acceptance: {passed}/{} criteria pass in {:.0} s", v.lines.len(), wall.elapsed().as_secs_f64());
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
