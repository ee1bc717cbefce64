//! Exact-Gaussian stepping for the obstacle oscillator with impacts.
//!
//! A step proposes the free transition; if the proposal lands beyond a
//! wall the step is cut at the linear-interpolated crossing, the position is
//! set on the wall and the velocity reversed and scaled by `-e`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::mc::exact::{build_exact_tables, ExactStepTables};
use crate::model::OscillatorParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstacleStep {
    pub x: f64,
    pub y: f64,
    /// Fraction of the nominal step actually taken.
    pub theta: f64,
    /// `Y_after - Y_before` at an impact.
    pub impulse: Option<f64>,
}

#[inline]
pub fn step_obstacle(params: &OscillatorParams, tables: &ExactStepTables, x: f64, y: f64, g1: f64, g2: f64) -> ObstacleStep {
    let (xp, yp) = tables.sample(x, y, g1, g2);
    let wall = if xp > params.bound {
        params.bound
    } else if xp < -params.bound {
        -params.bound
    } else {
        return ObstacleStep { x: xp, y: yp, theta: 1.0, impulse: None };
    };
    let theta = ((wall - x) / (xp - x)).clamp(0.0, 1.0);
    let before = (1.0 - theta) * y + theta * yp;
    let after = -params.restitution * before;
    ObstacleStep { x: wall, y: after, theta, impulse: Some(after - before) }
}

/// Simulates one path on `[0, horizon]`, calling `visit(t, h, x, y, step)`
/// for every step, where `h` is the time actually elapsed. The last step is
/// shortened so the path ends at `horizon` exactly.
pub fn simulate<R: Rng>(
    params: &OscillatorParams,
    tables: &ExactStepTables,
    start: (f64, f64),
    horizon: f64,
    rng: &mut R,
    mut visit: impl FnMut(f64, f64, f64, f64, &ObstacleStep),
) -> Result<(f64, f64)> {
    let (mut x, mut y) = (start.0.clamp(-params.bound, params.bound), start.1);
    let mut t = 0.0;
    let tol = 1e-12 * horizon.max(1.0);
    let mut tail: Option<ExactStepTables> = None;
    while horizon - t > tol {
        let left = horizon - t;
        let tab = if left >= tables.dt - tol {
            tables
        } else {
            if tail.map_or(true, |tt| tt.dt != left) {
                tail = Some(build_exact_tables(params, left)?);
            }
            tail.as_ref().unwrap()
        };
        let g1: f64 = rng.sample(StandardNormal);
        let g2: f64 = rng.sample(StandardNormal);
        let s = step_obstacle(params, tab, x, y, g1, g2);
        let h = if s.impulse.is_some() { s.theta * tab.dt } else { tab.dt };
        visit(t, h, x, y, &s);
        x = s.x;
        y = s.y;
        t += h;
    }
    Ok((x, y))
}
