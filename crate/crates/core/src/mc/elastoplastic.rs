//! Projected Euler scheme for the elasto-plastic variational inequality.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::model::OscillatorParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpStep {
    pub z: f64,
    pub y: f64,
    /// Plastic increment removed by the projection.
    pub plastic: f64,
}

/// `Y' = Y - (c0 Y + k Z) dt + sqrt(dt) G`, `Z' = clamp(Z + Y dt)`.
#[inline]
pub fn step_elastoplastic(params: &OscillatorParams, z: f64, y: f64, dt: f64, sqrt_dt: f64, noise: f64) -> EpStep {
    let y_next = y - (params.c0 * y + params.k * z) * dt + sqrt_dt * noise;
    let free = z + y * dt;
    let z_next = free.clamp(-params.bound, params.bound);
    EpStep { z: z_next, y: y_next, plastic: free - z_next }
}

/// Simulates one path of `steps` steps of length `dt`, calling
/// `visit(n, z_n, y_n, step_n)` for each step `n -> n + 1`.
pub fn simulate<R: Rng>(
    params: &OscillatorParams,
    start: (f64, f64),
    dt: f64,
    steps: usize,
    rng: &mut R,
    mut visit: impl FnMut(usize, f64, f64, &EpStep),
) -> (f64, f64) {
    let sqrt_dt = dt.sqrt();
    let (mut z, mut y) = (start.0.clamp(-params.bound, params.bound), start.1);
    for n in 0..steps {
        let g: f64 = rng.sample(StandardNormal);
        let s = step_elastoplastic(params, z, y, dt, sqrt_dt, g);
        visit(n, z, y, &s);
        z = s.z;
        y = s.y;
    }
    (z, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::path_rng;

    fn params() -> OscillatorParams {
        OscillatorParams::elasto_plastic(1.0, 1.0, 0.25).unwrap()
    }

    #[test]
    fn plastic_flow_on_the_bound() {
        let s = step_elastoplastic(&params(), 0.25, 0.5, 1e-2, 0.1, 0.0);
        assert_eq!(s.z, 0.25);
        assert!((s.plastic - 0.5e-2).abs() < 1e-15);
        assert!(s.plastic > 0.0);
    }

    #[test]
    fn interior_step_is_plain_euler() {
        let p = params();
        let (z, y, dt) = (0.1, -0.3, 1e-3);
        let s = step_elastoplastic(&p, z, y, dt, dt.sqrt(), 0.7);
        assert_eq!(s.z, z + y * dt);
        assert_eq!(s.y, y - (p.c0 * y + p.k * z) * dt + dt.sqrt() * 0.7);
        assert_eq!(s.plastic, 0.0);
    }

    #[test]
    fn paths_respect_the_bound() {
        let p = params();
        let mut rng = path_rng(3, 0);
        simulate(&p, (0.0, 0.0), 1e-2, 20_000, &mut rng, |_, z, _, s| {
            assert!(z.abs() <= p.bound && s.z.abs() <= p.bound);
        });
    }
}
