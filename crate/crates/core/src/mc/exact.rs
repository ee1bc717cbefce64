//! Exact Gaussian transition of the free damped oscillator
//! `dX = Y dt, dY = -(c0 Y + k X) dt + dW` over one step.
//!
//! The mean map is `exp(A dt)`. The covariance is
//! `int_0^dt exp(As) e2 e2^T exp(A^T s) ds`, integrated by Gauss-Legendre
//! quadrature on the closed-form `exp(As) e2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::OscillatorParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactStepTables {
    pub dt: f64,
    pub omega: f64,
    /// Row-major `exp(A dt)`.
    pub mean: [[f64; 2]; 2],
    /// `(var_x, cov_xy, var_y)`.
    pub cov: [f64; 3],
    /// Lower Cholesky factor `(l11, l21, l22)`.
    pub chol: [f64; 3],
}

impl ExactStepTables {
    #[inline]
    pub fn mean_of(&self, x: f64, y: f64) -> (f64, f64) {
        let m = &self.mean;
        (m[0][0] * x + m[0][1] * y, m[1][0] * x + m[1][1] * y)
    }

    /// Transition sample for the standard normal pair `(g1, g2)`.
    #[inline]
    pub fn sample(&self, x: f64, y: f64, g1: f64, g2: f64) -> (f64, f64) {
        let (mx, my) = self.mean_of(x, y);
        let [l11, l21, l22] = self.chol;
        (mx + l11 * g1, my + l21 * g1 + l22 * g2)
    }
}

/// `exp(As) e2` for the underdamped oscillator.
fn impulse_response(c0: f64, omega: f64, s: f64) -> (f64, f64) {
    let decay = (-0.5 * c0 * s).exp();
    let (sn, cs) = (omega * s).sin_cos();
    (decay * sn / omega, decay * (cs - 0.5 * c0 / omega * sn))
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

const MIN_PANELS: usize = 8;
const NODES: usize = 12;

pub fn build_exact_tables(params: &OscillatorParams, dt: f64) -> Result<ExactStepTables> {
    let omega = params
        .omega()
        .ok_or_else(|| Error::ExactTables(format!("needs 4k > c0^2 (c0={}, k={})", params.c0, params.k)))?;
    if !(dt >= 0.0 && dt.is_finite()) {
        return Err(Error::ExactTables(format!("invalid step {dt}")));
    }
    let c0 = params.c0;
    let decay = (-0.5 * c0 * dt).exp();
    let (sn, cs) = (omega * dt).sin_cos();
    let a = 0.5 * c0 / omega;
    let mean = [
        [decay * (cs + a * sn), decay * sn / omega],
        [-decay * params.k * sn / omega, decay * (cs - a * sn)],
    ];

    let rule = gauss_legendre(NODES);
    // enough panels to resolve the oscillation and the decay on long steps
    let panels = MIN_PANELS.max((2.0 * dt * (omega + c0)).ceil() as usize);
    let h = dt / panels as f64;
    let mut cov = [0.0; 3];
    for p in 0..panels {
        let mid = (p as f64 + 0.5) * h;
        for &(x, w) in &rule {
            let s = mid + 0.5 * h * x;
            let (rx, ry) = impulse_response(c0, omega, s);
            let wt = 0.5 * h * w;
            cov[0] += wt * rx * rx;
            cov[1] += wt * rx * ry;
            cov[2] += wt * ry * ry;
        }
    }
    let l11 = cov[0].sqrt();
    let l21 = if l11 > 0.0 { cov[1] / l11 } else { 0.0 };
    let rest = cov[2] - l21 * l21;
    if rest < -1e-14 * cov[2].abs().max(f64::MIN_POSITIVE) {
        return Err(Error::ExactTables(format!("covariance not positive semi-definite at dt={dt}")));
    }
    let chol = [l11, l21, rest.max(0.0).sqrt()];
    Ok(ExactStepTables { dt, omega, mean, cov, chol })
}
