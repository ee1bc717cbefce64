//! Rectangular finite-difference grid on `[-bound, bound] x [-Y, Y]`.
//!
//! Nodes are numbered row-major with the `z` index fastest:
//! `n = j * ni + i` for zero-based `(i, j)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FieldFn, OscillatorKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Half count in `z`; the grid has `2 half_i + 1` columns.
    pub half_i: usize,
    /// Half count in `y`; the grid has `2 half_j + 1` rows.
    pub half_j: usize,
    /// Velocity truncation `Y`.
    pub truncation: f64,
}

impl GridSpec {
    pub fn new(half_i: usize, half_j: usize, truncation: f64) -> Self {
        Self { half_i, half_j, truncation }
    }

    pub fn square(half: usize, truncation: f64) -> Self {
        Self::new(half, half, truncation)
    }

    pub fn node_count(&self) -> usize {
        (2 * self.half_i + 1) * (2 * self.half_j + 1)
    }
}

/// Position of a node in the picture of the discretisation: equation nodes,
/// Neumann nodes on `y = +-Y`, and the boundary nodes with incoming velocity
/// where the non-standard conditions live.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeClass {
    Equation,
    Neumann,
    NonStandard,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub spec: GridSpec,
    pub ni: usize,
    pub nj: usize,
    /// Half width in `z` (plastic yield or obstacle position).
    pub z_half: f64,
    pub dz: f64,
    pub dy: f64,
    pub z: Vec<f64>,
    pub y: Vec<f64>,
}

impl Grid {
    pub fn new(spec: GridSpec, z_half: f64) -> Result<Self> {
        if spec.half_i < 1 || spec.half_j < 1 {
            return Err(Error::InvalidGrid(format!(
                "half counts must be >= 1, got ({}, {})",
                spec.half_i, spec.half_j
            )));
        }
        if !(spec.truncation > 0.0 && spec.truncation.is_finite()) {
            return Err(Error::InvalidGrid(format!("truncation must be positive, got {}", spec.truncation)));
        }
        if !(z_half > 0.0 && z_half.is_finite()) {
            return Err(Error::InvalidGrid(format!("z half width must be positive, got {z_half}")));
        }
        let ni = 2 * spec.half_i + 1;
        let nj = 2 * spec.half_j + 1;
        let dz = 2.0 * z_half / (ni - 1) as f64;
        let dy = 2.0 * spec.truncation / (nj - 1) as f64;
        // symmetric construction keeps the centre and both ends exact
        let z = symmetric_axis(spec.half_i, z_half);
        let y = symmetric_axis(spec.half_j, spec.truncation);
        Ok(Self { spec, ni, nj, z_half, dz, dy, z, y })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.ni * self.nj
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.ni + i
    }

    #[inline]
    pub fn coords(&self, n: usize) -> (usize, usize) {
        (n % self.ni, n / self.ni)
    }

    pub fn center(&self) -> usize {
        self.index(self.spec.half_i, self.spec.half_j)
    }

    /// Node closest to a physical state.
    pub fn nearest(&self, z: f64, y: f64) -> usize {
        let i = ((z + self.z_half) / self.dz).round().clamp(0.0, (self.ni - 1) as f64) as usize;
        let j = ((y + self.spec.truncation) / self.dy).round().clamp(0.0, (self.nj - 1) as f64) as usize;
        self.index(i, j)
    }

    pub fn sample(&self, f: &FieldFn) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for j in 0..self.nj {
            for i in 0..self.ni {
                out.push(f.eval(self.z[i], self.y[j], self.z_half));
            }
        }
        out
    }

    pub fn classify(&self, n: usize, kind: OscillatorKind) -> NodeClass {
        let (i, j) = self.coords(n);
        if j == 0 || j == self.nj - 1 {
            return NodeClass::Neumann;
        }
        let mid = self.spec.half_j;
        let incoming = (i == self.ni - 1 && j > mid) || (i == 0 && j < mid);
        match kind {
            // plastic rows live on the whole boundary columns
            OscillatorKind::ElastoPlastic if i == 0 || i == self.ni - 1 => NodeClass::NonStandard,
            OscillatorKind::Obstacle if incoming => NodeClass::NonStandard,
            _ => NodeClass::Equation,
        }
    }
}

fn symmetric_axis(half: usize, extent: f64) -> Vec<f64> {
    let n = 2 * half + 1;
    let h = extent / half as f64;
    (0..n)
        .map(|k| {
            let off = k as isize - half as isize;
            if off.unsigned_abs() == half {
                extent.copysign(off as f64)
            } else {
                off as f64 * h
            }
        })
        .collect()
}
