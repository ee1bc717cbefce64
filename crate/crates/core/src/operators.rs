//! Assembly of the discrete generator `M = -L` with its boundary rows.
//!
//! Stencil rows hold `-(L u)` with first-order upwinding in both
//! directions. Neumann and impact-identification rows are algebraic
//! constraints with zero row sum; they are kept out of the time-stepping
//! shift so that every system solved downstream enforces them exactly.

use std::io::Write;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::model::{OscillatorKind, OscillatorParams};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RowKind {
    Interior,
    /// `-(L_+ u)` on the column `z = +bound`.
    PlasticPlus,
    /// `-(L_- u)` on the column `z = -bound`.
    PlasticMinus,
    /// `u(node) = u(same column, -e y)` by linear interpolation.
    ImpactIdentify,
    /// `j = J`.
    NeumannTop,
    /// `j = 1`.
    NeumannBottom,
}

impl RowKind {
    pub fn is_stencil(self) -> bool {
        matches!(self, RowKind::Interior | RowKind::PlasticPlus | RowKind::PlasticMinus)
    }
}

#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub grid: Grid,
    pub params: OscillatorParams,
    pub matrix: CsrMatrix,
    pub kinds: Vec<RowKind>,
    /// Velocity drift `-(c0 y + k z)` per node.
    pub drift: Vec<f64>,
}

impl DiscreteOperator {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn is_constraint(&self, n: usize) -> bool {
        !self.kinds[n].is_stencil()
    }

    /// `diag * I + scale * M` on stencil rows, `M` unchanged on constraint
    /// rows. `(1 + dt lambda, dt)` gives the implicit step, `(lambda, 1)`
    /// the stationary system.
    pub fn system_matrix(&self, diag: f64, scale: f64) -> CsrMatrix {
        self.matrix.map_rows(|r, entries| {
            if self.kinds[r].is_stencil() {
                for e in entries.iter_mut() {
                    e.1 *= scale;
                }
                entries.push((r, diag));
            }
        })
    }

    /// Zeroes the right-hand side on constraint rows.
    pub fn constrain_rhs(&self, rhs: &mut [f64]) {
        for (n, v) in rhs.iter_mut().enumerate() {
            if self.is_constraint(n) {
                *v = 0.0;
            }
        }
    }

    pub fn dump<W: Write>(&self, w: W) -> std::io::Result<()> {
        self.matrix.write_coordinate(w)
    }

    pub fn count(&self, kind: RowKind) -> usize {
        self.kinds.iter().filter(|&&k| k == kind).count()
    }
}

/// Upwind stencil row for node `(i, j)`. `z_terms` selects which of the
/// two transport neighbours may be used; a missing neighbour drops its term.
fn stencil_row(grid: &Grid, i: usize, j: usize, b: f64, use_left: bool, use_right: bool) -> Vec<(usize, f64)> {
    let n = grid.index(i, j);
    let y = grid.y[j];
    let diff = 0.5 / (grid.dy * grid.dy);
    let up = -diff - b.max(0.0) / grid.dy;
    let down = -diff + b.min(0.0) / grid.dy;
    let mut row = vec![(grid.index(i, j + 1), up), (grid.index(i, j - 1), down)];
    if use_right && y > 0.0 {
        row.push((grid.index(i + 1, j), -y / grid.dz));
    }
    if use_left && y < 0.0 {
        row.push((grid.index(i - 1, j), y / grid.dz));
    }
    let off: f64 = row.iter().map(|e| e.1).sum();
    row.push((n, -off));
    row
}

fn neumann_row(grid: &Grid, i: usize, j: usize) -> (RowKind, Vec<(usize, f64)>) {
    let n = grid.index(i, j);
    let inv = 1.0 / grid.dy;
    if j == 0 {
        (RowKind::NeumannBottom, vec![(n, inv), (grid.index(i, 1), -inv)])
    } else {
        (RowKind::NeumannTop, vec![(n, inv), (grid.index(i, j - 1), -inv)])
    }
}

fn finish(grid: &Grid, params: &OscillatorParams, rows: Vec<(RowKind, Vec<(usize, f64)>)>, drift: Vec<f64>) -> DiscreteOperator {
    let (kinds, entries): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    DiscreteOperator {
        grid: grid.clone(),
        params: *params,
        matrix: CsrMatrix::from_rows(grid.len(), entries),
        kinds,
        drift,
    }
}

fn drift_table(grid: &Grid, params: &OscillatorParams) -> Vec<f64> {
    let mut b = Vec::with_capacity(grid.len());
    for j in 0..grid.nj {
        for i in 0..grid.ni {
            b.push(-(params.c0 * grid.y[j] + params.k * grid.z[i]));
        }
    }
    b
}

/// Elasto-plastic generator: interior stencil, `L_+` / `L_-` on the plastic
/// columns, Neumann on `y = +-Y`.
pub fn assemble_elastoplastic(grid: &Grid, params: &OscillatorParams) -> Result<DiscreteOperator> {
    if params.kind != OscillatorKind::ElastoPlastic {
        return Err(Error::InvalidParameter("elasto-plastic assembly needs elasto-plastic parameters".into()));
    }
    Ok(box_operator(grid, params, true))
}

/// Linear oscillator on a box with reflecting walls in every direction; used
/// to validate against closed-form moments of the unconstrained SDE.
pub fn assemble_unconstrained(grid: &Grid, params: &OscillatorParams) -> DiscreteOperator {
    box_operator(grid, params, false)
}

fn box_operator(grid: &Grid, params: &OscillatorParams, plastic: bool) -> DiscreteOperator {
    let drift = drift_table(grid, params);
    let last = grid.ni - 1;
    let mut rows = Vec::with_capacity(grid.len());
    for j in 0..grid.nj {
        for i in 0..grid.ni {
            if j == 0 || j == grid.nj - 1 {
                rows.push(neumann_row(grid, i, j));
                continue;
            }
            let b = drift[grid.index(i, j)];
            let kind = match (plastic, i) {
                (true, 0) if last > 0 => RowKind::PlasticMinus,
                (true, i) if i == last => RowKind::PlasticPlus,
                _ => RowKind::Interior,
            };
            rows.push((kind, stencil_row(grid, i, j, b, i > 0, i < last)));
        }
    }
    finish(grid, params, rows, drift)
}

/// Target of the impact identification for velocity `y_j`: zero-based index
/// `j_e` and weight `c` with `c y_{j_e} + (1 - c) y_{j_e + 1} = -e y_j`.
pub fn identification_target(grid: &Grid, restitution: f64, j: usize) -> Result<(usize, f64)> {
    let target = -restitution * grid.y[j];
    let je = ((grid.spec.truncation + target) / grid.dy + 1e-9).floor();
    if je < 0.0 || je as usize >= grid.nj {
        return Err(Error::InterpolationOutOfRange { row: j, index: je.max(0.0) as usize });
    }
    let je = je as usize;
    if je + 1 >= grid.nj {
        // target sits on the top node itself
        return Ok((je, 1.0));
    }
    let c = ((grid.y[je + 1] - target) / grid.dy).clamp(0.0, 1.0);
    Ok((je, c))
}

/// Obstacle generator: interior stencil on the whole rectangle,
/// identification rows on the incoming boundary nodes, Neumann on `y = +-Y`.
pub fn assemble_obstacle(grid: &Grid, params: &OscillatorParams) -> Result<DiscreteOperator> {
    if params.kind != OscillatorKind::Obstacle {
        return Err(Error::InvalidParameter("obstacle assembly needs obstacle parameters".into()));
    }
    let drift = drift_table(grid, params);
    let last = grid.ni - 1;
    let mut rows = Vec::with_capacity(grid.len());
    for j in 0..grid.nj {
        for i in 0..grid.ni {
            if j == 0 || j == grid.nj - 1 {
                rows.push(neumann_row(grid, i, j));
                continue;
            }
            let y = grid.y[j];
            let incoming = (i == last && y > 0.0) || (i == 0 && y < 0.0);
            if incoming {
                let (je, c) = identification_target(grid, params.restitution, j)?;
                let n = grid.index(i, j);
                let mut row = vec![(n, 1.0), (grid.index(i, je), -c)];
                if c < 1.0 {
                    row.push((grid.index(i, je + 1), -(1.0 - c)));
                }
                rows.push((RowKind::ImpactIdentify, row));
            } else {
                let b = drift[grid.index(i, j)];
                rows.push((RowKind::Interior, stencil_row(grid, i, j, b, i > 0, i < last)));
            }
        }
    }
    Ok(finish(grid, params, rows, drift))
}

/// Dispatches on the oscillator kind.
pub fn assemble(grid: &Grid, params: &OscillatorParams) -> Result<DiscreteOperator> {
    match params.kind {
        OscillatorKind::ElastoPlastic => assemble_elastoplastic(grid, params),
        OscillatorKind::Obstacle => assemble_obstacle(grid, params),
    }
}
