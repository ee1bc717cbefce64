//! Superposition solve of the stationary elasto-plastic problem.
//!
//! Three local problems share one factorisation: `v` with source `g` and
//! zero values at the two pins `(+-bound, 0)`, and `pi+`, `pi-` with zero
//! source and unit value at one pin. The pin values `u+`, `u-` of the
//! glued field `u = v + u+ pi+ + u- pi-` follow from a 2x2 system.
//!
//! A pin on the diffusive boundary column leaves a kink, not a jump: the
//! local fields are continuous in value but their `y`-flux jumps at the pin.
//! The default gluing therefore cancels the flux defect, which is the pin
//! row residual of the unpinned system. Gluing on the difference of the two
//! neighbouring values is kept as an option.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::OscillatorKind;
use crate::operators::DiscreteOperator;

/// Condition selecting `(u+, u-)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GlueCondition {
    /// The `y`-flux defect at both pins vanishes, i.e. the glued field
    /// satisfies the pin nodes' own stencil rows.
    #[default]
    FluxJump,
    /// Values at the two `y`-neighbours of each pin agree.
    ValueJump,
}

#[derive(Debug, Clone)]
pub struct LocalTriple {
    pub lambda: f64,
    /// `(z = +bound, y = 0)` and `(z = -bound, y = 0)` node indices.
    pub pins: [usize; 2],
    pub v: Vec<f64>,
    pub pi_plus: Vec<f64>,
    pub pi_minus: Vec<f64>,
    /// `value(y -> 0+) - value(y -> 0-)` of `[v, pi+, pi-]` at each pin.
    pub value_jumps: [[f64; 3]; 2],
    /// Flux defects: pin-row residuals `(row of lambda I + M) x - rhs` of
    /// `[v, pi+, pi-]`.
    pub flux_jumps: [[f64; 3]; 2],
}

#[derive(Debug, Clone)]
pub struct GlueOutput {
    pub u_plus: f64,
    pub u_minus: f64,
    pub u: Vec<f64>,
    pub condition_number: f64,
}

fn pin_nodes(op: &DiscreteOperator) -> [usize; 2] {
    let g = &op.grid;
    let mid = g.spec.half_j;
    [g.index(g.ni - 1, mid), g.index(0, mid)]
}

pub fn solve_local_triple(op: &DiscreteOperator, lambda: f64, g: &[f64]) -> Result<LocalTriple> {
    if op.params.kind != OscillatorKind::ElastoPlastic {
        return Err(Error::InvalidParameter("superposition applies to the elasto-plastic problem only".into()));
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    let pins = pin_nodes(op);
    let direct = op.system_matrix(lambda, 1.0);
    let pinned = direct.map_rows(|r, entries| {
        if pins.contains(&r) {
            entries.clear();
            entries.push((r, 1.0));
        }
    });
    let lu = pinned.factorize()?;

    let mut data = g.to_vec();
    op.constrain_rhs(&mut data);
    let mut v = data.clone();
    v[pins[0]] = 0.0;
    v[pins[1]] = 0.0;
    lu.solve_in_place(&mut v)?;
    let pinned_field = |at: Option<usize>| -> Result<Vec<f64>> {
        let mut x = vec![0.0; op.len()];
        if let Some(p) = at {
            x[p] = 1.0;
        }
        lu.solve_in_place(&mut x)?;
        // identity rows; restore the exact pin data against pivoting round-off
        for &p in &pins {
            x[p] = if Some(p) == at { 1.0 } else { 0.0 };
        }
        Ok(x)
    };
    v[pins[0]] = 0.0;
    v[pins[1]] = 0.0;
    let pi_plus = pinned_field(Some(pins[0]))?;
    let pi_minus = pinned_field(Some(pins[1]))?;

    let ni = op.grid.ni;
    let jump = |x: &[f64], p: usize| x[p + ni] - x[p - ni];
    let resid = |x: &[f64], p: usize, rhs: f64| direct.row(p).map(|(c, a)| a * x[c]).sum::<f64>() - rhs;
    let fields = [&v, &pi_plus, &pi_minus];
    let mut value_jumps = [[0.0; 3]; 2];
    let mut flux_jumps = [[0.0; 3]; 2];
    for (a, &p) in pins.iter().enumerate() {
        for (b, x) in fields.iter().enumerate() {
            value_jumps[a][b] = jump(x, p);
            flux_jumps[a][b] = resid(x, p, if b == 0 { data[p] } else { 0.0 });
        }
    }
    Ok(LocalTriple { lambda, pins, v, pi_plus, pi_minus, value_jumps, flux_jumps })
}

/// Solves for the pin values and assembles the glued field.
pub fn glue(triple: &LocalTriple, condition: GlueCondition) -> Result<GlueOutput> {
    let table = match condition {
        GlueCondition::FluxJump => &triple.flux_jumps,
        GlueCondition::ValueJump => &triple.value_jumps,
    };
    // [a b; c d] (u+, u-) = -(r0, r1)
    let (a, b, c, d) = (table[0][1], table[0][2], table[1][1], table[1][2]);
    let (r0, r1) = (-table[0][0], -table[1][0]);
    let det = a * d - b * c;
    let norm = |m: [f64; 4]| m.iter().map(|x| x * x).sum::<f64>().sqrt();
    let condition_number = if det != 0.0 { norm([a, b, c, d]) * norm([d, -b, -c, a]) / det.abs() } else { f64::INFINITY };
    if !condition_number.is_finite() || condition_number > 1e14 {
        return Err(Error::DegenerateGluing { condition: condition_number });
    }
    let u_plus = (d * r0 - b * r1) / det;
    let u_minus = (a * r1 - c * r0) / det;
    let u = triple
        .v
        .iter()
        .zip(&triple.pi_plus)
        .zip(&triple.pi_minus)
        .map(|((v, p), m)| v + u_plus * p + u_minus * m)
        .collect();
    Ok(GlueOutput { u_plus, u_minus, u, condition_number })
}

/// Comparison row against the direct stationary solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuperpositionCheck {
    pub direct: f64,
    pub superposition: f64,
    pub abs_diff: f64,
}

pub fn compare_with_direct(op: &DiscreteOperator, lambda: f64, g: &[f64], probe: usize, condition: GlueCondition) -> Result<SuperpositionCheck> {
    let triple = solve_local_triple(op, lambda, g)?;
    let glued = glue(&triple, condition)?;
    let direct = crate::pde::stationary_solve(op, lambda, g)?;
    let (d, s) = (direct.scaled(probe), lambda * glued.u[probe]);
    Ok(SuperpositionCheck { direct: d, superposition: s, abs_diff: (d - s).abs() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid, GridSpec};
    use crate::model::{FieldFn, OscillatorParams};
    use crate::operators::assemble_elastoplastic;

    fn op(half: usize, bound: f64) -> DiscreteOperator {
        let p = OscillatorParams::elasto_plastic(1.0, 1.0, bound).unwrap();
        assemble_elastoplastic(&Grid::new(GridSpec::square(half, 3.0), bound).unwrap(), &p).unwrap()
    }

    #[test]
    fn zero_data_gives_zero_v() {
        let o = op(8, 0.3);
        let t = solve_local_triple(&o, 1e-2, &vec![0.0; o.len()]).unwrap();
        assert!(t.v.iter().all(|&x| x == 0.0));
        let gl = glue(&t, GlueCondition::FluxJump).unwrap();
        assert_eq!((gl.u_plus, gl.u_minus), (0.0, 0.0));
    }

    #[test]
    fn pins_exact_and_fields_bounded() {
        let o = op(10, 0.3);
        let t = solve_local_triple(&o, 1e-2, &vec![0.0; o.len()]).unwrap();
        assert_eq!(t.pi_plus[t.pins[0]], 1.0);
        assert_eq!(t.pi_plus[t.pins[1]], 0.0);
        assert_eq!(t.pi_minus[t.pins[1]], 1.0);
        for n in 0..o.len() {
            let (p, m) = (t.pi_plus[n], t.pi_minus[n]);
            assert!(p >= -1e-12 && m >= -1e-12 && p + m <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn symmetric_data_gives_equal_pin_values() {
        let o = op(12, 0.4);
        let f = o.grid.sample(&FieldFn::PlasticIndicator);
        let t = solve_local_triple(&o, 1e-2, &f).unwrap();
        for cond in [GlueCondition::FluxJump, GlueCondition::ValueJump] {
            let gl = glue(&t, cond).unwrap();
            assert!((gl.u_plus - gl.u_minus).abs() < 1e-8 * gl.u_plus.abs());
        }
    }

    #[test]
    fn flux_gluing_reproduces_direct_solve() {
        let o = op(12, 0.4);
        let f = o.grid.sample(&FieldFn::PlasticIndicator);
        let c = compare_with_direct(&o, 1e-2, &f, o.grid.center(), GlueCondition::FluxJump).unwrap();
        assert!(c.abs_diff < 1e-10);
    }

    #[test]
    fn obstacle_rejected() {
        let p = OscillatorParams::obstacle(1.0, 1.0, 0.5, 0.5).unwrap();
        let o = crate::operators::assemble_obstacle(&Grid::new(GridSpec::square(4, 3.0), 0.5).unwrap(), &p).unwrap();
        assert!(solve_local_triple(&o, 1e-2, &vec![0.0; o.len()]).is_err());
    }
}
