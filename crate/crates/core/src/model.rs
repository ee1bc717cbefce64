//! Oscillator parameters, grid-evaluable data functions and the catalogue of
//! target quantities.
//!
//! Every quantity is described once as a [`QuantitySpec`]; the PDE pipelines
//! sample its data functions on grid nodes and the Monte Carlo estimators
//! evaluate the same [`FieldFn`] along trajectories.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default neighbourhood radius for the obstacle presets E1' and E4'.
pub const DEFAULT_NEIGHBORHOOD_EPS: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OscillatorKind {
    ElastoPlastic,
    Obstacle,
}

impl fmt::Display for OscillatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OscillatorKind::ElastoPlastic => f.write_str("elasto-plastic"),
            OscillatorKind::Obstacle => f.write_str("obstacle"),
        }
    }
}

impl FromStr for OscillatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "elasto-plastic" | "elastoplastic" | "ep" => Ok(OscillatorKind::ElastoPlastic),
            "obstacle" | "impact" => Ok(OscillatorKind::Obstacle),
            other => Err(Error::InvalidParameter(format!("unknown oscillator kind `{other}`"))),
        }
    }
}

/// Physical constants of the damped oscillator.
///
/// `bound` is the plastic yield for the elasto-plastic model and the obstacle
/// position for the impact model. `restitution` is ignored by the
/// elasto-plastic model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillatorParams {
    pub c0: f64,
    pub k: f64,
    pub bound: f64,
    pub restitution: f64,
    pub kind: OscillatorKind,
}

impl OscillatorParams {
    pub fn elasto_plastic(c0: f64, k: f64, yield_bound: f64) -> Result<Self> {
        let p = Self { c0, k, bound: yield_bound, restitution: 0.0, kind: OscillatorKind::ElastoPlastic };
        p.validate()?;
        Ok(p)
    }

    pub fn obstacle(c0: f64, k: f64, position: f64, restitution: f64) -> Result<Self> {
        let p = Self { c0, k, bound: position, restitution, kind: OscillatorKind::Obstacle };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c0 > 0.0 && self.c0.is_finite()) {
            return Err(Error::InvalidParameter(format!("c0 must be positive, got {}", self.c0)));
        }
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(Error::InvalidParameter(format!("k must be positive, got {}", self.k)));
        }
        if !(self.bound > 0.0 && self.bound.is_finite()) {
            return Err(Error::InvalidParameter(format!("bound must be positive, got {}", self.bound)));
        }
        if self.kind == OscillatorKind::Obstacle && !(0.0..=1.0).contains(&self.restitution) {
            return Err(Error::InvalidParameter(format!(
                "restitution must lie in [0, 1], got {}",
                self.restitution
            )));
        }
        Ok(())
    }

    /// Damped angular frequency `sqrt(4k - c0^2) / 2`, if the oscillator is
    /// underdamped.
    pub fn omega(&self) -> Option<f64> {
        let disc = 4.0 * self.k - self.c0 * self.c0;
        (disc > 0.0).then(|| disc.sqrt() / 2.0)
    }

    pub fn with_bound(mut self, bound: f64) -> Result<Self> {
        self.bound = bound;
        self.validate()?;
        Ok(self)
    }
}

/// Scalar data functions `(z, y) -> value` shared by both solution routes.
///
/// The first coordinate is the elastic deformation `z` for the elasto-plastic
/// model and the displacement `x` for the obstacle model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "fn", rename_all = "kebab-case")]
pub enum FieldFn {
    Zero,
    Constant { value: f64 },
    /// `1{|z| = bound}`.
    PlasticIndicator,
    /// `y^2`.
    VelocitySquared,
    /// `y 1{|z| = bound}`, the plastic deformation rate.
    PlasticRate,
    /// `z` (or `x`).
    Position,
    /// `y`.
    Velocity,
    /// `1{ sqrt((|x| - bound)^2 + y^2) <= eps }`.
    ObstacleNeighborhood { eps: f64 },
}

impl FieldFn {
    /// Evaluates at a state. States on the constraint carry `|z| == bound`
    /// exactly, both on grid boundary columns and on projected trajectories.
    #[inline]
    pub fn eval(&self, z: f64, y: f64, bound: f64) -> f64 {
        match *self {
            FieldFn::Zero => 0.0,
            FieldFn::Constant { value } => value,
            FieldFn::PlasticIndicator => {
                if z.abs() >= bound {
                    1.0
                } else {
                    0.0
                }
            }
            FieldFn::VelocitySquared => y * y,
            FieldFn::PlasticRate => {
                if z.abs() >= bound {
                    y
                } else {
                    0.0
                }
            }
            FieldFn::Position => z,
            FieldFn::Velocity => y,
            FieldFn::ObstacleNeighborhood { eps } => {
                let d = z.abs() - bound;
                if (d * d + y * y).sqrt() <= eps {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, FieldFn::Zero) || matches!(self, FieldFn::Constant { value } if *value == 0.0)
    }

    /// Sup norm over the truncated state space `|z| <= bound, |y| <= ymax`.
    pub fn sup_norm(&self, bound: f64, ymax: f64) -> f64 {
        match *self {
            FieldFn::Zero => 0.0,
            FieldFn::Constant { value } => value.abs(),
            FieldFn::PlasticIndicator | FieldFn::ObstacleNeighborhood { .. } => 1.0,
            FieldFn::VelocitySquared => ymax * ymax,
            FieldFn::PlasticRate | FieldFn::Velocity => ymax,
            FieldFn::Position => bound,
        }
    }
}

/// Which of the target quantity types a spec computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    /// `E(f(X_T) + int_0^T g)`.
    ParabolicA,
    /// `E[(f(X_T) + int_0^T g)(phi(X_{T+h}) + int_0^{T+h} psi)]`.
    ParabolicAPrime,
    /// `E int_0^inf e^{-lambda t} g`.
    EllipticB,
    /// `E int int e^{-lambda s - mu t} g(s) psi(t)`.
    EllipticBPrime,
    /// `lim E f(X_T)`, through `lambda u` with small `lambda`.
    StationaryC,
    /// `lim Var(int_0^T g) / T`.
    GrowthRateCPrime,
}

impl Pipeline {
    pub fn is_primed(&self) -> bool {
        matches!(self, Pipeline::ParabolicAPrime | Pipeline::EllipticBPrime | Pipeline::GrowthRateCPrime)
    }
}

/// How a primed parabolic pipeline reports its result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SecondOrder {
    /// Raw product moment `u v + w`.
    Product,
    /// Variance of the first functional (`v = u`, `h = 0`): reports `w`.
    Variance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantitySpec {
    pub terminal_f: FieldFn,
    pub running_g: FieldFn,
    pub terminal_phi: FieldFn,
    pub running_psi: FieldFn,
    pub lambda: f64,
    pub mu: f64,
    pub horizon: f64,
    pub lag: f64,
    pub pipeline: Pipeline,
    pub second_order: SecondOrder,
}

impl QuantitySpec {
    pub fn parabolic(f: FieldFn, g: FieldFn, horizon: f64) -> Self {
        Self {
            terminal_f: f,
            running_g: g,
            terminal_phi: FieldFn::Zero,
            running_psi: FieldFn::Zero,
            lambda: 0.0,
            mu: 0.0,
            horizon,
            lag: 0.0,
            pipeline: Pipeline::ParabolicA,
            second_order: SecondOrder::Product,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidQuantity(m));
        if !(self.lambda >= 0.0 && self.mu >= 0.0) {
            return bad(format!("discount rates must be non-negative (lambda={}, mu={})", self.lambda, self.mu));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return bad(format!("horizon must be finite and non-negative, got {}", self.horizon));
        }
        if !(self.lag >= 0.0 && self.lag.is_finite()) {
            return bad(format!("lag must be non-negative, got {}", self.lag));
        }
        if self.lag != 0.0 && !self.pipeline.is_primed() {
            return bad(format!("lag {} given for unprimed pipeline {:?}", self.lag, self.pipeline));
        }
        if self.second_order == SecondOrder::Variance && self.lag != 0.0 {
            return bad("variance pipeline requires lag 0".into());
        }
        match self.pipeline {
            Pipeline::EllipticB | Pipeline::StationaryC | Pipeline::GrowthRateCPrime if self.lambda <= 0.0 => {
                bad(format!("{:?} needs lambda > 0", self.pipeline))
            }
            Pipeline::EllipticBPrime if self.lambda <= 0.0 || self.mu <= 0.0 => {
                bad("EllipticBPrime needs lambda > 0 and mu > 0".into())
            }
            _ => Ok(()),
        }
    }

    /// Data of the second functional; for variance specs this is the first one.
    pub fn second_pair(&self) -> (FieldFn, FieldFn) {
        match self.second_order {
            SecondOrder::Variance => (self.terminal_f, self.running_g),
            SecondOrder::Product => (self.terminal_phi, self.running_psi),
        }
    }
}

/// The named presets of the target catalogue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PresetName {
    /// Probability of the plastic state.
    E1,
    /// Mean kinetic energy.
    E2,
    /// Variance of the plastic deformation.
    E3Plastic,
    /// Variance of the total deformation.
    E3Total,
    /// Plastic-state correlation at lag h.
    E4Plastic,
    /// Kinetic-energy correlation at lag h.
    E4Energy,
    /// Probability of a low-velocity state near the obstacle.
    E1Obstacle,
    /// Mean kinetic energy (obstacle).
    E2Obstacle,
    /// Variance of the displacement integral.
    E3Obstacle,
    /// Neighbourhood correlation at lag h.
    E4ObstacleNeighborhood,
    /// Kinetic-energy correlation at lag h (obstacle).
    E4ObstacleEnergy,
}

impl PresetName {
    pub const ALL: [PresetName; 11] = [
        PresetName::E1,
        PresetName::E2,
        PresetName::E3Plastic,
        PresetName::E3Total,
        PresetName::E4Plastic,
        PresetName::E4Energy,
        PresetName::E1Obstacle,
        PresetName::E2Obstacle,
        PresetName::E3Obstacle,
        PresetName::E4ObstacleNeighborhood,
        PresetName::E4ObstacleEnergy,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            PresetName::E1 => "E1",
            PresetName::E2 => "E2",
            PresetName::E3Plastic => "E3-plastic",
            PresetName::E3Total => "E3-total",
            PresetName::E4Plastic => "E4-plastic",
            PresetName::E4Energy => "E4-energy",
            PresetName::E1Obstacle => "E1'",
            PresetName::E2Obstacle => "E2'",
            PresetName::E3Obstacle => "E3'",
            PresetName::E4ObstacleNeighborhood => "E4'-neighborhood",
            PresetName::E4ObstacleEnergy => "E4'-energy",
        }
    }

    pub fn oscillator(&self) -> OscillatorKind {
        match self {
            PresetName::E1
            | PresetName::E2
            | PresetName::E3Plastic
            | PresetName::E3Total
            | PresetName::E4Plastic
            | PresetName::E4Energy => OscillatorKind::ElastoPlastic,
            _ => OscillatorKind::Obstacle,
        }
    }
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PresetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().replace('′', "'").to_ascii_lowercase();
        let name = match key.as_str() {
            "e1" => PresetName::E1,
            "e2" => PresetName::E2,
            "e3" | "e3-plastic" => PresetName::E3Plastic,
            "e3-total" => PresetName::E3Total,
            "e4" | "e4-plastic" => PresetName::E4Plastic,
            "e4-energy" => PresetName::E4Energy,
            "e1'" | "e1p" => PresetName::E1Obstacle,
            "e2'" | "e2p" => PresetName::E2Obstacle,
            "e3'" | "e3p" => PresetName::E3Obstacle,
            "e4'" | "e4p" | "e4'-neighborhood" => PresetName::E4ObstacleNeighborhood,
            "e4'-energy" | "e4p-energy" => PresetName::E4ObstacleEnergy,
            _ => return Err(Error::UnknownPreset(s.to_string())),
        };
        Ok(name)
    }
}

/// Finite-horizon or long-run version of a preset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "kebab-case")]
pub enum Regime {
    Transient { horizon: f64 },
    LongRun,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PresetOverrides {
    pub regime: Regime,
    /// Lag for the correlation presets.
    pub lag: f64,
    /// Small discount rate used by the long-run pipelines.
    pub lambda: f64,
    pub eps: Option<f64>,
}

impl Default for PresetOverrides {
    fn default() -> Self {
        Self {
            regime: Regime::Transient { horizon: 4.0 },
            lag: 0.2,
            lambda: 1e-3,
            eps: Some(DEFAULT_NEIGHBORHOOD_EPS),
        }
    }
}

impl PresetOverrides {
    pub fn transient(horizon: f64) -> Self {
        Self { regime: Regime::Transient { horizon }, ..Default::default() }
    }

    pub fn long_run(lambda: f64) -> Self {
        Self { regime: Regime::LongRun, lambda, ..Default::default() }
    }
}

/// Expands a named preset to a validated [`QuantitySpec`].
pub fn expand_preset(name: PresetName, params: &OscillatorParams, overrides: &PresetOverrides) -> Result<QuantitySpec> {
    if name.oscillator() != params.kind {
        return Err(Error::InvalidQuantity(format!("preset {name} is defined for the {} oscillator", name.oscillator())));
    }
    let eps = || -> Result<f64> {
        match overrides.eps {
            Some(e) if e > 0.0 => Ok(e),
            Some(e) => Err(Error::InvalidParameter(format!("eps must be positive, got {e}"))),
            None => Err(Error::MissingEpsilon(name.to_string())),
        }
    };
    let (horizon, long_run) = match overrides.regime {
        Regime::Transient { horizon } => (horizon, false),
        Regime::LongRun => (0.0, true),
    };

    // one-point presets: terminal datum f, long-run version is StationaryC
    let one_point = |f: FieldFn| {
        let mut s = QuantitySpec::parabolic(f, FieldFn::Zero, horizon);
        if long_run {
            s.pipeline = Pipeline::StationaryC;
            s.lambda = overrides.lambda;
        }
        s
    };
    // variance presets: running datum g, long-run version is the growth rate
    let variance = |f: FieldFn, g: FieldFn| {
        let mut s = QuantitySpec::parabolic(f, g, horizon);
        s.second_order = SecondOrder::Variance;
        if long_run {
            s.pipeline = Pipeline::GrowthRateCPrime;
            s.lambda = overrides.lambda;
            s.mu = overrides.lambda;
            s.terminal_f = FieldFn::Zero;
        } else {
            s.pipeline = Pipeline::ParabolicAPrime;
        }
        s
    };
    let correlation = |f: FieldFn| -> Result<QuantitySpec> {
        if long_run {
            return Err(Error::InvalidQuantity(format!("{name} has no long-run pipeline")));
        }
        let mut s = QuantitySpec::parabolic(f, FieldFn::Zero, horizon);
        s.terminal_phi = f;
        s.pipeline = Pipeline::ParabolicAPrime;
        s.lag = overrides.lag;
        Ok(s)
    };

    let spec = match name {
        PresetName::E1 => one_point(FieldFn::PlasticIndicator),
        PresetName::E2 | PresetName::E2Obstacle => one_point(FieldFn::VelocitySquared),
        PresetName::E3Plastic => variance(FieldFn::Zero, FieldFn::PlasticRate),
        PresetName::E3Total => variance(FieldFn::Position, FieldFn::PlasticRate),
        PresetName::E4Plastic => correlation(FieldFn::PlasticIndicator)?,
        PresetName::E4Energy | PresetName::E4ObstacleEnergy => correlation(FieldFn::VelocitySquared)?,
        PresetName::E1Obstacle => one_point(FieldFn::ObstacleNeighborhood { eps: eps()? }),
        PresetName::E3Obstacle => variance(FieldFn::Zero, FieldFn::Position),
        PresetName::E4ObstacleNeighborhood => correlation(FieldFn::ObstacleNeighborhood { eps: eps()? })?,
    };
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ep(bound: f64) -> OscillatorParams {
        OscillatorParams::elasto_plastic(1.0, 1.0, bound).unwrap()
    }

    #[test]
    fn rejects_bad_params() {
        assert!(OscillatorParams::elasto_plastic(0.0, 1.0, 1.0).is_err());
        assert!(OscillatorParams::elasto_plastic(1.0, -1.0, 1.0).is_err());
        assert!(OscillatorParams::elasto_plastic(1.0, 1.0, 0.0).is_err());
        assert!(OscillatorParams::obstacle(1.0, 1.0, 1.0, 1.5).is_err());
        assert!(OscillatorParams::obstacle(1.0, 1.0, 1.0, 0.5).is_ok());
    }

    #[test]
    fn omega_requires_underdamping() {
        assert_eq!(ep(1.0).omega().unwrap(), 3f64.sqrt() / 2.0);
        assert!(OscillatorParams::elasto_plastic(2.0, 1.0, 1.0).unwrap().omega().is_none());
    }

    #[test]
    fn e2_is_kinetic_energy() {
        let s = expand_preset(PresetName::E2, &ep(0.7), &PresetOverrides::transient(4.0)).unwrap();
        assert_eq!(s.terminal_f, FieldFn::VelocitySquared);
        assert!(s.running_g.is_zero());
        assert_eq!(s.pipeline, Pipeline::ParabolicA);
    }

    #[test]
    fn e3_plastic_is_variance_of_plastic_rate() {
        let s = expand_preset(PresetName::E3Plastic, &ep(0.25), &PresetOverrides::transient(4.0)).unwrap();
        assert!(s.terminal_f.is_zero());
        assert_eq!(s.running_g, FieldFn::PlasticRate);
        assert_eq!(s.lambda, 0.0);
        assert_eq!(s.lag, 0.0);
        assert_eq!(s.pipeline, Pipeline::ParabolicAPrime);
        assert_eq!(s.second_order, SecondOrder::Variance);
        assert_eq!(s.second_pair(), (FieldFn::Zero, FieldFn::PlasticRate));
        assert_eq!(s.running_g.eval(0.25, 0.3, 0.25), 0.3);
        assert_eq!(s.running_g.eval(-0.25, -0.3, 0.25), -0.3);
        assert_eq!(s.running_g.eval(0.1, 0.3, 0.25), 0.0);
    }

    #[test]
    fn long_run_presets_use_small_lambda() {
        let o = PresetOverrides::long_run(1e-3);
        let s = expand_preset(PresetName::E1, &ep(0.2), &o).unwrap();
        assert_eq!(s.pipeline, Pipeline::StationaryC);
        assert_eq!(s.lambda, 1e-3);
        let s = expand_preset(PresetName::E3Plastic, &ep(0.2), &o).unwrap();
        assert_eq!(s.pipeline, Pipeline::GrowthRateCPrime);
        assert!(expand_preset(PresetName::E4Plastic, &ep(0.2), &o).is_err());
    }

    #[test]
    fn obstacle_presets_need_eps() {
        let p = OscillatorParams::obstacle(1.0, 1.0, 0.5, 0.5).unwrap();
        let mut o = PresetOverrides::transient(1.0);
        o.eps = None;
        assert!(matches!(expand_preset(PresetName::E1Obstacle, &p, &o), Err(Error::MissingEpsilon(_))));
        assert!(matches!(
            expand_preset(PresetName::E4ObstacleNeighborhood, &p, &o),
            Err(Error::MissingEpsilon(_))
        ));
        let s = expand_preset(PresetName::E1Obstacle, &p, &PresetOverrides::transient(1.0)).unwrap();
        assert_eq!(s.terminal_f, FieldFn::ObstacleNeighborhood { eps: DEFAULT_NEIGHBORHOOD_EPS });
        assert_eq!(s.terminal_f.eval(0.5, 0.05, 0.5), 1.0);
        assert_eq!(s.terminal_f.eval(-0.45, 0.0, 0.5), 1.0);
        assert_eq!(s.terminal_f.eval(0.3, 0.0, 0.5), 0.0);
    }

    #[test]
    fn preset_model_mismatch_is_rejected() {
        let p = OscillatorParams::obstacle(1.0, 1.0, 0.5, 0.5).unwrap();
        assert!(expand_preset(PresetName::E1, &p, &PresetOverrides::default()).is_err());
    }

    #[test]
    fn names_parse() {
        for n in PresetName::ALL {
            assert_eq!(n.label().parse::<PresetName>().unwrap(), n);
        }
        assert_eq!("E3".parse::<PresetName>().unwrap(), PresetName::E3Plastic);
        assert_eq!("E2′".parse::<PresetName>().unwrap(), PresetName::E2Obstacle);
        assert!(matches!("E9".parse::<PresetName>(), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn lag_only_for_primed() {
        let mut s = QuantitySpec::parabolic(FieldFn::VelocitySquared, FieldFn::Zero, 1.0);
        s.lag = 0.1;
        assert!(s.validate().is_err());
        s.pipeline = Pipeline::ParabolicAPrime;
        assert!(s.validate().is_ok());
        let mut s = QuantitySpec::parabolic(FieldFn::VelocitySquared, FieldFn::Zero, 1.0);
        s.pipeline = Pipeline::StationaryC;
        assert!(s.validate().is_err());
    }

    #[test]
    fn expansion_is_deterministic() {
        for n in PresetName::ALL {
            let p = match n.oscillator() {
                OscillatorKind::ElastoPlastic => ep(0.3),
                OscillatorKind::Obstacle => OscillatorParams::obstacle(1.0, 1.0, 0.3, 0.5).unwrap(),
            };
            let o = PresetOverrides::transient(2.0);
            assert_eq!(expand_preset(n, &p, &o).unwrap(), expand_preset(n, &p, &o).unwrap());
        }
    }
}
