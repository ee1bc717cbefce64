//! Experiment configuration, read from TOML.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::mc::{CycleConfig, McConfig};
use crate::model::{
    expand_preset, OscillatorKind, OscillatorParams, PresetName, PresetOverrides, QuantitySpec, Regime,
    DEFAULT_NEIGHBORHOOD_EPS,
};

/// Reproduction target. Every named tag fills the config with the setup of
/// one published experiment; `custom` takes the file as written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Table1,
    Table2,
    Tabemper,
    Fig2,
    Fig3,
    Fig4,
    #[default]
    Custom,
}

impl Target {
    pub const ALL: [Target; 7] =
        [Target::Table1, Target::Table2, Target::Tabemper, Target::Fig2, Target::Fig3, Target::Fig4, Target::Custom];

    pub fn tag(&self) -> &'static str {
        match self {
            Target::Table1 => "table1",
            Target::Table2 => "table2",
            Target::Tabemper => "tabemper",
            Target::Fig2 => "fig2",
            Target::Fig3 => "fig3",
            Target::Fig4 => "fig4",
            Target::Custom => "custom",
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Target::ALL
            .into_iter()
            .find(|t| t.tag() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown target '{s}'")))
    }
}

/// Estimation route of a job. `LongCycle` results carry the MC method tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    Pde,
    Mc,
    Sup,
    LongCycle,
}

impl FromStr for Route {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pde" => Ok(Route::Pde),
            "mc" => Ok(Route::Mc),
            "sup" | "superposition" => Ok(Route::Sup),
            "long-cycle" | "cycles" => Ok(Route::LongCycle),
            _ => Err(Error::Config(format!("unknown method '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OscillatorSection {
    pub kind: OscillatorKind,
    pub c0: f64,
    pub k: f64,
    pub bound: f64,
    pub restitution: f64,
}

impl Default for OscillatorSection {
    fn default() -> Self {
        Self { kind: OscillatorKind::ElastoPlastic, c0: 1.0, k: 1.0, bound: 0.25, restitution: 0.5 }
    }
}

impl OscillatorSection {
    pub fn params(&self, bound: f64) -> Result<OscillatorParams> {
        match self.kind {
            OscillatorKind::ElastoPlastic => OscillatorParams::elasto_plastic(self.c0, self.k, bound),
            OscillatorKind::Obstacle => OscillatorParams::obstacle(self.c0, self.k, bound, self.restitution),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub half_i: usize,
    pub half_j: usize,
    pub truncation: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { half_i: 200, half_j: 200, truncation: 3.0 }
    }
}

impl GridSection {
    pub fn spec(&self) -> GridSpec {
        GridSpec::new(self.half_i, self.half_j, self.truncation)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub dt: f64,
    pub lambda: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self { dt: 1e-3, lambda: 1e-3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegimeTag {
    #[default]
    Transient,
    LongRun,
}

/// One requested quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantityEntry {
    pub preset: String,
    #[serde(default)]
    pub regime: RegimeTag,
    /// Transient horizons, or averaging windows of the long-run MC
    /// estimators. Defaults to `mc.horizon` / 4.
    #[serde(default)]
    pub horizon: Option<Vec<f64>>,
    #[serde(default = "default_lag")]
    pub lag: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
}

fn default_lag() -> f64 {
    0.2
}

fn default_eps() -> f64 {
    DEFAULT_NEIGHBORHOOD_EPS
}

impl QuantityEntry {
    pub fn new(preset: &str, regime: RegimeTag, horizon: Option<Vec<f64>>) -> Self {
        Self { preset: preset.into(), regime, horizon, lag: default_lag(), eps: default_eps() }
    }

    pub fn preset_name(&self) -> Result<PresetName> {
        self.preset.parse()
    }

    /// Spec at one horizon. Long-run specs ignore it.
    pub fn spec(&self, params: &OscillatorParams, lambda: f64, horizon: f64) -> Result<QuantitySpec> {
        let regime = match self.regime {
            RegimeTag::Transient => Regime::Transient { horizon },
            RegimeTag::LongRun => Regime::LongRun,
        };
        let overrides = PresetOverrides { regime, lag: self.lag, lambda, eps: Some(self.eps) };
        expand_preset(self.preset_name()?, params, &overrides)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMode {
    /// Cartesian product of all listed axes.
    #[default]
    Product,
    /// Each axis is varied alone around the base values.
    Separate,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub mode: SweepMode,
    pub bound: Option<Vec<f64>>,
    /// Square grids `half_i = half_j`.
    pub half: Option<Vec<usize>>,
    pub truncation: Option<Vec<f64>>,
    /// Keep this velocity spacing while the truncation varies.
    pub fixed_dy: Option<f64>,
    pub mc_dt: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    /// Multiple of the combined standard error.
    pub sigma: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { abs: 0.01, rel: 0.0, sigma: 3.0 }
    }
}

impl Tolerance {
    /// Largest accepted difference.
    pub fn allowed(&self, reference: f64, stderr: f64) -> f64 {
        self.abs.max(self.rel * reference.abs()).max(self.sigma * stderr)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    #[serde(flatten)]
    pub default: Tolerance,
    /// Per-quantity overrides keyed by preset label.
    pub quantity: BTreeMap<String, Tolerance>,
}

impl Tolerances {
    pub fn for_quantity(&self, label: &str) -> Tolerance {
        self.quantity.get(label).copied().unwrap_or(self.default)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub target: Target,
    pub output_dir: PathBuf,
    pub methods: Vec<Route>,
    /// Write horizon traces of transient quantities.
    pub trace: bool,
    /// Points of the MC traces.
    pub trace_points: usize,
    pub oscillator: OscillatorSection,
    pub grid: GridSection,
    pub solver: SolverSection,
    pub mc: McConfig,
    pub cycles: CycleConfig,
    pub quantity: Vec<QuantityEntry>,
    pub sweep: SweepSection,
    pub tolerances: Tolerances,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            target: Target::Custom,
            output_dir: PathBuf::from("results"),
            methods: vec![Route::Pde],
            trace: false,
            trace_points: 20,
            oscillator: OscillatorSection::default(),
            grid: GridSection::default(),
            solver: SolverSection::default(),
            mc: McConfig::default(),
            cycles: CycleConfig::default(),
            quantity: vec![],
            sweep: SweepSection::default(),
            tolerances: Tolerances::default(),
        }
    }
}

const TABLE_BOUNDS: [f64; 10] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Setup of a named experiment at desk scale.
    pub fn for_target(target: Target) -> Self {
        use RegimeTag::*;
        let mut cfg = Self { target, output_dir: PathBuf::from(target.tag()), ..Default::default() };
        let long = |p: &str| QuantityEntry::new(p, LongRun, None);
        let at4 = |p: &str| QuantityEntry::new(p, Transient, Some(vec![4.0]));
        let mut rel = |q: &str, rel: f64| {
            cfg.tolerances.quantity.insert(q.into(), Tolerance { abs: 0.0, rel, sigma: 3.0 });
        };
        match target {
            Target::Table1 => {
                rel("E3-plastic", 0.05);
                cfg.quantity = vec![long("E1"), long("E3-plastic")];
                cfg.sweep.bound = Some(TABLE_BOUNDS.to_vec());
                cfg.mc.horizon = 200.0;
                cfg.mc.burn_in = 5.0;
                cfg.mc.paths = 1000;
            }
            Target::Table2 => {
                rel("E3'", 0.05);
                cfg.oscillator.kind = OscillatorKind::Obstacle;
                cfg.quantity = vec![long("E2'"), long("E3'")];
                cfg.sweep.bound = Some(TABLE_BOUNDS.to_vec());
                cfg.mc.horizon = 200.0;
                cfg.mc.burn_in = 5.0;
                cfg.mc.paths = 1000;
            }
            Target::Tabemper => {
                cfg.methods = vec![Route::Mc];
                cfg.mc.paths = 100_000;
                cfg.quantity = vec![
                    QuantityEntry::new("E1", Transient, Some(vec![2.0, 4.0, 8.0, 16.0, 32.0, 64.0])),
                    QuantityEntry::new("E3-plastic", LongRun, Some(vec![10.0, 20.0, 40.0, 80.0, 160.0, 200.0])),
                ];
                cfg.sweep.mc_dt = Some(vec![1e-2, 1e-3, 1e-4]);
            }
            Target::Fig2 => {
                cfg.trace = true;
                cfg.quantity = vec![at4("E1"), at4("E2")];
                cfg.sweep.mode = SweepMode::Separate;
                cfg.sweep.truncation = Some(vec![0.75, 1.5, 2.25, 2.625]);
                cfg.sweep.fixed_dy = Some(0.0075);
                cfg.sweep.half = Some(vec![25, 50, 100, 200, 400, 800]);
            }
            Target::Fig3 => {
                rel("E4-energy", 0.10);
                cfg.trace = true;
                cfg.methods = vec![Route::Pde, Route::Mc];
                cfg.quantity =
                    ["E1", "E4-plastic", "E2", "E4-energy", "E3-plastic", "E3-total"].into_iter().map(at4).collect();
            }
            Target::Fig4 => {
                cfg.trace = true;
                cfg.methods = vec![Route::Pde, Route::Mc];
                cfg.oscillator.kind = OscillatorKind::Obstacle;
                cfg.quantity = vec![at4("E2'"), at4("E3'")];
            }
            Target::Custom => {}
        }
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.oscillator.params(self.oscillator.bound)?;
        if !(self.solver.dt > 0.0 && self.solver.lambda > 0.0) {
            return bad("solver dt and lambda must be positive".into());
        }
        if self.grid.half_i == 0 || self.grid.half_j == 0 || !(self.grid.truncation > 0.0) {
            return bad("grid half counts and truncation must be positive".into());
        }
        self.mc.validate()?;
        if !self.quantity.is_empty() && self.methods.is_empty() {
            return bad("no estimation method selected".into());
        }
        for q in &self.quantity {
            let name = q.preset_name()?;
            if name.oscillator() != self.oscillator.kind {
                return bad(format!("preset {name} does not apply to the {} oscillator", self.oscillator.kind));
            }
            if q.horizon.as_ref().is_some_and(|h| h.is_empty() || h.iter().any(|&t| !(t >= 0.0))) {
                return bad(format!("horizon list of {name} must be non-empty and non-negative"));
            }
            let horizon = q.horizon.as_ref().map_or(self.mc.horizon, |h| h[0]);
            q.spec(&self.oscillator.params(self.oscillator.bound)?, self.solver.lambda, horizon)?;
        }
        let s = &self.sweep;
        let empty = [s.bound.as_ref().map(Vec::len), s.half.as_ref().map(Vec::len), s.truncation.as_ref().map(Vec::len), s.mc_dt.as_ref().map(Vec::len)];
        if empty.contains(&Some(0)) {
            return bad("sweep lists must be non-empty".into());
        }
        if let Some(b) = &s.bound {
            for &v in b {
                self.oscillator.params(v)?;
            }
        }
        if s.half.as_ref().is_some_and(|h| h.contains(&0)) || s.truncation.as_ref().is_some_and(|t| t.iter().any(|&v| !(v > 0.0))) {
            return bad("swept grid sizes and truncations must be positive".into());
        }
        if s.mc_dt.as_ref().is_some_and(|d| d.iter().any(|&v| !(v > 0.0))) || s.fixed_dy.is_some_and(|d| !(d > 0.0)) {
            return bad("swept time steps and fixed dy must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_target_is_valid() {
        for t in Target::ALL {
            let cfg = ExperimentConfig::for_target(t);
            cfg.validate().unwrap();
            assert_eq!(t.tag().parse::<Target>().unwrap(), t);
        }
    }

    #[test]
    fn toml_round_trip() {
        let cfg = ExperimentConfig::for_target(Target::Table1);
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn minimal_file() {
        let cfg = ExperimentConfig::from_toml_str(
            r#"
            methods = ["pde", "mc"]

            [oscillator]
            bound = 0.5

            [[quantity]]
            preset = "E1"
            regime = "long-run"

            [sweep]
            bound = [0.2, 0.5]
            "#,
        )
        .unwrap();
        assert_eq!(cfg.methods, vec![Route::Pde, Route::Mc]);
        assert_eq!(cfg.quantity[0].regime, RegimeTag::LongRun);
        assert_eq!(cfg.grid, GridSection::default());
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = [
            "[[quantity]]\npreset = \"E9\"",
            "[[quantity]]\npreset = \"E2'\"",
            "[sweep]\nbound = []",
            "[[quantity]]\npreset = \"E4-plastic\"\nregime = \"long-run\"",
            "[grid]\nhalf_i = 0",
            "unknown = 1",
        ];
        for text in bad {
            assert!(ExperimentConfig::from_toml_str(text).is_err(), "{text}");
        }
    }

    #[test]
    fn tolerance_takes_the_loosest_bound() {
        let t = Tolerance { abs: 0.01, rel: 0.05, sigma: 3.0 };
        assert_eq!(t.allowed(1.0, 0.001), 0.05);
        assert_eq!(t.allowed(0.1, 0.01), 0.03);
        assert_eq!(t.allowed(0.1, 0.0), 0.01);
    }
}
