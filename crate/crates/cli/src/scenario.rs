//! Scenario files: one JSON object per experiment, strictly parsed.

use serde::{Deserialize, Deserializer};
use shocklab::conservation::StateU;
use shocklab::foliation::FoliationSpec;
use shocklab::fourier::FourierSeries;
use shocklab::grid::UniformGrid;
use shocklab::integral_geometry::PlanarField;
use shocklab::PotentialSpec;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error("{0}")]
    Missing(String),
    #[error("{path}: {message}")]
    Value { path: String, message: String },
}

fn value_err(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Value {
        path: path.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    ShockScan,
    DivergenceCheck,
    PdeResidual,
    Lemma1,
    Theorem2,
    ConservationCheck,
    ExtractAndScan,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::ShockScan => "shock-scan",
            Command::DivergenceCheck => "divergence-check",
            Command::PdeResidual => "pde-residual",
            Command::Lemma1 => "lemma1",
            Command::Theorem2 => "theorem2",
            Command::ConservationCheck => "conservation-check",
            Command::ExtractAndScan => "extract-and-scan",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub command: Command,
    #[serde(default)]
    pub potential: PotentialSpec,
    #[serde(default)]
    pub foliation: Option<FoliationSpec>,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub pde_residual: Option<PdeSection>,
    #[serde(default)]
    pub lemma1: Option<Lemma1Section>,
    #[serde(default)]
    pub theorem2: Option<Theorem2Section>,
    #[serde(default)]
    pub conservation: Option<ConservationSection>,
    #[serde(default)]
    pub extract: Option<ExtractSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    pub dt: f64,
    pub horizon: f64,
    pub grids: Grids,
    pub tolerances: Tolerances,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            horizon: 10.0,
            grids: Grids::default(),
            tolerances: Tolerances::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Grids {
    pub p: Option<UniformGrid>,
    pub t: Option<UniformGrid>,
    pub n_q: usize,
    pub levels: usize,
}

impl Default for Grids {
    fn default() -> Self {
        Self {
            p: None,
            t: None,
            n_q: 64,
            levels: 3,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub divergence: f64,
    pub min_order: f64,
    pub charpoly: f64,
    pub transport: f64,
    pub level: f64,
    pub round_trip: f64,
    pub cs_slack: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            divergence: 1e-3,
            min_order: 1.9,
            charpoly: 1e-9,
            transport: 1e-10,
            level: 1e-10,
            round_trip: 1e-8,
            cs_slack: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeSection {
    pub t: f64,
}

fn default_radii() -> usize {
    401
}

fn default_angles() -> usize {
    256
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lemma1Section {
    pub field: PlanarField,
    pub c: f64,
    pub r0: f64,
    pub r1: f64,
    #[serde(default = "default_radii")]
    pub n_radii: usize,
    #[serde(default = "default_angles")]
    pub n_angular: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum ListOrRange {
    List(Vec<f64>),
    Range(UniformGrid),
}

fn list_or_range<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
    Ok(match ListOrRange::deserialize(d)? {
        ListOrRange::List(v) => v,
        ListOrRange::Range(g) => {
            g.validate().map_err(serde::de::Error::custom)?;
            g.points()
        }
    })
}

fn default_n_beta() -> usize {
    64
}

fn default_alpha_cap() -> f64 {
    64.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Theorem2Section {
    pub cutoff: f64,
    #[serde(deserialize_with = "list_or_range")]
    pub alpha_grid: Vec<f64>,
    #[serde(default = "default_n_beta")]
    pub n_beta: usize,
    /// Defaults to 3T.
    #[serde(default)]
    pub forward_horizon: Option<f64>,
    /// Defaults to `numerics.horizon`.
    #[serde(default)]
    pub backward_horizon: Option<f64>,
    /// Step for the backward scan; defaults to `numerics.dt`.
    #[serde(default)]
    pub backward_dt: Option<f64>,
    #[serde(default = "default_alpha_cap")]
    pub alpha_cap: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConservationSection {
    pub ns: Vec<usize>,
    pub random_states: usize,
    pub state: StateU,
    pub gamma: f64,
    pub n_q: usize,
    pub p_range: UniformGrid,
}

impl Default for ConservationSection {
    fn default() -> Self {
        Self {
            ns: vec![2, 4, 6],
            random_states: 100,
            state: default_state(),
            gamma: 0.5,
            n_q: 64,
            p_range: UniformGrid {
                start: -2.0,
                end: 2.0,
                count: 64,
            },
        }
    }
}

/// `u0 = 0.3`, `u1 = 1.5 + 0.1 cos 2πq`, `u2 = 0.1 sin 2πq`.
pub fn default_state() -> StateU {
    StateU {
        n: 2,
        u0: 0.3,
        components: vec![
            FourierSeries::constant(1.5).with_mode(1, 0.1, 0.0),
            FourierSeries::default().with_mode(1, 0.0, 0.1),
        ],
    }
}

fn default_extract_nq() -> usize {
    64
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractSection {
    pub state: StateU,
    #[serde(deserialize_with = "list_or_range")]
    pub levels: Vec<f64>,
    #[serde(default = "default_extract_nq")]
    pub n_q: usize,
}

/// Parses a scenario, reporting schema errors with their JSON path.
pub fn parse(text: &str) -> Result<Scenario, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let scenario: Scenario =
        serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Schema {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
    scenario.validate()?;
    Ok(scenario)
}

fn positive(path: &str, x: f64) -> Result<(), ConfigError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(value_err(
            path,
            format!("must be positive and finite, got {x}"),
        ))
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let n = &self.numerics;
        positive("numerics.dt", n.dt)?;
        positive("numerics.horizon", n.horizon)?;
        if n.grids.levels < 2 {
            return Err(value_err("numerics.grids.levels", "must be at least 2"));
        }
        if n.grids.n_q < 4 {
            return Err(value_err("numerics.grids.n_q", "must be at least 4"));
        }
        for (path, v) in [
            ("numerics.tolerances.divergence", n.tolerances.divergence),
            ("numerics.tolerances.min_order", n.tolerances.min_order),
            ("numerics.tolerances.charpoly", n.tolerances.charpoly),
            ("numerics.tolerances.transport", n.tolerances.transport),
            ("numerics.tolerances.level", n.tolerances.level),
            ("numerics.tolerances.round_trip", n.tolerances.round_trip),
            ("numerics.tolerances.cs_slack", n.tolerances.cs_slack),
        ] {
            positive(path, v)?;
        }
        for (path, g) in [
            ("numerics.grids.p", &n.grids.p),
            ("numerics.grids.t", &n.grids.t),
        ] {
            if let Some(g) = g {
                g.validate().map_err(|e| value_err(path, e.to_string()))?;
            }
        }
        if let Some(s) = &self.lemma1 {
            positive("lemma1.c", s.c)?;
            positive("lemma1.r0", s.r0)?;
            positive("lemma1.r1", s.r1)?;
            if s.r1 <= s.r0 {
                return Err(value_err("lemma1.r1", "must exceed r0"));
            }
        }
        if let Some(s) = &self.theorem2 {
            positive("theorem2.cutoff", s.cutoff)?;
            positive("theorem2.alpha_cap", s.alpha_cap)?;
            for (path, v) in [
                ("theorem2.forward_horizon", s.forward_horizon),
                ("theorem2.backward_horizon", s.backward_horizon),
                ("theorem2.backward_dt", s.backward_dt),
            ] {
                if let Some(v) = v {
                    positive(path, v)?;
                }
            }
            if s.alpha_grid.is_empty() {
                return Err(value_err("theorem2.alpha_grid", "must not be empty"));
            }
        }
        if let Some(s) = &self.conservation {
            if !(s.gamma > 0.0 && s.gamma < 1.0) {
                return Err(value_err("conservation.gamma", "must lie in (0, 1)"));
            }
            if let Some(bad) = s.ns.iter().find(|n| **n < 2 || **n % 2 == 1) {
                return Err(value_err(
                    "conservation.ns",
                    format!("{bad} is not an even n ≥ 2"),
                ));
            }
            s.state
                .validate()
                .map_err(|e| value_err("conservation.state", e.to_string()))?;
        }
        if let Some(s) = &self.extract {
            s.state
                .validate()
                .map_err(|e| value_err("extract.state", e.to_string()))?;
            if s.levels.is_empty() {
                return Err(value_err("extract.levels", "must not be empty"));
            }
        }
        Ok(())
    }

    pub fn foliation(&self) -> Result<&FoliationSpec, ConfigError> {
        self.foliation.as_ref().ok_or_else(|| {
            ConfigError::Missing(format!("{} needs `foliation`", self.command.as_str()))
        })
    }

    pub fn grid(&self, which: &str) -> Result<UniformGrid, ConfigError> {
        let g = match which {
            "p" => self.numerics.grids.p,
            _ => self.numerics.grids.t,
        };
        g.ok_or_else(|| {
            ConfigError::Missing(format!(
                "{} needs `numerics.grids.{which}`",
                self.command.as_str()
            ))
        })
    }

    pub fn section<'a, T>(&self, s: &'a Option<T>, name: &str) -> Result<&'a T, ConfigError> {
        s.as_ref().ok_or_else(|| {
            ConfigError::Missing(format!("{} needs `{name}`", self.command.as_str()))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_scenario_uses_defaults() {
        let s = parse(r#"{"command": "conservation-check"}"#).unwrap();
        assert_eq!(s.command, Command::ConservationCheck);
        assert_eq!(s.numerics.dt, 1e-3);
        assert!(s.potential.is_zero());
    }

    #[test]
    fn unknown_keys_are_rejected_with_path() {
        let err = parse(r#"{"command": "shock-scan", "numerics": {"dtt": 0.1}}"#).unwrap_err();
        match err {
            ConfigError::Schema { path, message } => {
                assert_eq!(path, "numerics.dtt");
                assert!(message.contains("dtt"), "{message}");
            }
            e => panic!("{e:?}"),
        }
        assert!(parse(r#"{"command": "shock-scan", "extra": 1}"#).is_err());
        assert!(parse(r#"{"command": "fly"}"#).is_err());
    }

    #[test]
    fn nonpositive_numbers_are_rejected() {
        let err = parse(r#"{"command": "shock-scan", "numerics": {"dt": 0}}"#).unwrap_err();
        assert!(err.to_string().starts_with("numerics.dt"));
    }

    #[test]
    fn alpha_grid_accepts_range() {
        let s = parse(
            r#"{"command": "theorem2", "theorem2": {"cutoff": 1, "alpha_grid": {"start": -1, "end": 1, "count": 5}}}"#,
        )
        .unwrap();
        assert_eq!(
            s.theorem2.unwrap().alpha_grid,
            vec![-1.0, -0.5, 0.0, 0.5, 1.0]
        );
    }
}
