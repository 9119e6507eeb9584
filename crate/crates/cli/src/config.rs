//! JSON run configuration.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use dck_core::solvers::{ControlBounds, Continuation, StateBound, Tolerances};
use dck_core::ScalarFn;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unknown preset `{0}` (see `dck presets`)")]
    UnknownPreset(String),
    #[error("invalid level range `{0}`: expected `a..b` with 0 <= a <= b <= {max}", max = LevelRange::MAX)]
    Levels(String),
    #[error("{0}")]
    Invalid(String),
}

/// Inclusive range of refinement levels. Level `l` is the mesh with `2^l`
/// intervals per unit of the structured grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LevelRange {
    pub first: usize,
    pub last: usize,
}

impl LevelRange {
    pub const MAX: usize = 10;

    pub fn new(first: usize, last: usize) -> Result<Self, ConfigError> {
        if first > last || last > Self::MAX {
            return Err(ConfigError::Levels(format!("{first}..{last}")));
        }
        Ok(LevelRange { first, last })
    }

    pub fn count(&self) -> usize {
        self.last - self.first + 1
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> {
        self.first..=self.last
    }
}

impl FromStr for LevelRange {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ConfigError::Levels(s.to_string());
        let (a, b) = match s.split_once("..") {
            Some((a, b)) => (a, b.strip_prefix('=').unwrap_or(b)),
            None => (s, s),
        };
        let a = a.trim().parse().map_err(|_| err())?;
        let b = b.trim().parse().map_err(|_| err())?;
        LevelRange::new(a, b).map_err(|_| err())
    }
}

impl fmt::Display for LevelRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.first, self.last)
    }
}

impl Serialize for LevelRange {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for LevelRange {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    /// The pentagon with vertices (−0.5,−0.5), (0.5,−0.5), (0.5,0), (0,0.5), (−0.5,0.5).
    Pentagon,
    /// The cube (−½,½)³.
    Cube,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    ReducedPcg,
    KktDirect,
}

/// Contents of a `--config` file. Every field is optional; values given here
/// override the preset, and command-line flags override both.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub preset: Option<String>,
    pub domain: Option<Domain>,
    pub levels: Option<LevelRange>,
    pub nu: Option<f64>,
    pub target: Option<ScalarFn>,
    pub control_bounds: Option<ControlBounds>,
    pub state_bound: Option<StateBound>,
    pub continuation: Option<Continuation>,
    pub tolerances: Option<Tolerances>,
    /// Solve the unconstrained problem once per value of `ν`.
    pub nu_values: Option<Vec<f64>>,
    /// Solve the penalized problem at this `γ` on every level, without
    /// continuation.
    pub gamma: Option<f64>,
    /// After the continuation, re-solve on the finest mesh at each `γ`.
    pub gamma_ladder: Option<Vec<f64>>,
    pub method: Option<Method>,
    pub out: Option<PathBuf>,
    pub csv: Option<bool>,
    pub vtk: Option<bool>,
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_range_parsing() {
        assert_eq!("1..3".parse::<LevelRange>().unwrap(), LevelRange { first: 1, last: 3 });
        assert_eq!("2..=4".parse::<LevelRange>().unwrap(), LevelRange { first: 2, last: 4 });
        assert_eq!("5".parse::<LevelRange>().unwrap(), LevelRange { first: 5, last: 5 });
        assert!("3..1".parse::<LevelRange>().is_err());
        assert!("1..11".parse::<LevelRange>().is_err());
        assert!("a..b".parse::<LevelRange>().is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_json(r#"{"preset": "ex3d", "nuu": 1}"#).is_err());
    }

    #[test]
    fn full_config_parses() {
        let c = RunConfig::from_json(
            r#"{
                "domain": "pentagon",
                "levels": "1..4",
                "nu": 1.0,
                "target": {"kind": "constant", "value": 1.0},
                "control_bounds": {"upper": {"kind": "constant", "value": 0.16}},
                "state_bound": {
                    "region": {"kind": "ball", "center": [-0.1, -0.1, 0.0], "radius": 0.2},
                    "upper": {"kind": "constant", "value": 0.15}
                },
                "continuation": {"gamma0": 1, "tau": 10, "gamma_max": 1e6, "c_rd": 0.05, "n_max": 30},
                "tolerances": {"pcg_rel_tol": 1e-12},
                "method": "kkt_direct",
                "vtk": true
            }"#,
        )
        .unwrap();
        assert_eq!(c.levels, Some(LevelRange { first: 1, last: 4 }));
        assert_eq!(c.tolerances.unwrap().pcg_rel_tol, 1e-12);
        assert_eq!(c.tolerances.unwrap().max_newton_penalized, 40);
        assert_eq!(c.method, Some(Method::KktDirect));
    }
}
