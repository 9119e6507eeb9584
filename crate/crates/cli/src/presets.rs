//! Named experiments and the resolution of a [`RunConfig`] into an
//! [`Experiment`].

use std::path::PathBuf;

use dck_core::solvers::{ControlBounds, Continuation, ProblemSpec, StateBound, UnconstrainedMethod};
use dck_core::{Region, ScalarFn};

use crate::config::{ConfigError, Domain, LevelRange, Method, RunConfig};

pub const PRESETS: &[(&str, &str)] = &[
    ("ex31-2d", "pentagon, nu = 1, target 1, unconstrained"),
    ("ex32-nusweep", "pentagon, target |x|^2, unconstrained, nu from 1e4 down to 0"),
    ("ex3d", "cube, nu = 1, target 1, unconstrained"),
    ("cc-2d", "pentagon, nu = 1, target 1, u <= 0.16"),
    ("cc-3d", "cube, nu = 1, target 1, u <= 0.16"),
    ("nu0-bangbang", "pentagon, nu = 0, target +-1 split at x1 = 0.25, -1.2 <= u <= 0.16"),
    ("sc-2d", "pentagon, nu = 1, target 1, y <= 0.15 on a ball, continuation to gamma 1e9"),
    ("sc-direct-gamma", "as sc-2d but solved at gamma 1e9 from u = 0 on each level"),
    ("cs-2d", "sc-2d plus u <= 0.16, continuation to gamma 1e8"),
    ("multiplier-zoom", "sc-2d followed by re-solves at gamma 1e9 .. 1e15 on the finest mesh"),
];

/// What to run on the level ladder.
#[derive(Debug, Clone, PartialEq)]
pub enum Mode {
    /// One solve per level; nested warm starts when control bounds are present.
    Levels,
    /// One unconstrained solve per level and value of `ν`.
    NuSweep(Vec<f64>),
    /// Penalized solves at a fixed `γ` on every level.
    FixedGamma(f64),
    /// Moreau–Yosida continuation over the level ladder.
    Continuation,
    /// Continuation followed by re-solves on the finest mesh.
    GammaLadder(Vec<f64>),
}

/// A fully resolved run.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub name: String,
    pub domain: Domain,
    pub levels: LevelRange,
    pub spec: ProblemSpec,
    pub mode: Mode,
    pub method: UnconstrainedMethod,
    pub out: PathBuf,
    pub csv: bool,
    pub vtk: bool,
}

pub fn ball() -> Region {
    Region::Ball {
        center: [-0.1, -0.1, 0.0],
        radius: 0.2,
    }
}

fn upper(v: f64) -> Option<ControlBounds> {
    Some(ControlBounds {
        lower: None,
        upper: Some(ScalarFn::constant(v)),
    })
}

fn state_bound() -> Option<StateBound> {
    Some(StateBound {
        region: ball(),
        upper: ScalarFn::constant(0.15),
        shift: ScalarFn::constant(0.0),
    })
}

fn continuation(gamma_max: f64) -> Continuation {
    Continuation {
        gamma_max: Some(gamma_max),
        c_rd: 0.05,
        ..Continuation::default()
    }
}

/// Base configuration of a preset.
pub fn preset(name: &str) -> Result<RunConfig, ConfigError> {
    let one = Some(ScalarFn::constant(1.0));
    let mut c = RunConfig {
        preset: Some(name.to_string()),
        domain: Some(Domain::Pentagon),
        nu: Some(1.0),
        target: one,
        ..RunConfig::default()
    };
    let levels = |a, b| Some(LevelRange { first: a, last: b });
    match name {
        "ex31-2d" => c.levels = levels(1, 8),
        "ex32-nusweep" => {
            c.levels = levels(7, 9);
            c.target = Some(ScalarFn::SquaredNorm);
            c.nu_values = Some(vec![1e4, 1e2, 1.0, 1e-2, 1e-4, 1e-6, 0.0]);
        }
        "ex3d" => {
            c.domain = Some(Domain::Cube);
            c.levels = levels(1, 5);
        }
        "cc-2d" => {
            c.levels = levels(1, 8);
            c.control_bounds = upper(0.16);
        }
        "cc-3d" => {
            c.domain = Some(Domain::Cube);
            c.levels = levels(1, 4);
            c.control_bounds = upper(0.16);
        }
        "nu0-bangbang" => {
            c.levels = levels(1, 8);
            c.nu = Some(0.0);
            c.target = Some(ScalarFn::Step {
                axis: 0,
                threshold: 0.25,
                below: -1.0,
                above: 1.0,
            });
            c.control_bounds = Some(ControlBounds {
                lower: Some(ScalarFn::constant(-1.2)),
                upper: Some(ScalarFn::constant(0.16)),
            });
        }
        "sc-2d" => {
            c.levels = levels(1, 8);
            c.state_bound = state_bound();
            c.continuation = Some(continuation(1e9));
        }
        "sc-direct-gamma" => {
            c.levels = levels(7, 8);
            c.state_bound = state_bound();
            c.gamma = Some(1e9);
        }
        "cs-2d" => {
            c.levels = levels(1, 8);
            c.state_bound = state_bound();
            c.control_bounds = upper(0.16);
            c.continuation = Some(continuation(1e8));
        }
        "multiplier-zoom" => {
            c.levels = levels(1, 8);
            c.state_bound = state_bound();
            c.continuation = Some(continuation(1e9));
            c.gamma_ladder = Some((9..=15).map(|k| 10f64.powi(k)).collect());
        }
        _ => return Err(ConfigError::UnknownPreset(name.to_string())),
    }
    Ok(c)
}

fn overlay(base: RunConfig, top: RunConfig) -> RunConfig {
    macro_rules! pick {
        ($($f:ident),*) => {
            RunConfig { $($f: top.$f.or(base.$f)),* }
        };
    }
    pick!(
        preset,
        domain,
        levels,
        nu,
        target,
        control_bounds,
        state_bound,
        continuation,
        tolerances,
        nu_values,
        gamma,
        gamma_ladder,
        method,
        out,
        csv,
        vtk,
        seed
    )
}

/// Resolves a configuration: the preset named in `flags` or `file` supplies
/// the base, then `file` and finally `flags` override it field by field.
pub fn resolve(file: RunConfig, flags: RunConfig) -> Result<Experiment, ConfigError> {
    let name = flags.preset.clone().or_else(|| file.preset.clone());
    let base = match &name {
        Some(n) => preset(n)?,
        None => RunConfig::default(),
    };
    let c = overlay(overlay(base, file), flags);
    let missing = |what: &str| ConfigError::Invalid(format!("`{what}` is required without a preset"));
    let domain = c.domain.ok_or_else(|| missing("domain"))?;
    let levels = c.levels.ok_or_else(|| missing("levels"))?;
    if domain == Domain::Pentagon && levels.first == 0 {
        return Err(ConfigError::Invalid("pentagon meshes start at level 1".into()));
    }
    if domain == Domain::Cube && levels.last > 6 {
        return Err(ConfigError::Invalid("cube meshes are limited to level 6".into()));
    }
    let spec = ProblemSpec {
        nu: c.nu.ok_or_else(|| missing("nu"))?,
        target: c.target.ok_or_else(|| missing("target"))?,
        control_bounds: c.control_bounds,
        state_bound: c.state_bound,
        continuation: c.continuation.unwrap_or_default(),
        tolerances: c.tolerances.unwrap_or_default(),
    };
    spec.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;

    let constrained = spec.control_bounds.is_some() || spec.state_bound.is_some();
    let exclusive = [c.nu_values.is_some(), c.gamma.is_some(), c.gamma_ladder.is_some()];
    if exclusive.iter().filter(|&&b| b).count() > 1 {
        return Err(ConfigError::Invalid(
            "nu_values, gamma and gamma_ladder are mutually exclusive".into(),
        ));
    }
    let mode = if let Some(v) = c.nu_values {
        if constrained {
            return Err(ConfigError::Invalid("nu_values requires an unconstrained problem".into()));
        }
        if v.iter().any(|&nu| !(nu >= 0.0 && nu.is_finite())) {
            return Err(ConfigError::Invalid("nu_values must be finite and >= 0".into()));
        }
        Mode::NuSweep(v)
    } else if let Some(g) = c.gamma {
        if spec.state_bound.is_none() {
            return Err(ConfigError::Invalid("gamma requires a state bound".into()));
        }
        if !(g > 0.0 && g.is_finite()) {
            return Err(ConfigError::Invalid(format!("gamma must be finite and > 0, got {g}")));
        }
        Mode::FixedGamma(g)
    } else if let Some(g) = c.gamma_ladder {
        if spec.state_bound.is_none() {
            return Err(ConfigError::Invalid("gamma_ladder requires a state bound".into()));
        }
        if g.is_empty() || g.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(ConfigError::Invalid("gamma_ladder needs finite values > 0".into()));
        }
        Mode::GammaLadder(g)
    } else if spec.state_bound.is_some() {
        Mode::Continuation
    } else {
        Mode::Levels
    };
    let method = match c.method.unwrap_or_default() {
        Method::ReducedPcg => UnconstrainedMethod::ReducedPcg,
        Method::KktDirect => UnconstrainedMethod::KktDirect,
    };
    let name = name.unwrap_or_else(|| "custom".to_string());
    Ok(Experiment {
        out: c.out.unwrap_or_else(|| PathBuf::from("out").join(&name)),
        name,
        domain,
        levels,
        spec,
        mode,
        method,
        csv: c.csv.unwrap_or(true),
        vtk: c.vtk.unwrap_or(false),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_resolves() {
        for (name, _) in PRESETS {
            let flags = RunConfig {
                preset: Some(name.to_string()),
                ..Default::default()
            };
            let e = resolve(RunConfig::default(), flags).unwrap();
            assert_eq!(e.name, *name);
        }
    }

    #[test]
    fn modes_follow_the_data() {
        let mode = |n: &str| {
            resolve(
                RunConfig {
                    preset: Some(n.into()),
                    ..Default::default()
                },
                RunConfig::default(),
            )
            .unwrap()
            .mode
        };
        assert_eq!(mode("ex3d"), Mode::Levels);
        assert_eq!(mode("cc-2d"), Mode::Levels);
        assert_eq!(mode("sc-2d"), Mode::Continuation);
        assert_eq!(mode("cs-2d"), Mode::Continuation);
        assert_eq!(mode("sc-direct-gamma"), Mode::FixedGamma(1e9));
        assert!(matches!(mode("multiplier-zoom"), Mode::GammaLadder(g) if g.len() == 7));
        assert!(matches!(mode("ex32-nusweep"), Mode::NuSweep(v) if v.len() == 7 && v[6] == 0.0));
    }

    #[test]
    fn flags_override_file_and_file_overrides_preset() {
        let file = RunConfig {
            preset: Some("ex3d".into()),
            levels: Some(LevelRange { first: 1, last: 2 }),
            nu: Some(0.5),
            ..Default::default()
        };
        let flags = RunConfig {
            levels: Some(LevelRange { first: 2, last: 3 }),
            ..Default::default()
        };
        let e = resolve(file, flags).unwrap();
        assert_eq!(e.domain, Domain::Cube);
        assert_eq!(e.levels, LevelRange { first: 2, last: 3 });
        assert_eq!(e.spec.nu, 0.5);
    }

    #[test]
    fn unknown_preset_and_missing_fields_are_errors() {
        let named = |n: &str| RunConfig {
            preset: Some(n.into()),
            ..Default::default()
        };
        assert!(matches!(
            resolve(named("nope"), RunConfig::default()),
            Err(ConfigError::UnknownPreset(_))
        ));
        assert!(matches!(
            resolve(RunConfig::default(), RunConfig::default()),
            Err(ConfigError::Invalid(_))
        ));
    }

    #[test]
    fn invalid_spec_is_a_config_error() {
        let file = RunConfig {
            preset: Some("cc-2d".into()),
            nu: Some(-1.0),
            ..Default::default()
        };
        assert!(matches!(resolve(file, RunConfig::default()), Err(ConfigError::Invalid(_))));
    }
}
