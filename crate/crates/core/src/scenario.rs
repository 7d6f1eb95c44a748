//! Scenario files: a TOML document with `params`, `initial`, `solver`,
//! `sweeps`, `sensitivity`, `surface`, `run` and `provenance` sections.
//!
//! `params`, `initial` and `solver` are required. `params.vartheta` must be
//! given explicitly because no published value exists. The remaining sections
//! may be omitted; each omitted key falls back to a documented default and is
//! listed in [`LoadedScenario::defaulted`] so that run manifests can flag it.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ModelParams, Param, State};
use crate::sensitivity::ParamRange;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("scenario {origin}: {message}")]
    Parse { origin: String, message: String },
    #[error(
        "scenario {origin}: `params.vartheta` is required; it has no published value and must be \
         set explicitly (an assumed value such as 0.002 per day)"
    )]
    MissingVartheta { origin: String },
    #[error("scenario field `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error("override `{spec}`: {message} (expected section.key=value, e.g. params.u=0.5)")]
    Override { spec: String, message: String },
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    /// Fractional orders; the first entry is used by single-run commands.
    pub alpha: Vec<f64>,
    pub t_end: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Order used by the control and psi/theta sweeps.
    pub alpha: f64,
    pub u: Vec<f64>,
    pub psi: Vec<f64>,
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensitivitySection {
    pub samples: usize,
    pub metric: String,
    pub ranges: Vec<ParamRange>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceSection {
    pub x: ParamRange,
    pub y: ParamRange,
    pub nx: usize,
    pub ny: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProvenanceSection {
    /// Keys whose values are assumptions rather than published values.
    #[serde(default)]
    pub assumed: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub params: ModelParams,
    pub initial: State,
    pub solver: SolverSection,
    pub sweeps: SweepSection,
    pub sensitivity: SensitivitySection,
    pub surface: SurfaceSection,
    pub run: RunSection,
    #[serde(default)]
    pub provenance: ProvenanceSection,
}

pub const DEFAULT_ALPHAS: [f64; 6] = [0.75, 0.80, 0.85, 0.90, 0.95, 1.0];
pub const DEFAULT_CONTROL_GRID: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];
pub const DEFAULT_SWEEP_ALPHA: f64 = 0.95;
pub const DEFAULT_SAMPLES: usize = 2000;
pub const DEFAULT_SEED: u64 = 20240501;
/// Multiples of the baseline used for the default psi and theta grids.
pub const SWEEP_MULTIPLIERS: [f64; 5] = [0.5, 0.75, 1.0, 1.25, 1.5];
/// Half-width of the default Latin hypercube ranges, as a fraction of baseline.
pub const DEFAULT_RANGE_FRACTION: f64 = 0.5;

/// Parameters that enter the reproduction number, sampled by default
/// (those with a zero baseline other than `u` are skipped).
pub const R0_PARAMETERS: [Param; 8] = [
    Param::Xi,
    Param::Rho,
    Param::Vartheta,
    Param::U,
    Param::Eta,
    Param::Kappa,
    Param::Tau,
    Param::MuH,
];

/// Default sampling range: ±50% around the baseline, except `u`, whose
/// baseline of zero would give an empty range; it spans `[0, 1]`.
pub fn default_range(param: Param, base: &ModelParams) -> ParamRange {
    match param {
        Param::U => ParamRange {
            name: Param::U,
            low: 0.0,
            high: 1.0,
        },
        _ => ParamRange::around(param, base.get(param), DEFAULT_RANGE_FRACTION),
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweeps {
    alpha: Option<f64>,
    u: Option<Vec<f64>>,
    psi: Option<Vec<f64>>,
    theta: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSensitivity {
    samples: Option<usize>,
    metric: Option<String>,
    ranges: Option<Vec<ParamRange>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSurface {
    x: Option<ParamRange>,
    y: Option<ParamRange>,
    nx: Option<usize>,
    ny: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    seed: Option<u64>,
    output_dir: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    params: ModelParams,
    initial: State,
    solver: SolverSection,
    #[serde(default)]
    sweeps: RawSweeps,
    #[serde(default)]
    sensitivity: RawSensitivity,
    #[serde(default)]
    surface: RawSurface,
    #[serde(default)]
    run: RawRun,
    #[serde(default)]
    provenance: ProvenanceSection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    /// Keys filled from defaults rather than the file.
    pub defaulted: Vec<String>,
}

impl Scenario {
    /// Published parameters and initial state on the published grid
    /// (`t ∈ [0, 300]`, `h = 0.2`), with ϑ flagged as assumed.
    pub fn baseline() -> Self {
        let params = ModelParams::baseline();
        let raw = RawScenario {
            params,
            initial: State::baseline_initial(),
            solver: SolverSection {
                alpha: DEFAULT_ALPHAS.to_vec(),
                t_end: 300.0,
                step: 0.2,
            },
            sweeps: RawSweeps::default(),
            sensitivity: RawSensitivity::default(),
            surface: RawSurface::default(),
            run: RawRun::default(),
            provenance: ProvenanceSection {
                assumed: vec!["params.vartheta".into()],
            },
        };
        resolve(raw).scenario
    }

    /// Number of solver steps implied by `t_end` and `step`.
    pub fn step_count(&self) -> Result<usize, ScenarioError> {
        step_count(self.solver.t_end, self.solver.step)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes to TOML")
    }

    /// Keys the manifest should flag as assumptions.
    pub fn assumed_keys(&self) -> Vec<String> {
        let mut keys = vec!["params.vartheta".to_owned()];
        for k in &self.provenance.assumed {
            if !keys.contains(k) {
                keys.push(k.clone());
            }
        }
        keys
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.params
            .validate()
            .map_err(|e| invalid("params", e.to_string()))?;
        self.initial
            .validate()
            .map_err(|e| invalid("initial", e.to_string()))?;
        if self.initial.n_h() <= 0.0 {
            return Err(invalid("initial", "human population S + A + I + D must be positive"));
        }
        for (i, &a) in self.solver.alpha.iter().enumerate() {
            check_alpha(&format!("solver.alpha[{i}]"), a)?;
        }
        self.step_count()?;
        check_alpha("sweeps.alpha", self.sweeps.alpha)?;
        for (i, &u) in self.sweeps.u.iter().enumerate() {
            if !(0.0..=1.0).contains(&u) {
                return Err(invalid(format!("sweeps.u[{i}]"), format!("{u} is outside [0, 1]")));
            }
        }
        for (name, values) in [("psi", &self.sweeps.psi), ("theta", &self.sweeps.theta)] {
            for (i, &v) in values.iter().enumerate() {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(invalid(format!("sweeps.{name}[{i}]"), format!("{v} must be a finite rate >= 0")));
                }
            }
        }
        if self.sensitivity.samples < 2 {
            return Err(invalid("sensitivity.samples", "need at least 2 samples"));
        }
        if self.sensitivity.ranges.is_empty() {
            return Err(invalid("sensitivity.ranges", "need at least one range"));
        }
        for (i, r) in self.sensitivity.ranges.iter().enumerate() {
            r.validate()
                .map_err(|e| invalid(format!("sensitivity.ranges[{i}]"), e.to_string()))?;
            if self.sensitivity.ranges[..i].iter().any(|o| o.name == r.name) {
                return Err(invalid(format!("sensitivity.ranges[{i}]"), format!("`{}` listed twice", r.name)));
            }
        }
        for (field, r) in [("surface.x", &self.surface.x), ("surface.y", &self.surface.y)] {
            r.validate().map_err(|e| invalid(field, e.to_string()))?;
        }
        if self.surface.x.name == self.surface.y.name {
            return Err(invalid("surface.y", "must name a different parameter than surface.x"));
        }
        if self.surface.nx < 2 || self.surface.ny < 2 {
            return Err(invalid("surface.nx", "nx and ny must be at least 2"));
        }
        Ok(())
    }
}

fn check_alpha(field: &str, a: f64) -> Result<(), ScenarioError> {
    if a.is_finite() && a > 0.0 && a <= 1.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("order {a} is outside (0, 1]")))
    }
}

/// `M = round(t_end / step)`, requiring `|M step - t_end| < 1e-9 t_end`.
pub fn step_count(t_end: f64, step: f64) -> Result<usize, ScenarioError> {
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(invalid("solver.t_end", format!("{t_end} must be a finite time >= 0")));
    }
    if !(step.is_finite() && step > 0.0) {
        return Err(invalid("solver.step", format!("{step} must be a positive time")));
    }
    let m = (t_end / step).round();
    if (m * step - t_end).abs() > 1e-9 * t_end {
        return Err(invalid(
            "solver.step",
            format!("step {step} does not divide t_end {t_end} into a whole number of steps"),
        ));
    }
    Ok(m as usize)
}

fn resolve(raw: RawScenario) -> LoadedScenario {
    let params = raw.params;
    let mut defaulted = Vec::new();
    let scaled = |base: f64| -> Vec<f64> { SWEEP_MULTIPLIERS.iter().map(|m| round_sig(m * base)).collect() };

    let sweeps = SweepSection {
        alpha: or_default(&mut defaulted, "sweeps.alpha", raw.sweeps.alpha, || DEFAULT_SWEEP_ALPHA),
        u: or_default(&mut defaulted, "sweeps.u", raw.sweeps.u, || DEFAULT_CONTROL_GRID.to_vec()),
        psi: or_default(&mut defaulted, "sweeps.psi", raw.sweeps.psi, || scaled(params.psi)),
        theta: or_default(&mut defaulted, "sweeps.theta", raw.sweeps.theta, || scaled(params.theta)),
    };

    let sensitivity = SensitivitySection {
        samples: raw.sensitivity.samples.unwrap_or_else(|| {
            defaulted.push("sensitivity.samples".into());
            DEFAULT_SAMPLES
        }),
        metric: raw.sensitivity.metric.unwrap_or_else(|| {
            defaulted.push("sensitivity.metric".into());
            "r0".into()
        }),
        ranges: raw.sensitivity.ranges.unwrap_or_else(|| {
            defaulted.push("sensitivity.ranges".into());
            R0_PARAMETERS
                .iter()
                .filter(|&&p| p == Param::U || params.get(p) > 0.0)
                .map(|&p| default_range(p, &params))
                .collect()
        }),
    };
    let surface = SurfaceSection {
        x: raw.surface.x.unwrap_or_else(|| {
            defaulted.push("surface.x".into());
            default_range(Param::MuH, &params)
        }),
        y: raw.surface.y.unwrap_or_else(|| {
            defaulted.push("surface.y".into());
            default_range(Param::U, &params)
        }),
        nx: raw.surface.nx.unwrap_or_else(|| {
            defaulted.push("surface.nx".into());
            21
        }),
        ny: raw.surface.ny.unwrap_or_else(|| {
            defaulted.push("surface.ny".into());
            21
        }),
    };
    let run = RunSection {
        seed: raw.run.seed.unwrap_or_else(|| {
            defaulted.push("run.seed".into());
            DEFAULT_SEED
        }),
        output_dir: raw.run.output_dir.unwrap_or_else(|| {
            defaulted.push("run.output_dir".into());
            PathBuf::from("out")
        }),
    };
    LoadedScenario {
        scenario: Scenario {
            params,
            initial: raw.initial,
            solver: raw.solver,
            sweeps,
            sensitivity,
            surface,
            run,
            provenance: raw.provenance,
        },
        defaulted,
    }
}

/// Rounds to 12 significant digits so that scaled grids print cleanly.
fn round_sig(v: f64) -> f64 {
    format!("{v:.11e}").parse().unwrap_or(v)
}

fn or_default<T>(defaulted: &mut Vec<String>, key: &str, value: Option<T>, fallback: impl FnOnce() -> T) -> T {
    value.unwrap_or_else(|| {
        defaulted.push(key.to_owned());
        fallback()
    })
}

const SECTIONS: [&str; 8] = [
    "params",
    "initial",
    "solver",
    "sweeps",
    "sensitivity",
    "surface",
    "run",
    "provenance",
];

/// Applies `key=value` overrides to a parsed document. Bare parameter and
/// compartment names are accepted as shorthand for `params.*` and `initial.*`.
pub fn apply_overrides(doc: &mut toml::Table, overrides: &[String]) -> Result<(), ScenarioError> {
    for spec in overrides {
        let err = |message: &str| ScenarioError::Override {
            spec: spec.clone(),
            message: message.to_owned(),
        };
        let (key, value) = spec.split_once('=').ok_or_else(|| err("missing `=`"))?;
        let key = key.trim();
        let (section, field) = match key.split_once('.') {
            Some((s, f)) => (s.to_owned(), f.to_owned()),
            None if key.parse::<Param>().is_ok() => ("params".to_owned(), key.to_owned()),
            None if crate::model::COMPARTMENTS.contains(&key) => ("initial".to_owned(), key.to_owned()),
            None => return Err(err("unknown key")),
        };
        if !SECTIONS.contains(&section.as_str()) {
            return Err(err(&format!("unknown section `{section}`")));
        }
        let parsed = parse_value(value.trim()).map_err(|m| err(&m))?;
        let table = doc
            .entry(section.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        let table = table
            .as_table_mut()
            .ok_or_else(|| err(&format!("`{section}` is not a section")))?;
        table.insert(field, parsed);
    }
    Ok(())
}

fn parse_value(text: &str) -> Result<toml::Value, String> {
    let doc: toml::Table = format!("v = {text}")
        .parse()
        .or_else(|_| format!("v = \"{text}\"").parse())
        .map_err(|e: toml::de::Error| format!("cannot parse value: {}", e.message()))?;
    let value = doc.get("v").cloned().ok_or("empty value")?;
    Ok(value)
}

/// Parses and validates a scenario document.
pub fn parse_scenario_str(text: &str, origin: &str, overrides: &[String]) -> Result<LoadedScenario, ScenarioError> {
    let parse_err = |message: String| ScenarioError::Parse {
        origin: origin.to_owned(),
        message,
    };
    let mut doc: toml::Table = text.parse().map_err(|e: toml::de::Error| parse_err(e.to_string()))?;
    apply_overrides(&mut doc, overrides)?;
    promote_integers(&mut doc);
    let has_vartheta = doc
        .get("params")
        .and_then(|p| p.as_table())
        .is_some_and(|p| p.contains_key("vartheta"));
    if !has_vartheta {
        return Err(ScenarioError::MissingVartheta {
            origin: origin.to_owned(),
        });
    }
    let raw: RawScenario = toml::Value::Table(doc)
        .try_into()
        .map_err(|e: toml::de::Error| parse_err(e.to_string()))?;
    let loaded = resolve(raw);
    loaded.scenario.validate()?;
    Ok(loaded)
}

pub fn parse_scenario(path: &Path, overrides: &[String]) -> Result<LoadedScenario, ScenarioError> {
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_scenario_str(&text, &path.display().to_string(), overrides)
}

/// Float-valued fields written as integers (`Pi = 1000`) are accepted.
fn promote_integers(doc: &mut toml::Table) {
    const INTEGER_FIELDS: [&str; 5] = ["samples", "nx", "ny", "seed", "output_dir"];
    for (section, value) in doc.iter_mut() {
        let Some(table) = value.as_table_mut() else { continue };
        for (key, v) in table.iter_mut() {
            if section == "provenance" || INTEGER_FIELDS.contains(&key.as_str()) {
                continue;
            }
            promote(v);
        }
    }
}

fn promote(v: &mut toml::Value) {
    match v {
        toml::Value::Integer(i) => *v = toml::Value::Float(*i as f64),
        toml::Value::Array(items) => items.iter_mut().for_each(promote),
        toml::Value::Table(t) => {
            for (key, inner) in t.iter_mut() {
                if key != "name" {
                    promote(inner);
                }
            }
        }
        _ => {}
    }
}
