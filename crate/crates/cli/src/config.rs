//! Run configuration: one JSON file per run, patched by command-line flags.

use std::collections::BTreeMap;
use std::path::Path;

use bornlab::catalog::{gaussian_packet, harmonic_eigenstate, hydrogen_state, superpose, CatalogState, Model, Potential};
use bornlab::experiments::{DoubleSlitConfig, GridSpec, DEFAULT_DOUBLE_SLIT};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    ListStates,
    Evolve,
    Expect,
    MadelungCheck,
    DoubleSlit,
    Moments,
    Uncertainty,
    Sample,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::ListStates => "list-states",
            Command::Evolve => "evolve",
            Command::Expect => "expect",
            Command::MadelungCheck => "madelung-check",
            Command::DoubleSlit => "double-slit",
            Command::Moments => "moments",
            Command::Uncertainty => "uncertainty",
            Command::Sample => "sample",
        }
    }

    fn needs_state(self) -> bool {
        !matches!(self, Command::ListStates | Command::DoubleSlit)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    /// Electron around a fixed proton in atomic units.
    Hydrogen,
    Harmonic { masses: Vec<f64>, body_dims: usize, hbar: f64, omega: f64 },
    Free { masses: Vec<f64>, body_dims: usize, hbar: f64 },
}

impl ModelSpec {
    pub fn build(&self) -> bornlab::Result<Model> {
        match self {
            ModelSpec::Hydrogen => Ok(Model::hydrogen()),
            ModelSpec::Harmonic { masses, body_dims, hbar, omega } => {
                Model::harmonic(masses.clone(), *body_dims, *hbar, *omega)
            }
            ModelSpec::Free { masses, body_dims, hbar } => Model::free(masses.clone(), *body_dims, *hbar),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    /// `[re, im]`.
    pub coefficient: [f64; 2],
    pub state: StateSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    Hydrogen { n: i64, l: i64, m: i64 },
    /// Oscillator eigenstate; the frequency comes from the model.
    Harmonic { quanta: Vec<i64> },
    Gaussian { center: Vec<f64>, sigma: f64, k0: Vec<f64> },
    Superposition { terms: Vec<Term> },
}

impl StateSpec {
    pub fn build(&self, model: &Model) -> bornlab::Result<CatalogState> {
        match self {
            StateSpec::Hydrogen { n, l, m } => hydrogen_state(*n, *l, *m),
            StateSpec::Harmonic { quanta } => match model.potential() {
                Potential::Harmonic { omega } => harmonic_eigenstate(quanta, *omega, model),
                other => Err(bornlab::Error::InvalidParameter(format!(
                    "harmonic eigenstates need a harmonic model, got `{}`",
                    other.label()
                ))),
            },
            StateSpec::Gaussian { center, sigma, k0 } => gaussian_packet(center, *sigma, k0, model),
            StateSpec::Superposition { terms } => {
                let coeffs: Vec<C64> = terms.iter().map(|t| C64::new(t.coefficient[0], t.coefficient[1])).collect();
                let states = terms.iter().map(|t| t.state.build(model)).collect::<bornlab::Result<Vec<_>>>()?;
                superpose(&coeffs, &states)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodSpec {
    /// Exact phases for eigen-superpositions, split-step otherwise.
    #[default]
    Auto,
    Analytic,
    SplitStep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionSpec {
    pub dt: f64,
    pub steps: usize,
    #[serde(default = "one")]
    pub stride: usize,
    #[serde(default)]
    pub method: MethodSpec,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSpec {
    pub samples: usize,
    #[serde(default = "default_bins")]
    pub bins: usize,
}

fn default_bins() -> usize {
    50
}

impl Default for SamplingSpec {
    fn default() -> Self {
        Self { samples: 100_000, bins: default_bins() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Write `fields.csv` (one row per cell).
    #[serde(default = "yes")]
    pub fields: bool,
}

fn yes() -> bool {
    true
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { fields: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Output subdirectory; defaults to the command name.
    #[serde(default)]
    pub name: Option<String>,
    pub command: Command,
    #[serde(default)]
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub state: Option<StateSpec>,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub evolution: Option<EvolutionSpec>,
    #[serde(default)]
    pub double_slit: Option<DoubleSlitConfig>,
    #[serde(default)]
    pub sampling: Option<SamplingSpec>,
    #[serde(default)]
    pub k_max: Option<u32>,
    #[serde(default)]
    pub body: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output: OutputSpec,
    /// Per-check tolerance overrides, keyed by check name.
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
}

impl RunConfig {
    pub fn run_name(&self) -> &str {
        self.name.as_deref().unwrap_or(self.command.as_str())
    }

    fn validate(&self) -> Result<(), CliError> {
        let missing = |what: &str| CliError::Config(format!("command `{}` needs `{what}`", self.command.as_str()));
        if self.command.needs_state() {
            self.model.as_ref().ok_or_else(|| missing("model"))?;
            self.state.as_ref().ok_or_else(|| missing("state"))?;
            self.grid.as_ref().ok_or_else(|| missing("grid"))?;
        }
        if self.command == Command::Evolve {
            self.evolution.as_ref().ok_or_else(|| missing("evolution"))?;
        }
        if self.command == Command::Sample && self.seed.is_none() {
            return Err(missing("seed"));
        }
        if let Some(name) = &self.name {
            if name.is_empty() || name.contains(['/', '\\']) || name == "." || name == ".." {
                return Err(CliError::Config(format!("run name `{name}` is not a plain directory name")));
            }
        }
        Ok(())
    }
}

/// Sets `path` (dot-separated, numeric segments index arrays) to `value`,
/// creating missing objects on the way. Under `tolerances` the rest of the
/// path is one check name, since check names contain dots.
fn set_path(root: &mut Value, path: &str, value: Value) -> Result<(), CliError> {
    let bad = |why: &str| CliError::Config(format!("override `{path}`: {why}"));
    if path.is_empty() {
        return Err(bad("empty key"));
    }
    let mut node = root;
    let segments: Vec<&str> = match path.split_once('.') {
        Some(("tolerances", check)) => vec!["tolerances", check],
        _ => path.split('.').collect(),
    };
    for (i, seg) in segments.iter().enumerate() {
        if seg.is_empty() {
            return Err(bad("empty path segment"));
        }
        let last = i + 1 == segments.len();
        if node.is_null() {
            *node = Value::Object(Default::default());
        }
        node = match node {
            Value::Object(map) => {
                if last {
                    map.insert(seg.to_string(), value);
                    return Ok(());
                }
                map.entry(seg.to_string()).or_insert(Value::Null)
            }
            Value::Array(items) => {
                let idx: usize = seg.parse().map_err(|_| bad(&format!("`{seg}` does not index an array")))?;
                let len = items.len();
                let slot = items.get_mut(idx).ok_or_else(|| bad(&format!("index {idx} out of range for length {len}")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(bad(&format!("`{seg}` is inside a scalar"))),
        };
    }
    unreachable!("the last segment returns")
}

/// Reads the config file (if any), applies flag overrides and validates.
/// Flags win over file values.
pub fn parse_config(
    path: Option<&Path>,
    command: Option<Command>,
    seed: Option<u64>,
    overrides: &[String],
) -> Result<RunConfig, CliError> {
    let mut value = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", p.display())))?;
            serde_json::from_str::<Value>(&text)
                .map_err(|e| CliError::Config(format!("config {} is not valid JSON: {e}", p.display())))?
        }
        None => Value::Object(Default::default()),
    };
    if !value.is_object() {
        return Err(CliError::Config("config must be a JSON object".into()));
    }
    if let Some(c) = command {
        value["command"] = Value::String(c.as_str().into());
    }
    if let Some(s) = seed {
        value["seed"] = Value::from(s);
    }
    if value.get("command").and_then(Value::as_str) == Some(Command::DoubleSlit.as_str()) && value.get("double_slit").is_none() {
        value["double_slit"] = serde_json::from_str(DEFAULT_DOUBLE_SLIT).expect("committed default parses");
    }
    for o in overrides {
        let (key, raw) = o
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override `{o}` is not of the form key=value")))?;
        let parsed = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        set_path(&mut value, key.trim(), parsed)?;
    }
    let config: RunConfig = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        CliError::Config(format!("at `{path}`: {}", e.into_inner()))
    })?;
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    const HYDROGEN: &str = r#"{
        "command": "expect",
        "model": {"kind": "hydrogen"},
        "state": {"kind": "hydrogen", "n": 2, "l": 1, "m": 1},
        "grid": {"extents": [[-20, 20], [-20, 20], [-20, 20]], "points": [32, 32, 32]}
    }"#;

    #[test]
    fn minimal_hydrogen_config() {
        let f = file(HYDROGEN);
        let c = parse_config(Some(f.path()), None, None, &[]).unwrap();
        assert_eq!(c.command, Command::Expect);
        assert_eq!(c.run_name(), "expect");
        assert_eq!(c.state, Some(StateSpec::Hydrogen { n: 2, l: 1, m: 1 }));
    }

    #[test]
    fn unknown_key_is_named() {
        let f = file(r#"{"command": "expect", "potental": 1}"#);
        let err = parse_config(Some(f.path()), None, None, &[]).unwrap_err().to_string();
        assert!(err.contains("potental"), "{err}");
        let f = file(&HYDROGEN.replace("\"n\": 2", "\"n\": 2, \"spin\": 1"));
        let err = parse_config(Some(f.path()), None, None, &[]).unwrap_err().to_string();
        assert!(err.contains("state") && err.contains("spin"), "{err}");
    }

    #[test]
    fn flag_overrides_win() {
        let f = file(&HYDROGEN.replace("\"command\": \"expect\"", "\"command\": \"evolve\", \"evolution\": {\"dt\": 0.1, \"steps\": 4}"));
        let c = parse_config(Some(f.path()), None, Some(9), &["evolution.dt=0.05".into(), "grid.points.0=16".into()]).unwrap();
        assert_eq!(c.evolution.unwrap().dt, 0.05);
        assert_eq!(c.grid.unwrap().points, vec![16, 32, 32]);
        assert_eq!(c.seed, Some(9));
        let c = parse_config(Some(f.path()), None, None, &["tolerances.energy.identity=1e-9".into()]).unwrap();
        assert_eq!(c.tolerances.get("energy.identity"), Some(&1e-9));
        let c = parse_config(Some(f.path()), Some(Command::Expect), None, &["name=h211".into()]).unwrap();
        assert_eq!(c.command, Command::Expect);
        assert_eq!(c.run_name(), "h211");
    }

    #[test]
    fn bad_inputs() {
        let f = file(HYDROGEN);
        for o in ["evolution", "grid.points.7=1", "=3", "grid..x=1"] {
            assert!(parse_config(Some(f.path()), None, None, &[o.into()]).is_err(), "{o}");
        }
        let err = parse_config(Some(f.path()), Some(Command::Sample), None, &[]).unwrap_err();
        assert!(err.to_string().contains("seed"));
        let err = parse_config(Some(f.path()), Some(Command::Evolve), None, &[]).unwrap_err();
        assert!(err.to_string().contains("evolution"));
        assert!(parse_config(Some(f.path()), None, None, &["name=../x".into()]).is_err());
        let err = parse_config(Some(f.path()), None, None, &["grid.points=\"many\"".into()]).unwrap_err();
        assert!(err.to_string().contains("grid.points"), "{err}");
        assert!(parse_config(None, None, None, &[]).is_err());
    }

    #[test]
    fn list_states_needs_nothing() {
        let c = parse_config(None, Some(Command::ListStates), None, &[]).unwrap();
        assert_eq!(c.command, Command::ListStates);
    }

    #[test]
    fn double_slit_gets_default_geometry() {
        let c = parse_config(None, Some(Command::DoubleSlit), None, &["double_slit.steps=10".into()]).unwrap();
        let ds = c.double_slit.unwrap();
        assert_eq!(ds.steps, 10);
        assert_eq!(ds.grid, DoubleSlitConfig::default_config().grid);
    }
}
