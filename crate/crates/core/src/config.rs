//! JSON run configuration shared by the CLI subcommands.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::drive::{
    resonance_frequency, DriveKind, DriveSpec, ModelParams, Resonance, SignConvention,
};
use crate::ensemble::{CavityPrepKind, EnsembleSpec};
use crate::integrator::IntegratorConfig;
use crate::output::config_hash;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveConfig {
    pub kind: DriveKind,
    pub g0: f64,
    /// Defaults to the anti-JC sum frequency ω0 + ωq.
    #[serde(default)]
    pub omega_g: Option<f64>,
    #[serde(default)]
    pub phi_x: f64,
    #[serde(default)]
    pub phi_y: f64,
    #[serde(default = "one")]
    pub eta: f64,
    #[serde(default)]
    pub sign_convention: SignConvention,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_abs_tol")]
    pub abs_tol: f64,
    #[serde(default)]
    pub max_step: Option<f64>,
    #[serde(default)]
    pub initial_step: Option<f64>,
    #[serde(default = "default_renorm")]
    pub renormalize_threshold: f64,
    /// Defaults to 8/g0.
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default = "default_n_points")]
    pub n_points: usize,
}

fn default_rel_tol() -> f64 {
    1e-9
}
fn default_abs_tol() -> f64 {
    1e-11
}
fn default_renorm() -> f64 {
    1e3
}
fn default_n_points() -> usize {
    401
}

impl Default for IntegratorSection {
    fn default() -> Self {
        Self {
            rel_tol: default_rel_tol(),
            abs_tol: default_abs_tol(),
            max_step: None,
            initial_step: None,
            renormalize_threshold: default_renorm(),
            t_end: None,
            n_points: default_n_points(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    #[serde(default = "default_n_samples")]
    pub n_samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_range")]
    pub cavity_mean_range: [f64; 2],
    #[serde(default)]
    pub cavity_prep_kind: CavityPrepKind,
    #[serde(default = "default_threshold")]
    pub convergence_threshold: f64,
    #[serde(default = "default_keep")]
    pub keep_trajectories: usize,
    /// Keep every n-th sample of retained trajectories.
    #[serde(default = "default_decimate")]
    pub decimate: usize,
}

fn default_n_samples() -> usize {
    1000
}
fn default_range() -> [f64; 2] {
    [0.0, 5.0]
}
fn default_threshold() -> f64 {
    -0.99
}
fn default_keep() -> usize {
    20
}
fn default_decimate() -> usize {
    4
}

impl Default for EnsembleSection {
    fn default() -> Self {
        Self {
            n_samples: default_n_samples(),
            seed: 0,
            cavity_mean_range: default_range(),
            cavity_prep_kind: CavityPrepKind::default(),
            convergence_threshold: default_threshold(),
            keep_trajectories: default_keep(),
            decimate: default_decimate(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelParams,
    pub drive: DriveConfig,
    #[serde(default)]
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub ensemble: EnsembleSection,
    #[serde(default = "default_out")]
    pub output_dir: String,
}

fn default_out() -> String {
    "out".into()
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config: {0}")]
    Parse(String),
    #[error("config override `{0}`: expected key.path=value")]
    Override(String),
    #[error("config: {0}")]
    Invalid(#[from] crate::Error),
}

impl RunConfig {
    /// Parse, apply `key.path=value` overrides, and validate.
    pub fn load(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let cfg = if overrides.is_empty() {
            cfg
        } else {
            let mut v = serde_json::to_value(&cfg).expect("config serializes");
            for o in overrides {
                apply_override(&mut v, o)?;
            }
            serde_json::from_value(v).map_err(|e| ConfigError::Parse(e.to_string()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.model.validate()?;
        self.drive_spec().validate()?;
        self.integrator_config().validate()?;
        if self.integrator.t_end.is_none() && !(self.drive.g0 > 0.0) {
            return Err(
                crate::error::invalid("integrator.t_end", "required when drive.g0 = 0").into(),
            );
        }
        if self.integrator.n_points < 2 {
            return Err(crate::error::invalid("integrator.n_points", "must be >= 2").into());
        }
        Ok(())
    }

    pub fn drive_spec(&self) -> DriveSpec {
        let d = &self.drive;
        DriveSpec {
            kind: d.kind,
            g0: d.g0,
            omega_g: d
                .omega_g
                .unwrap_or_else(|| resonance_frequency(&self.model, Resonance::AntiJc)),
            phi_x: d.phi_x,
            phi_y: d.phi_y,
            eta: d.eta,
            sign_convention: d.sign_convention,
        }
    }

    pub fn t_end(&self) -> f64 {
        self.integrator.t_end.unwrap_or(8.0 / self.drive.g0)
    }

    pub fn integrator_config(&self) -> IntegratorConfig {
        let s = &self.integrator;
        IntegratorConfig {
            rel_tol: s.rel_tol,
            abs_tol: s.abs_tol,
            max_step: s.max_step,
            initial_step: s.initial_step,
            renormalize_threshold: s.renormalize_threshold,
            sample_times: vec![],
        }
        .with_linspace(self.t_end(), s.n_points)
    }

    pub fn ensemble_spec(&self) -> EnsembleSpec {
        let e = &self.ensemble;
        EnsembleSpec {
            n_samples: e.n_samples,
            seed: e.seed,
            cavity_mean_range: e.cavity_mean_range,
            cavity_prep_kind: e.cavity_prep_kind,
            convergence_threshold: e.convergence_threshold,
            keep_trajectories: e.keep_trajectories,
            ..EnsembleSpec::new(self.model, self.drive_spec())
        }
        .with_integrator(self.integrator_config())
    }

    /// Compact JSON of the resolved config with `output_dir` blanked, so
    /// the hash identifies the physics and not where the files went.
    pub fn canonical_json(&self) -> String {
        let c = Self {
            output_dir: String::new(),
            ..self.clone()
        };
        serde_json::to_string(&c).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        config_hash(self.canonical_json().as_bytes())
    }

    /// Desk-scale instanton setting: ω0 = ωq = 5, g0 = 0.05 at the
    /// sum-frequency resonance, n_max = 30.
    pub fn default_text() -> &'static str {
        r#"{
  "model": { "omega_0": 5.0, "omega_q": 5.0, "n_max": 30, "qubit_term": "as_printed" },
  "drive": { "kind": "circular_pt", "g0": 0.05, "sign_convention": "exp_minus" },
  "integrator": { "rel_tol": 1e-9, "abs_tol": 1e-11, "renormalize_threshold": 1000.0, "n_points": 401 },
  "ensemble": { "n_samples": 1000, "seed": 0, "cavity_mean_range": [0.0, 5.0], "cavity_prep_kind": "coherent",
                "convergence_threshold": -0.99, "keep_trajectories": 20, "decimate": 4 },
  "output_dir": "out"
}
"#
    }
}

impl EnsembleSpec {
    pub fn with_integrator(self, integrator: IntegratorConfig) -> Self {
        Self { integrator, ..self }
    }
}

fn apply_override(root: &mut Value, spec: &str) -> Result<(), ConfigError> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| ConfigError::Override(spec.into()))?;
    let value: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(ConfigError::Override(spec.into()));
    }
    let mut cur = root;
    for k in &keys[..keys.len() - 1] {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| ConfigError::Override(spec.into()))?;
        cur = obj
            .entry(k.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    let obj = cur
        .as_object_mut()
        .ok_or_else(|| ConfigError::Override(spec.into()))?;
    obj.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}
