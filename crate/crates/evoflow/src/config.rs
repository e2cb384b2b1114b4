//! Versioned JSON run configuration.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "model": { "dim": 3, "k0": 1.0, "schedule": { "kind": "ricci_flow" } },
//!   "certificate": "auto",
//!   "experiment": { "checkpoints": [0.2], "moment_orders": [1, 2, 3] },
//!   "sim": { "n_paths": 100000, "dt": 0.001, "backend": "ambient_exact" }
//! }
//! ```
//!
//! Unknown keys anywhere are rejected.

use std::path::Path;

use evoflow_core::bounds::{Certificate, CertificateOrigin};
use evoflow_core::geometry::{DriftSpec, EvolvingModel, ModelSpace, ScaleSchedule};
use evoflow_core::simulate::{Backend, SimConfig, SpherePolicy};
use serde::{Deserialize, Serialize};

use crate::error::AppError;

pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable consulted for the seed when neither the command
/// line nor the config provides one.
pub const SEED_ENV: &str = "EVOFLOW_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub model: ModelConfig,
    #[serde(default)]
    pub certificate: CertificateConfig,
    #[serde(default)]
    pub experiment: ExperimentConfig,
    #[serde(default)]
    pub sim: SimSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub dim: u32,
    #[serde(default)]
    pub k0: f64,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub drift: DriftConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleConfig {
    Constant { scale: f64 },
    RicciFlow {},
    Tabulated { times: Vec<f64>, scales: Vec<f64> },
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self::Constant { scale: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftConfig {
    Zero {},
    Constant {
        b: f64,
    },
    Tabulated {
        times: Vec<f64>,
        values: Vec<f64>,
    },
}

impl Default for DriftConfig {
    fn default() -> Self {
        Self::Zero {}
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AutoTag {
    Auto,
}

/// `"auto"` or an explicit `{ "nu": .., "lambda": .., "horizon": .. }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CertificateConfig {
    Auto(AutoTag),
    Explicit(ExplicitCertificate),
}

impl Default for CertificateConfig {
    fn default() -> Self {
        Self::Auto(AutoTag::Auto)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitCertificate {
    pub nu: f64,
    pub lambda: f64,
    /// Omitted or `null` means unbounded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
}

impl ExplicitCertificate {
    pub fn to_certificate(&self) -> Result<Certificate, AppError> {
        let horizon = self.horizon.unwrap_or(f64::INFINITY);
        Ok(Certificate::new(
            self.nu,
            self.lambda,
            horizon,
            CertificateOrigin::UserSupplied,
        )?)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Starting base-space radius.
    pub r0: f64,
    pub checkpoints: Vec<f64>,
    pub moment_orders: Vec<u32>,
    pub thetas: Vec<f64>,
    /// Exponential weights given as `ϑΛ(t)`, converted per checkpoint.
    pub theta_loads: Vec<f64>,
    pub tail_radii: Vec<f64>,
    pub exit_radii: Vec<f64>,
    pub check_qv: bool,
    /// Also report tightness checks for moments (bounds expected sharp).
    pub expect_tight: bool,
}

/// The `sim` block; `seed` stays optional so precedence can be resolved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub n_paths: usize,
    pub dt: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub backend: Backend,
    pub record_sup: bool,
    pub sphere_policy: SpherePolicy,
    pub level: f64,
}

impl Default for SimSection {
    fn default() -> Self {
        let d = SimConfig::default();
        Self {
            n_paths: d.n_paths,
            dt: d.dt,
            seed: None,
            backend: d.backend,
            record_sup: d.record_sup,
            sphere_policy: d.sphere_policy,
            level: d.level,
        }
    }
}

impl SimSection {
    pub fn to_core(&self, seed: u64) -> SimConfig {
        SimConfig {
            n_paths: self.n_paths,
            dt: self.dt,
            seed,
            backend: self.backend,
            record_sup: self.record_sup,
            sphere_policy: self.sphere_policy,
            level: self.level,
        }
    }
}

impl ModelConfig {
    pub fn build(&self) -> Result<EvolvingModel, AppError> {
        let space = ModelSpace::new(self.dim, self.k0)?;
        let schedule = match &self.schedule {
            ScheduleConfig::Constant { scale } => ScaleSchedule::Constant { scale: *scale },
            ScheduleConfig::RicciFlow {} => ScaleSchedule::RicciFlow,
            ScheduleConfig::Tabulated { times, scales } => {
                ScaleSchedule::tabulated(times.clone(), scales.clone())?
            }
        };
        let drift = match &self.drift {
            DriftConfig::Zero {} => DriftSpec::Zero,
            DriftConfig::Constant { b } => DriftSpec::Constant { b: *b },
            DriftConfig::Tabulated { times, values } => DriftSpec::Tabulated {
                times: times.clone(),
                values: values.clone(),
            },
        };
        Ok(EvolvingModel::new(space, schedule, drift)?)
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, AppError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| AppError::Config(format!("invalid JSON: {e}")))?;
        // A manifest carries the resolved config under "config".
        let value = match value {
            serde_json::Value::Object(mut map) if map.contains_key("manifest_version") => map
                .remove("config")
                .ok_or_else(|| AppError::Config("manifest has no config block".into()))?,
            other => other,
        };
        let version = value.get("schema_version").and_then(serde_json::Value::as_u64);
        match version {
            Some(v) if v == u64::from(SCHEMA_VERSION) => {}
            Some(v) => {
                return Err(AppError::Config(format!(
                    "unsupported schema_version {v} (expected {SCHEMA_VERSION})"
                )))
            }
            None => return Err(AppError::Config("missing schema_version".into())),
        }
        serde_json::from_value(value).map_err(|e| AppError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, AppError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AppError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Seed precedence: command line, then config, then `EVOFLOW_SEED`, then 0.
    pub fn resolve_seed(&self, cli: Option<u64>) -> Result<u64, AppError> {
        if let Some(seed) = cli.or(self.sim.seed) {
            return Ok(seed);
        }
        match std::env::var(SEED_ENV) {
            Ok(text) => text
                .trim()
                .parse()
                .map_err(|_| AppError::Config(format!("{SEED_ENV}={text} is not a u64"))),
            Err(_) => Ok(0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SPHERE: &str = r#"{
        "schema_version": 1,
        "model": { "dim": 3, "k0": 1.0, "schedule": { "kind": "ricci_flow" } },
        "certificate": "auto",
        "experiment": { "checkpoints": [0.2], "moment_orders": [1, 2] },
        "sim": { "n_paths": 100, "backend": "ambient_exact" }
    }"#;

    #[test]
    fn parses_minimal_config() {
        let cfg = RunConfig::from_json(SPHERE).unwrap();
        assert_eq!(cfg.certificate, CertificateConfig::default());
        assert_eq!(cfg.sim.backend, Backend::AmbientExact);
        assert_eq!(cfg.sim.dt, 1e-3);
        let model = cfg.model.build().unwrap();
        assert_eq!(model.horizon(), 0.25);
    }

    #[test]
    fn explicit_certificate_without_horizon_is_unbounded() {
        let text = SPHERE.replace(r#""auto""#, r#"{ "nu": 3, "lambda": -4 }"#);
        let cfg = RunConfig::from_json(&text).unwrap();
        let CertificateConfig::Explicit(c) = cfg.certificate else {
            panic!("expected explicit certificate");
        };
        assert_eq!(c.to_certificate().unwrap().horizon(), f64::INFINITY);
    }

    #[test]
    fn rejects_unknown_keys_and_versions() {
        for bad in [
            SPHERE.replace(r#""dim": 3"#, r#""dim": 3, "dimm": 3"#),
            SPHERE.replace(r#""n_paths": 100"#, r#""n_path": 100"#),
            SPHERE.replace(r#""kind": "ricci_flow""#, r#""kind": "ricci_flow", "rate": 1"#),
            SPHERE.replace(r#""dim": 3,"#, r#""dim": 3, "drift": { "kind": "zero", "b": 1 },"#),
            SPHERE.replace(r#""auto""#, r#""automatic""#),
            SPHERE.replace(r#""schema_version": 1"#, r#""schema_version": 2"#),
            SPHERE.replace(r#""schema_version": 1,"#, ""),
        ] {
            assert!(matches!(RunConfig::from_json(&bad), Err(AppError::Config(_))), "{bad}");
        }
    }

    #[test]
    fn seed_precedence() {
        let mut cfg = RunConfig::from_json(SPHERE).unwrap();
        assert_eq!(cfg.resolve_seed(Some(5)).unwrap(), 5);
        cfg.sim.seed = Some(9);
        assert_eq!(cfg.resolve_seed(Some(5)).unwrap(), 5);
        assert_eq!(cfg.resolve_seed(None).unwrap(), 9);
    }

    #[test]
    fn round_trips_through_json() {
        let cfg = RunConfig::from_json(SPHERE).unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::from_json(&text).unwrap(), cfg);
    }
}
