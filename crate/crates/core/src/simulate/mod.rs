//! Monte Carlo engines for the radial process.
//!
//! Two backends are provided. `RadialEuler` discretizes the radial SDE
//! `dρ = dβ + radial_drift(s, ρ) ds` directly in `g(s)` units. `AmbientExact`
//! uses `½Δ_{g(t)} = c(t)^{−2}·½Δ₀`: it samples static base-space Brownian
//! motion at the changed time `τ(t)` and rescales by `c(t)`, exactly for
//! `k0 = 0` and by a geodesic random walk on the embedded unit sphere or
//! hyperboloid otherwise.
//!
//! Each path draws from its own RNG stream (see [`rng`]), so a [`SampleSet`]
//! is a pure function of the inputs and the seed. [`Simulation::run_path`]
//! lets callers distribute paths over any number of workers.

mod engine;
mod estimate;
pub mod rng;

use alloc::string::String;
use alloc::vec::Vec;

use crate::bounds::Certificate;
use crate::error::domain;
use crate::geometry::EvolvingModel;
use crate::Result;

pub use engine::{realized_quadratic_variation, simulate_radial, simulate_sup_radial, Simulation};
pub use estimate::{
    estimate_exp_moment, estimate_moment, estimate_quadratic_variation, estimate_sup_tail, estimate_tail, MCEstimate,
    EXP_MOMENT_GUARD,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Backend {
    #[default]
    RadialEuler,
    AmbientExact,
}

/// What the radial scheme does when a sphere path overshoots the cut locus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SpherePolicy {
    /// Freeze the base radius at the cut locus and flag the path.
    #[default]
    StopAtCut,
    /// Reflect the overshoot back inside.
    ReflectInward,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct SimConfig {
    pub n_paths: usize,
    pub dt: f64,
    pub seed: u64,
    pub backend: Backend,
    pub record_sup: bool,
    pub sphere_policy: SpherePolicy,
    /// Confidence level of the intervals attached to estimates.
    pub level: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_paths: 10_000,
            dt: 1e-3,
            seed: 0,
            backend: Backend::RadialEuler,
            record_sup: false,
            sphere_policy: SpherePolicy::StopAtCut,
            level: 0.95,
        }
    }
}

impl SimConfig {
    pub fn new(n_paths: usize, dt: f64, seed: u64) -> Self {
        Self {
            n_paths,
            dt,
            seed,
            ..Self::default()
        }
    }

    pub fn with_backend(mut self, backend: Backend) -> Self {
        self.backend = backend;
        self
    }

    pub fn with_sup(mut self) -> Self {
        self.record_sup = true;
        self
    }

    pub fn with_sphere_policy(mut self, policy: SpherePolicy) -> Self {
        self.sphere_policy = policy;
        self
    }

    /// Checks the configuration against a terminal time `t`.
    pub fn validate(&self, t: f64) -> Result<()> {
        if self.n_paths == 0 {
            return Err(domain!("n_paths must be >= 1"));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(domain!("dt must be positive, got {}", self.dt));
        }
        if self.dt > t / 100.0 {
            return Err(domain!("dt = {} exceeds t/100 = {}", self.dt, t / 100.0));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(domain!("confidence level must lie in (0, 1), got {}", self.level));
        }
        Ok(())
    }
}

/// Final state of one path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathOutcome {
    /// `g(t)`-distance from the pole at the terminal time.
    pub radius: f64,
    /// Running maximum of `r_s(X_s)` over grid times, when recorded.
    pub sup_radius: Option<f64>,
    /// Realized quadratic variation of the martingale part (radial scheme).
    pub quadratic_variation: Option<f64>,
    /// Path reached the cut locus and was stopped there.
    pub stopped: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct SampleMeta {
    pub model_digest: u64,
    pub certificate: Option<Certificate>,
    pub t: f64,
    /// Starting base-space radius.
    pub r0: f64,
    pub config: SimConfig,
    pub rng_algorithm: String,
}

/// Per-path samples of a run; every array has length `n_paths`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub terminal_radii: Vec<f64>,
    pub sup_radii: Option<Vec<f64>>,
    pub quadratic_variation: Option<Vec<f64>>,
    pub stopped_flags: Vec<bool>,
    pub meta: SampleMeta,
}

impl SampleSet {
    /// Assembles outcomes in path order.
    pub fn from_outcomes(meta: SampleMeta, outcomes: &[PathOutcome]) -> Result<Self> {
        if outcomes.len() != meta.config.n_paths {
            return Err(domain!(
                "expected {} outcomes, got {}",
                meta.config.n_paths,
                outcomes.len()
            ));
        }
        let collect = |f: fn(&PathOutcome) -> Option<f64>| -> Option<Vec<f64>> {
            outcomes.iter().map(f).collect()
        };
        Ok(Self {
            terminal_radii: outcomes.iter().map(|o| o.radius).collect(),
            sup_radii: collect(|o| o.sup_radius),
            quadratic_variation: collect(|o| o.quadratic_variation),
            stopped_flags: outcomes.iter().map(|o| o.stopped).collect(),
            meta,
        })
    }

    pub fn len(&self) -> usize {
        self.terminal_radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terminal_radii.is_empty()
    }

    pub fn stopped_count(&self) -> usize {
        self.stopped_flags.iter().filter(|&&s| s).count()
    }

    /// Bare sample set around given radii, for estimator inputs.
    pub fn from_radii(radii: Vec<f64>, t: f64) -> Self {
        let n = radii.len();
        Self {
            stopped_flags: alloc::vec![false; n],
            terminal_radii: radii,
            sup_radii: None,
            quadratic_variation: None,
            meta: SampleMeta {
                model_digest: 0,
                certificate: None,
                t,
                r0: 0.0,
                config: SimConfig {
                    n_paths: n,
                    ..SimConfig::default()
                },
                rng_algorithm: String::from(rng::RNG_ALGORITHM),
            },
        }
    }
}

/// Validates the shared preconditions of every simulation entry point.
pub(crate) fn check_inputs(model: &EvolvingModel, r0: f64, t: f64, config: &SimConfig) -> Result<()> {
    if !(t > 0.0) {
        return Err(domain!("terminal time must be positive, got {t}"));
    }
    model.check_time(t)?;
    if !(r0 >= 0.0) || r0 >= model.base_cut_radius() {
        return Err(domain!("start radius {r0} outside [0, base cut locus)"));
    }
    config.validate(t)
}
