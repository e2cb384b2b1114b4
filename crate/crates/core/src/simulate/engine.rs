use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::estimate::{estimate_quadratic_variation, MCEstimate};
use super::rng::{path_rng, RNG_ALGORITHM};
use super::{check_inputs, Backend, PathOutcome, SampleMeta, SampleSet, SimConfig, SpherePolicy};
use crate::bounds::Certificate;
use crate::error::domain;
use crate::geometry::{EvolvingModel, Family};
use crate::math;
use crate::Result;

/// Half-width of the boundary layers, in units of `√dt`, inside which the
/// radial scheme switches from Euler steps to exact Bessel steps.
const BOUNDARY_LAYER_STEPS: f64 = 10.0;

/// A validated run: model, start radius, terminal time and configuration.
#[derive(Debug, Clone)]
pub struct Simulation<'a> {
    model: &'a EvolvingModel,
    r0: f64,
    t: f64,
    config: SimConfig,
    certificate: Option<Certificate>,
    steps: usize,
    h: f64,
}

impl<'a> Simulation<'a> {
    pub fn new(model: &'a EvolvingModel, r0: f64, t: f64, config: SimConfig) -> Result<Self> {
        check_inputs(model, r0, t, &config)?;
        let (steps, h) = match config.backend {
            Backend::RadialEuler => grid(t, config.dt),
            Backend::AmbientExact => {
                if !model.drift().is_zero() {
                    return Err(domain!("the ambient backend supports only driftless models"));
                }
                if config.record_sup {
                    return Err(domain!("running suprema need the radial_euler backend"));
                }
                let k = model.space().k0.abs();
                if k == 0.0 {
                    (1, model.time_change(t)?)
                } else {
                    grid(k * model.time_change(t)?, k * config.dt)
                }
            }
        };
        Ok(Self {
            model,
            r0,
            t,
            config,
            certificate: None,
            steps,
            h,
        })
    }

    /// Attaches the certificate the samples are meant to be checked against.
    pub fn with_certificate(mut self, cert: Certificate) -> Self {
        self.certificate = Some(cert);
        self
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn n_paths(&self) -> usize {
        self.config.n_paths
    }

    pub fn meta(&self) -> SampleMeta {
        SampleMeta {
            model_digest: self.model.digest(),
            certificate: self.certificate,
            t: self.t,
            r0: self.r0,
            config: self.config,
            rng_algorithm: String::from(RNG_ALGORITHM),
        }
    }

    /// Simulates path `index`; depends only on the inputs, the seed and `index`.
    pub fn run_path(&self, index: usize) -> PathOutcome {
        let mut rng = path_rng(self.config.seed, index as u64);
        match self.config.backend {
            Backend::RadialEuler => self.radial_path(&mut rng),
            Backend::AmbientExact => self.ambient_path(&mut rng),
        }
    }

    /// Runs every path sequentially.
    pub fn run(&self) -> Result<SampleSet> {
        let outcomes: Vec<PathOutcome> = (0..self.n_paths()).map(|i| self.run_path(i)).collect();
        self.collect(&outcomes)
    }

    /// Wraps outcomes produced by [`Simulation::run_path`], in path order.
    pub fn collect(&self, outcomes: &[PathOutcome]) -> Result<SampleSet> {
        SampleSet::from_outcomes(self.meta(), outcomes)
    }

    fn radial_path(&self, rng: &mut ChaCha8Rng) -> PathOutcome {
        let model = self.model;
        let m = model.space().dim as usize;
        let sphere = model.family() == Family::Sphere;
        let base_cut = model.base_cut_radius();
        let h = self.h;
        let sqrt_h = math::sqrt(h);
        let eps0 = BOUNDARY_LAYER_STEPS * math::sqrt(self.config.dt);

        let mut rho = model.scale_and_derivative(0.0).0 * self.r0;
        let mut sup = rho;
        let mut qv = 0.0;
        let mut stopped = false;
        for k in 0..self.steps {
            let t0 = h * k as f64;
            let t1 = if k + 1 == self.steps {
                self.t
            } else {
                h * (k + 1) as f64
            };
            let c1 = model.scale_and_derivative(t1).0;
            if stopped {
                rho = c1 * base_cut;
                sup = sup.max(rho);
                continue;
            }
            let cut0 = model.cut_locus_radius(t0);
            let cut1 = c1 * base_cut;
            let dist_to_cut = cut0 - rho;
            let xi1: f64 = rng.sample(StandardNormal);
            let mut next = if rho < eps0 && rho <= dist_to_cut {
                // Exact Bessel step for the (m−1)/(2ρ) part, Euler for the rest.
                let bessel = bessel_step(rho, sqrt_h, xi1, m, rng);
                qv += h * xi1 * xi1;
                bessel + h * model.drift_regular_at_origin(t0, rho)
            } else if sphere && dist_to_cut < eps0 {
                let bessel = bessel_step(dist_to_cut, sqrt_h, xi1, m, rng);
                qv += h * xi1 * xi1;
                cut1 - (bessel + h * model.drift_regular_at_cut(t0, dist_to_cut))
            } else {
                let drift = model.radial_drift_unchecked(t0, rho);
                qv += h * xi1 * xi1;
                rho + drift * h + sqrt_h * xi1
            };
            if next < 0.0 {
                next = -next;
            }
            if sphere && next >= cut1 {
                match self.config.sphere_policy {
                    SpherePolicy::StopAtCut => {
                        stopped = true;
                        next = cut1;
                    }
                    SpherePolicy::ReflectInward => next = (2.0 * cut1 - next).max(0.0),
                }
            }
            rho = next;
            sup = sup.max(rho);
        }
        PathOutcome {
            radius: rho,
            sup_radius: self.config.record_sup.then_some(sup),
            quadratic_variation: Some(qv),
            stopped,
        }
    }

    fn ambient_path(&self, rng: &mut ChaCha8Rng) -> PathOutcome {
        let model = self.model;
        let m = model.space().dim as usize;
        let c_t = model.scale_and_derivative(self.t).0;
        let k0 = model.space().k0;
        let base_radius = match model.family() {
            Family::Euclidean => {
                let xi1: f64 = rng.sample(StandardNormal);
                bessel_step(self.r0, math::sqrt(self.h), xi1, m, rng)
            }
            Family::Sphere => sphere_walk(self.r0 * math::sqrt(k0), self.steps, self.h, m, rng) / math::sqrt(k0),
            Family::Hyperbolic => {
                hyperboloid_walk(self.r0 * math::sqrt(-k0), self.steps, self.h, m, rng) / math::sqrt(-k0)
            }
        };
        PathOutcome {
            radius: c_t * base_radius,
            sup_radius: None,
            quadratic_variation: None,
            stopped: false,
        }
    }
}

/// Uniform grid of `ceil(span/dt)` steps covering `span`.
fn grid(span: f64, dt: f64) -> (usize, f64) {
    let steps = libm::ceil(span / dt * (1.0 - 1e-12)).max(1.0) as usize;
    (steps, span / steps as f64)
}

/// `|ρ e₁ + √h ξ|` for `ξ ~ N(0, I_m)` whose first coordinate is `xi1`.
fn bessel_step(rho: f64, sqrt_h: f64, xi1: f64, m: usize, rng: &mut ChaCha8Rng) -> f64 {
    let first = rho + sqrt_h * xi1;
    let mut sq = first * first;
    for _ in 1..m {
        let z: f64 = rng.sample(StandardNormal);
        sq += sqrt_h * sqrt_h * z * z;
    }
    math::sqrt(sq)
}

/// Geodesic random walk on the unit sphere `S^m ⊂ R^{m+1}`, started at
/// distance `a` from the pole `e₀`; returns the final distance.
fn sphere_walk(a: f64, steps: usize, h: f64, m: usize, rng: &mut ChaCha8Rng) -> f64 {
    let sqrt_h = math::sqrt(h);
    let mut x = vec![0.0; m + 1];
    x[0] = math::cos(a);
    x[1] = math::sin(a);
    let mut v = vec![0.0; m + 1];
    for _ in 0..steps {
        let mut dot = 0.0;
        for (vi, xi) in v.iter_mut().zip(&x) {
            *vi = rng.sample(StandardNormal);
            dot += *vi * xi;
        }
        let mut norm_sq = 0.0;
        for (vi, xi) in v.iter_mut().zip(&x) {
            *vi -= dot * xi;
            norm_sq += *vi * *vi;
        }
        let norm = math::sqrt(norm_sq);
        if norm == 0.0 {
            continue;
        }
        let s = sqrt_h * norm;
        let (cs, sn) = (math::cos(s), math::sin(s) / norm);
        let mut len_sq = 0.0;
        for (xi, vi) in x.iter_mut().zip(&v) {
            *xi = cs * *xi + sn * vi;
            len_sq += *xi * *xi;
        }
        let inv = 1.0 / math::sqrt(len_sq);
        x.iter_mut().for_each(|xi| *xi *= inv);
    }
    let spatial = math::sqrt(x[1..].iter().map(|v| v * v).sum());
    math::atan2(spatial, x[0])
}

/// Geodesic random walk on the unit hyperboloid `x₀² − |x⃗|² = 1`, started
/// at distance `a` from `(1, 0)`; returns the final distance.
fn hyperboloid_walk(a: f64, steps: usize, h: f64, m: usize, rng: &mut ChaCha8Rng) -> f64 {
    let sqrt_h = math::sqrt(h);
    let mut x0 = math::cosh(a);
    let mut xs = vec![0.0; m];
    xs[0] = math::sinh(a);
    let mut xi = vec![0.0; m];
    for _ in 0..steps {
        let mut norm_sq = 0.0;
        let mut dot = 0.0;
        for (z, x) in xi.iter_mut().zip(&xs) {
            *z = rng.sample(StandardNormal);
            norm_sq += *z * *z;
            dot += *z * x;
        }
        let norm = math::sqrt(norm_sq);
        if norm == 0.0 {
            continue;
        }
        // Boost of ξ from the tangent space at the pole to the one at x.
        let w = dot / (1.0 + x0);
        let s = sqrt_h * norm;
        let (ch, sh) = (math::cosh(s), math::sinh(s) / norm);
        let mut spatial_sq = 0.0;
        for (x, z) in xs.iter_mut().zip(&xi) {
            *x = ch * *x + sh * (z + w * *x);
            spatial_sq += *x * *x;
        }
        x0 = math::sqrt(1.0 + spatial_sq);
    }
    let spatial = math::sqrt(xs.iter().map(|v| v * v).sum());
    math::asinh(spatial)
}

/// Terminal `g(t)`-radii of `config.n_paths` paths started at base radius `r0`.
pub fn simulate_radial(model: &EvolvingModel, r0: f64, t: f64, config: SimConfig) -> Result<SampleSet> {
    Simulation::new(model, r0, t, config)?.run()
}

/// As [`simulate_radial`], also recording the running maximum over grid
/// times. Discrete monitoring under-estimates the continuous supremum.
pub fn simulate_sup_radial(model: &EvolvingModel, r0: f64, t: f64, config: SimConfig) -> Result<SampleSet> {
    if config.backend != Backend::RadialEuler {
        return Err(domain!("running suprema need the radial_euler backend"));
    }
    simulate_radial(model, r0, t, config.with_sup())
}

/// Mean over paths of `Σ (Δρ − drift·Δt)²`, the realized quadratic
/// variation of the martingale part; tends to `t` as `dt → 0`.
pub fn realized_quadratic_variation(
    model: &EvolvingModel,
    r0: f64,
    t: f64,
    config: SimConfig,
) -> Result<MCEstimate> {
    if config.backend != Backend::RadialEuler {
        return Err(domain!("quadratic variation needs the radial_euler backend"));
    }
    estimate_quadratic_variation(&simulate_radial(model, r0, t, config)?)
}
