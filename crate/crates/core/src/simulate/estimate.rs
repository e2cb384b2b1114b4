use crate::bounds::Certificate;
use crate::error::{domain, refused};
use crate::math;
use crate::Result;

use super::SampleSet;

/// Largest `ϑΛ(t)` for which exponential moments are estimated.
pub const EXP_MOMENT_GUARD: f64 = 0.5;

/// Monte Carlo mean with its standard error and a two-sided interval.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MCEstimate {
    pub mean: f64,
    /// Standard deviation (normalized by `n`) over `√n`.
    pub stderr: f64,
    pub n: usize,
    pub level: f64,
    pub lower: f64,
    pub upper: f64,
}

fn two_sided_z(level: f64) -> f64 {
    math::normal_quantile(0.5 + 0.5 * level)
}

/// Mean, standard error and normal interval of `values` (Welford updates).
pub(crate) fn mean_estimate(values: impl Iterator<Item = f64>, level: f64) -> Result<MCEstimate> {
    let (mut n, mut mean, mut m2) = (0usize, 0.0f64, 0.0f64);
    for x in values {
        n += 1;
        let d = x - mean;
        mean += d / n as f64;
        m2 += d * (x - mean);
    }
    if n < 2 {
        return Err(domain!("an estimate needs at least 2 samples, got {n}"));
    }
    // Standard deviation normalized by n, as in the two-point reference.
    let stderr = math::sqrt(m2.max(0.0) / n as f64) / math::sqrt(n as f64);
    let z = two_sided_z(level);
    Ok(MCEstimate {
        mean,
        stderr,
        n,
        level,
        lower: mean - z * stderr,
        upper: mean + z * stderr,
    })
}

/// Estimate of `E ρ^{2p}`.
pub fn estimate_moment(s: &SampleSet, p: u32) -> Result<MCEstimate> {
    if p == 0 {
        return Err(domain!("moment order must be positive"));
    }
    mean_estimate(
        s.terminal_radii.iter().map(|&r| math::powi(r * r, p)),
        s.meta.config.level,
    )
}

/// Estimate of `E exp(ϑρ²/2)`, refused when `ϑΛ(t)` exceeds
/// [`EXP_MOMENT_GUARD`] because the estimator variance blows up.
pub fn estimate_exp_moment(s: &SampleSet, theta: f64, cert: &Certificate) -> Result<MCEstimate> {
    if !(theta >= 0.0) || !theta.is_finite() {
        return Err(domain!("theta must be finite and >= 0, got {theta}"));
    }
    let load = theta * cert.growth(s.meta.t)?;
    if load > EXP_MOMENT_GUARD {
        return Err(refused!(
            "theta*Lambda(t) = {load} exceeds {EXP_MOMENT_GUARD}; the estimator is too heavy-tailed"
        ));
    }
    mean_estimate(
        s.terminal_radii.iter().map(|&r| math::exp(0.5 * theta * r * r)),
        s.meta.config.level,
    )
}

/// Frequency of `{ρ ≥ r}` with a Wilson score interval.
pub fn estimate_tail(s: &SampleSet, r: f64) -> Result<MCEstimate> {
    tail_of(&s.terminal_radii, r, s.meta.config.level)
}

/// As [`estimate_tail`] but over the running suprema.
pub fn estimate_sup_tail(s: &SampleSet, r: f64) -> Result<MCEstimate> {
    let sup = s
        .sup_radii
        .as_deref()
        .ok_or_else(|| domain!("sample set carries no running suprema"))?;
    tail_of(sup, r, s.meta.config.level)
}

/// Mean realized quadratic variation over the paths of a radial run.
pub fn estimate_quadratic_variation(s: &SampleSet) -> Result<MCEstimate> {
    let qv = s
        .quadratic_variation
        .as_deref()
        .ok_or_else(|| domain!("sample set carries no quadratic variation"))?;
    mean_estimate(qv.iter().copied(), s.meta.config.level)
}

fn tail_of(radii: &[f64], r: f64, level: f64) -> Result<MCEstimate> {
    if !(r >= 0.0) {
        return Err(domain!("tail radius must be >= 0, got {r}"));
    }
    let n = radii.len();
    if n < 2 {
        return Err(domain!("an estimate needs at least 2 samples, got {n}"));
    }
    let hits = radii.iter().filter(|&&x| x >= r).count();
    let nf = n as f64;
    let p = hits as f64 / nf;
    let stderr = math::sqrt(p * (1.0 - p) / nf);
    let z = two_sided_z(level);
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * nf)) / (1.0 + z2 / nf);
    let half = z / (1.0 + z2 / nf) * math::sqrt(p * (1.0 - p) / nf + z2 / (4.0 * nf * nf));
    Ok(MCEstimate {
        mean: p,
        stderr,
        n,
        level,
        lower: (centre - half).max(0.0),
        upper: (centre + half).min(1.0),
    })
}
