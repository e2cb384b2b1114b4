//! Bounds on the radial process driven by a Lyapunov certificate `(ν, λ)`.
//!
//! A certificate asserts `(L_s + ∂_s) r_s² ≤ ν + λ r_s²` off the cut locus on
//! `[0, horizon]`. Every bound below is a closed-form function of `ν`, `λ`,
//! the starting distance `r0` and the time `t`, with `Λ(t) = (e^{λt}−1)/λ`.
//!
//! Probability bounds are returned as [`ProbabilityBound`], holding both the
//! raw expression (which exceeds 1 for small radii) and its clamp to `[0, 1]`.

use alloc::format;

use crate::error::{domain, refused};
use crate::math;
use crate::special_fn::{self, LaguerreParams};
use crate::{Error, Result};

/// Where a certificate came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum CertificateOrigin {
    UserSupplied,
    AnalyticModel,
    CurvatureBounds,
    NumericGrid,
}

/// Lyapunov pair `(ν, λ)` valid on `[0, horizon]`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Certificate {
    nu: f64,
    lambda: f64,
    #[cfg_attr(feature = "serde", serde(with = "horizon_serde"))]
    horizon: f64,
    origin: CertificateOrigin,
}

impl Certificate {
    pub fn new(nu: f64, lambda: f64, horizon: f64, origin: CertificateOrigin) -> Result<Self> {
        if !(nu >= 1.0) || !nu.is_finite() {
            return Err(domain!("certificate needs nu >= 1, got {nu}"));
        }
        if !lambda.is_finite() {
            return Err(domain!("certificate lambda must be finite, got {lambda}"));
        }
        if !(horizon > 0.0) {
            return Err(domain!("certificate horizon must be positive, got {horizon}"));
        }
        Ok(Self {
            nu,
            lambda,
            horizon,
            origin,
        })
    }

    /// A user-supplied certificate with an unbounded horizon.
    pub fn user(nu: f64, lambda: f64) -> Result<Self> {
        Self::new(nu, lambda, f64::INFINITY, CertificateOrigin::UserSupplied)
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn origin(&self) -> CertificateOrigin {
        self.origin
    }

    pub fn with_horizon(self, horizon: f64) -> Result<Self> {
        Self::new(self.nu, self.lambda, horizon, self.origin)
    }

    /// `Λ(t)` for this certificate's `λ`.
    pub fn growth(&self, t: f64) -> Result<f64> {
        special_fn::lambda_integral(self.lambda, t)
    }

    /// Checks `0 < t ≤ horizon`; the certificate is asserted on the closed
    /// interval `[0, horizon]`.
    pub fn check_time(&self, t: f64) -> Result<()> {
        if !(t > 0.0) || t > self.horizon || !t.is_finite() {
            return Err(domain!(
                "time {t} outside the certificate range (0, {}]",
                self.horizon
            ));
        }
        Ok(())
    }
}

#[cfg(feature = "serde")]
mod horizon_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    // JSON has no infinity; `null` stands for an unbounded horizon.
    pub fn serialize<S: Serializer>(h: &f64, s: S) -> Result<S::Ok, S::Error> {
        if h.is_finite() {
            s.serialize_some(h)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// Arguments shared by the bound evaluators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundQuery {
    pub cert: Certificate,
    pub r0: f64,
    pub t: f64,
    pub p: Option<u32>,
    pub theta: Option<f64>,
    pub r: Option<f64>,
    pub delta: Option<f64>,
}

impl BoundQuery {
    pub fn new(cert: Certificate, r0: f64, t: f64) -> Result<Self> {
        if !(r0 >= 0.0) || !r0.is_finite() {
            return Err(domain!("starting distance r0 must be >= 0, got {r0}"));
        }
        cert.check_time(t)?;
        Ok(Self {
            cert,
            r0,
            t,
            p: None,
            theta: None,
            r: None,
            delta: None,
        })
    }

    pub fn with_p(mut self, p: u32) -> Self {
        self.p = Some(p);
        self
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = Some(theta);
        self
    }

    pub fn with_radius(mut self, r: f64) -> Self {
        self.r = Some(r);
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = Some(delta);
        self
    }

    fn growth(&self) -> Result<f64> {
        self.cert.check_time(self.t)?;
        self.cert.growth(self.t)
    }

    /// `r0² e^{λt}`, the transported initial term.
    fn initial_term(&self) -> f64 {
        self.r0 * self.r0 * math::exp(self.cert.lambda * self.t)
    }

    fn require_p(&self) -> Result<u32> {
        self.p.ok_or_else(|| domain!("moment order p is required"))
    }

    fn require_theta(&self) -> Result<f64> {
        let theta = self.theta.ok_or_else(|| domain!("theta is required"))?;
        if !(theta >= 0.0) || !theta.is_finite() {
            return Err(domain!("theta must be >= 0, got {theta}"));
        }
        Ok(theta)
    }

    fn require_radius(&self) -> Result<f64> {
        let r = self.r.ok_or_else(|| domain!("target radius r is required"))?;
        if !(r > 0.0) || !r.is_finite() {
            return Err(domain!("target radius must be > 0, got {r}"));
        }
        Ok(r)
    }

    fn require_delta(&self) -> Result<f64> {
        let delta = self.delta.ok_or_else(|| domain!("delta is required"))?;
        if !(delta > 0.0 && delta < 1.0) {
            return Err(domain!("delta must lie in (0, 1), got {delta}"));
        }
        Ok(delta)
    }
}

/// A probability upper bound: the raw expression and its clamp to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProbabilityBound {
    pub value: f64,
    pub raw: f64,
    /// `ln(raw)`, finite where `raw` underflows.
    pub log_raw: f64,
}

impl ProbabilityBound {
    fn from_log(log_raw: f64) -> Self {
        let raw = math::exp(log_raw);
        Self {
            value: raw.clamp(0.0, 1.0),
            raw,
            log_raw,
        }
    }
}

/// Result of minimizing a probability bound over `δ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizedBound {
    pub delta: f64,
    pub bound: ProbabilityBound,
}

/// `E r_t² ≤ r0² e^{λt} + ν Λ(t)`.
pub fn second_moment_bound(q: &BoundQuery) -> Result<f64> {
    let growth = q.growth()?;
    Ok(q.initial_term() + q.cert.nu * growth)
}

/// `E r_t ≤ √(r0² e^{λt} + ν Λ(t))`.
pub fn first_moment_bound(q: &BoundQuery) -> Result<f64> {
    Ok(math::sqrt(second_moment_bound(q)?))
}

/// `E r_t^{2p} ≤ (2Λ)^p p! L_p^{ν/2−1}(−r0² e^{λt}/(2Λ))`; `p = 0` gives 1.
pub fn even_moment_bound(q: &BoundQuery) -> Result<f64> {
    let p = q.require_p()?;
    let growth = q.growth()?;
    if p == 0 {
        return Ok(1.0);
    }
    let alpha = q.cert.nu / 2.0 - 1.0;
    let z = -q.initial_term() / (2.0 * growth);
    let l = special_fn::laguerre(&LaguerreParams::new(p, alpha, z))?;
    Ok(math::powi(2.0 * growth, p) * special_fn::factorial(p) * l)
}

/// `E exp(ϑ r_t²/2) ≤ (1−ϑΛ)^{−ν/2} exp(ϑ r0² e^{λt} / (2(1−ϑΛ)))`.
pub fn exp_moment_bound(q: &BoundQuery) -> Result<f64> {
    let theta = q.require_theta()?;
    let growth = q.growth()?;
    let gap = 1.0 - theta * growth;
    if !(gap > 0.0) {
        return Err(refused!(
            "exponential bound diverges: theta*Lambda(t) = {} >= 1",
            theta * growth
        ));
    }
    Ok(math::powf(gap, -q.cert.nu / 2.0) * math::exp(theta * q.initial_term() / (2.0 * gap)))
}

/// Natural log of the fixed-`δ` concentration expression.
fn concentration_log(nu: f64, growth: f64, initial: f64, r: f64, delta: f64) -> f64 {
    -0.5 * nu * math::ln1p(-delta) + initial * delta / (2.0 * (1.0 - delta) * growth)
        - delta * r * r / (2.0 * growth)
}

/// `P(r_t ≥ r) ≤ (1−δ)^{−ν/2} exp(r0² δ e^{λt}/(2(1−δ)Λ) − δr²/(2Λ))`.
pub fn concentration_bound(q: &BoundQuery) -> Result<ProbabilityBound> {
    let r = q.require_radius()?;
    let delta = q.require_delta()?;
    let growth = q.growth()?;
    let log = concentration_log(q.cert.nu, growth, q.initial_term(), r, delta);
    Ok(ProbabilityBound::from_log(log))
}

/// Tolerance of the ternary search over `δ`.
pub const DELTA_TOLERANCE: f64 = 1e-10;

/// Minimizes [`concentration_bound`] over `δ ∈ (0, 1)`.
///
/// For `r0 = 0` the minimizer is `δ* = 1 − νΛ/r²` (or the boundary `δ → 0`
/// when `r² ≤ νΛ`, giving the trivial bound 1). Otherwise the log-bound is
/// convex in `δ` and a ternary search is used.
pub fn concentration_bound_optimized(q: &BoundQuery) -> Result<OptimizedBound> {
    let r = q.require_radius()?;
    let growth = q.growth()?;
    let nu = q.cert.nu;
    let initial = q.initial_term();
    if initial == 0.0 {
        let scale = nu * growth / (r * r);
        if scale >= 1.0 {
            return Ok(OptimizedBound {
                delta: 0.0,
                bound: ProbabilityBound::from_log(0.0),
            });
        }
        let delta = 1.0 - scale;
        let log = concentration_log(nu, growth, initial, r, delta);
        return Ok(OptimizedBound {
            delta,
            bound: ProbabilityBound::from_log(log),
        });
    }
    let f = |d: f64| concentration_log(nu, growth, initial, r, d);
    let (mut lo, mut hi) = (0.0_f64, 1.0 - 1e-15);
    while hi - lo > DELTA_TOLERANCE {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if f(m1) <= f(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let delta = 0.5 * (lo + hi);
    // f(0) = 0; a minimizer pinned at the boundary yields the trivial bound.
    let log = f(delta).min(0.0);
    Ok(OptimizedBound {
        delta,
        bound: ProbabilityBound::from_log(log),
    })
}

/// Asymptotic exponential rate `−1/(2Λ(t))` of the tail in `r²`.
pub fn concentration_rate(cert: &Certificate, t: f64) -> Result<f64> {
    cert.check_time(t)?;
    Ok(-1.0 / (2.0 * cert.growth(t)?))
}

fn require_nonnegative_lambda(q: &BoundQuery) -> Result<()> {
    if q.cert.lambda < 0.0 {
        return Err(Error::Domain(format!(
            "exit-time bound requires lambda >= 0, got {}",
            q.cert.lambda
        )));
    }
    Ok(())
}

/// `P(sup_{s≤t} r_s ≥ r)`: same expression as [`concentration_bound`], valid
/// only for `λ ≥ 0`.
pub fn exit_time_bound(q: &BoundQuery) -> Result<ProbabilityBound> {
    require_nonnegative_lambda(q)?;
    concentration_bound(q)
}

/// Optimized-`δ` variant of [`exit_time_bound`].
pub fn exit_time_bound_optimized(q: &BoundQuery) -> Result<OptimizedBound> {
    require_nonnegative_lambda(q)?;
    concentration_bound_optimized(q)
}

/// Points on `r ∈ [0, 100]` used to verify curvature certificates.
pub const CURVATURE_GRID_POINTS: usize = 10_000;
pub const CURVATURE_GRID_MAX_RADIUS: f64 = 100.0;

/// Dominated expression `2r·s·coth(s) + 2C₂ r(1+r) + 2` with
/// `s = √((m−1)C₁(1+r²))`; `s·coth(s) → 1` when `C₁ = 0`.
pub fn curvature_lyapunov_expression(m: u32, c1: f64, c2: f64, r: f64) -> f64 {
    let a = f64::from(m - 1) * c1;
    let s = math::sqrt(a * (1.0 + r * r));
    2.0 * r * math::x_coth_x(s) + 2.0 * c2 * r * (1.0 + r) + 2.0
}

/// Certificate from constant curvature data: `Ric ≥ −C₁(1+r²)` and
/// `∂_t r + ⟨Z, ∇r⟩ ≤ C₂(1+r)`.
///
/// Chain: `s coth s ≤ s + 1`, `√(1+r²) ≤ 1+r`, then `r ≤ (1+r²)/2` for the
/// linear term. With `a = √((m−1)C₁)` and `β = 2a + 2 + 2C₂` this gives
/// `ν = 2 + β/2`, `λ = 2a + 2C₂ + β/2`. The result is checked on a radius
/// grid before it is returned.
pub fn certificate_from_curvature(m: u32, c1: f64, c2: f64) -> Result<Certificate> {
    if m < 2 {
        return Err(domain!("dimension must be >= 2, got {m}"));
    }
    if !(c1 >= 0.0) || !(c2 >= 0.0) || !c1.is_finite() || !c2.is_finite() {
        return Err(domain!("curvature constants must be >= 0 (C1 = {c1}, C2 = {c2})"));
    }
    let a = math::sqrt(f64::from(m - 1) * c1);
    let beta = 2.0 * a + 2.0 + 2.0 * c2;
    let nu = 2.0 + beta / 2.0;
    let lambda = 2.0 * a + 2.0 * c2 + beta / 2.0;
    let cert = Certificate::new(nu, lambda, f64::INFINITY, CertificateOrigin::CurvatureBounds)?;
    for i in 0..CURVATURE_GRID_POINTS {
        let r = CURVATURE_GRID_MAX_RADIUS * i as f64 / (CURVATURE_GRID_POINTS - 1) as f64;
        let lhs = curvature_lyapunov_expression(m, c1, c2, r);
        let rhs = nu + lambda * r * r;
        if lhs > rhs + 1e-12 * rhs.abs().max(1.0) {
            return Err(Error::Internal(format!(
                "curvature certificate ({nu}, {lambda}) violated at r = {r}: {lhs} > {rhs}"
            )));
        }
    }
    Ok(cert)
}
