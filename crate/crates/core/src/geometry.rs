//! Evolving constant-curvature model spaces.
//!
//! A model is a simply connected space of dimension `m` and base curvature
//! `k0` whose metric evolves by a spatially constant conformal factor,
//! `g(t) = c(t)² g₀`, together with a radial drift `Z(t) = b(t)∇r`. Under
//! this ansatz the distance from the pole is `r_t = c(t)·r₀` and
//! `½Δ_{g(t)} = c(t)^{−2}·½Δ₀`, so radial drifts, cut loci and the time
//! change to static Brownian motion are all available in closed form.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::bounds::{Certificate, CertificateOrigin};
use crate::error::domain;
use crate::math;
use crate::{Error, Result};

/// Dimension and base curvature of the static model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpace {
    pub dim: u32,
    pub k0: f64,
}

impl ModelSpace {
    pub fn new(dim: u32, k0: f64) -> Result<Self> {
        if dim < 2 {
            return Err(domain!("model dimension must be >= 2, got {dim}"));
        }
        if !k0.is_finite() {
            return Err(domain!("base curvature must be finite, got {k0}"));
        }
        Ok(Self { dim, k0 })
    }

    pub fn family(&self) -> Family {
        if self.k0 > 0.0 {
            Family::Sphere
        } else if self.k0 < 0.0 {
            Family::Hyperbolic
        } else {
            Family::Euclidean
        }
    }

    /// `√|k0|`.
    fn curvature_scale(&self) -> f64 {
        math::sqrt(self.k0.abs())
    }

    fn dim_minus_one(&self) -> f64 {
        f64::from(self.dim - 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Sphere,
    Euclidean,
    Hyperbolic,
}

/// Monotone piecewise-cubic Hermite interpolant (Fritsch–Carlson slopes).
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        let n = xs.len();
        if n < 2 || ys.len() != n {
            return Err(domain!(
                "interpolation needs matching knot arrays of length >= 2 ({} vs {})",
                xs.len(),
                ys.len()
            ));
        }
        if xs.iter().chain(ys.iter()).any(|v| !v.is_finite()) {
            return Err(domain!("interpolation knots must be finite"));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(domain!("interpolation abscissae must be strictly increasing"));
        }
        let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        let secant: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();
        let mut slopes = alloc::vec![0.0; n];
        if n == 2 {
            slopes[0] = secant[0];
            slopes[1] = secant[0];
        } else {
            for k in 1..n - 1 {
                let (d0, d1) = (secant[k - 1], secant[k]);
                if d0 * d1 > 0.0 {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    slopes[k] = (w1 + w2) / (w1 / d0 + w2 / d1);
                }
            }
            slopes[0] = end_slope(h[0], h[1], secant[0], secant[1]);
            slopes[n - 1] = end_slope(h[n - 2], h[n - 3], secant[n - 2], secant[n - 3]);
        }
        Ok(Self { xs, ys, slopes })
    }

    pub fn knots(&self) -> (&[f64], &[f64]) {
        (&self.xs, &self.ys)
    }

    fn segment(&self, x: f64) -> usize {
        let n = self.xs.len();
        match self.xs.binary_search_by(|v| v.partial_cmp(&x).unwrap_or(core::cmp::Ordering::Less)) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.clamp(1, n - 1) - 1,
        }
    }

    /// Value and derivative at `x`; extrapolates the end cubic outside the knots.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let s = (x - self.xs[i]) / h;
        let (y0, y1) = (self.ys[i], self.ys[i + 1]);
        let (m0, m1) = (self.slopes[i] * h, self.slopes[i + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        let value = (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * m0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * m1;
        let deriv = ((6.0 * s2 - 6.0 * s) * y0
            + (3.0 * s2 - 4.0 * s + 1.0) * m0
            + (-6.0 * s2 + 6.0 * s) * y1
            + (3.0 * s2 - 2.0 * s) * m1)
            / h;
        (value, deriv)
    }
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d * d0 <= 0.0 {
        0.0
    } else if d0 * d1 <= 0.0 && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}

/// Conformal factor `c(t)` of `g(t) = c(t)² g₀`.
#[derive(Debug, Clone, PartialEq)]
pub enum ScaleSchedule {
    /// `c ≡ scale`.
    Constant { scale: f64 },
    /// Exact Ricci flow: `c(t)² = 1 − 2(m−1)k0·t`.
    RicciFlow,
    /// User table; the horizon is the last knot time.
    Tabulated(MonotoneCubic),
}

impl ScaleSchedule {
    pub fn tabulated(times: Vec<f64>, scales: Vec<f64>) -> Result<Self> {
        if times.first() != Some(&0.0) {
            return Err(domain!("tabulated schedule must start at t = 0"));
        }
        if scales.iter().any(|&c| !(c > 0.0)) {
            return Err(domain!("tabulated scales must be positive"));
        }
        Ok(Self::Tabulated(MonotoneCubic::new(times, scales)?))
    }
}

/// Radial drift magnitude `b(t)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum DriftSpec {
    #[default]
    Zero,
    Constant { b: f64 },
    /// Piecewise linear through the knots, held constant after the last one.
    Tabulated { times: Vec<f64>, values: Vec<f64> },
}

impl DriftSpec {
    fn validate(&self) -> Result<()> {
        match self {
            Self::Zero => Ok(()),
            Self::Constant { b } if b.is_finite() => Ok(()),
            Self::Constant { b } => Err(domain!("drift must be finite, got {b}")),
            Self::Tabulated { times, values } => {
                if times.is_empty() || times.len() != values.len() {
                    return Err(domain!("drift table needs matching, nonempty arrays"));
                }
                if times[0] != 0.0 {
                    return Err(domain!("drift table must start at t = 0"));
                }
                if times.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(domain!("drift table times must be strictly increasing"));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(domain!("drift table values must be finite"));
                }
                Ok(())
            }
        }
    }

    pub fn at(&self, t: f64) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Constant { b } => *b,
            Self::Tabulated { times, values } => {
                let n = times.len();
                if t >= times[n - 1] {
                    return values[n - 1];
                }
                let i = times.partition_point(|&x| x <= t).max(1) - 1;
                let w = (t - times[i]) / (times[i + 1] - times[i]);
                values[i] + w * (values[i + 1] - values[i])
            }
        }
    }

    /// `sup_{[0, until]} max(b, 0)`.
    fn positive_sup(&self, until: f64) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Constant { b } => b.max(0.0),
            Self::Tabulated { times, values } => {
                let mut sup = self.at(0.0).max(self.at(until));
                for (&t, &v) in times.iter().zip(values) {
                    if t <= until {
                        sup = sup.max(v);
                    }
                }
                sup.max(0.0)
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Self::Zero => true,
            Self::Constant { b } => *b == 0.0,
            Self::Tabulated { values, .. } => values.iter().all(|&v| v == 0.0),
        }
    }
}

/// Grid used by [`EvolvingModel::certify`] to check a certificate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CertifyGrid {
    pub n_time: usize,
    pub n_radius: usize,
}

impl Default for CertifyGrid {
    fn default() -> Self {
        Self {
            n_time: 100,
            n_radius: 1000,
        }
    }
}

/// Time span scanned for certificates of models with unbounded horizon.
const UNBOUNDED_CERTIFY_SPAN: f64 = 1.0;
/// Radius range of the certificate grid for models without a cut locus.
const UNBOUNDED_CERTIFY_RADIUS: f64 = 100.0;
/// Subdivisions per knot interval when scanning tabulated schedules.
const TABLE_SCAN_SUBDIVISIONS: usize = 64;
const CERTIFY_SLACK: f64 = 1e-12;

/// Model space, conformal schedule and radial drift.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolvingModel {
    space: ModelSpace,
    schedule: ScaleSchedule,
    drift: DriftSpec,
}

impl EvolvingModel {
    pub fn new(space: ModelSpace, schedule: ScaleSchedule, drift: DriftSpec) -> Result<Self> {
        let space = ModelSpace::new(space.dim, space.k0)?;
        if let ScaleSchedule::Constant { scale } = schedule {
            if !(scale > 0.0) || !scale.is_finite() {
                return Err(domain!("constant scale must be positive, got {scale}"));
            }
        }
        drift.validate()?;
        Ok(Self {
            space,
            schedule,
            drift,
        })
    }

    /// Static model with `c ≡ 1` and no drift.
    pub fn fixed(dim: u32, k0: f64) -> Result<Self> {
        Self::new(
            ModelSpace::new(dim, k0)?,
            ScaleSchedule::Constant { scale: 1.0 },
            DriftSpec::Zero,
        )
    }

    /// Model following the exact Ricci flow, no drift.
    pub fn ricci_flow(dim: u32, k0: f64) -> Result<Self> {
        Self::new(ModelSpace::new(dim, k0)?, ScaleSchedule::RicciFlow, DriftSpec::Zero)
    }

    pub fn with_drift(self, drift: DriftSpec) -> Result<Self> {
        Self::new(self.space, self.schedule, drift)
    }

    pub fn space(&self) -> ModelSpace {
        self.space
    }

    pub fn schedule(&self) -> &ScaleSchedule {
        &self.schedule
    }

    pub fn drift(&self) -> &DriftSpec {
        &self.drift
    }

    pub fn family(&self) -> Family {
        self.space.family()
    }

    /// `2(m−1)k0`, the rate of `c²` under Ricci flow.
    fn ricci_rate(&self) -> f64 {
        2.0 * self.space.dim_minus_one() * self.space.k0
    }

    /// Supremum of the time domain `[0, T)`.
    pub fn horizon(&self) -> f64 {
        match &self.schedule {
            ScaleSchedule::Constant { .. } => f64::INFINITY,
            ScaleSchedule::RicciFlow => {
                let a = self.ricci_rate();
                if a > 0.0 {
                    1.0 / a
                } else {
                    f64::INFINITY
                }
            }
            ScaleSchedule::Tabulated(table) => *table.knots().0.last().unwrap(),
        }
    }

    pub fn check_time(&self, t: f64) -> Result<()> {
        if !(t >= 0.0) || t >= self.horizon() {
            return Err(domain!("time {t} outside the model range [0, {})", self.horizon()));
        }
        Ok(())
    }

    /// `(c(t), c'(t))`; caller checks the time range.
    pub(crate) fn scale_and_derivative(&self, t: f64) -> (f64, f64) {
        match &self.schedule {
            ScaleSchedule::Constant { scale } => (*scale, 0.0),
            ScaleSchedule::RicciFlow => {
                let a = self.ricci_rate();
                let c = math::sqrt(1.0 - a * t);
                (c, -a / (2.0 * c))
            }
            ScaleSchedule::Tabulated(table) => table.eval(t),
        }
    }

    /// Conformal factor `c(t)`.
    pub fn scale(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(self.scale_and_derivative(t).0)
    }

    /// Logarithmic rate `c'(t)/c(t)`.
    pub fn scale_rate(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        let (c, dc) = self.scale_and_derivative(t);
        Ok(dc / c)
    }

    pub fn drift_at(&self, t: f64) -> f64 {
        self.drift.at(t)
    }

    /// `g(t)`-distance from the pole to the cut locus (`∞` off the sphere).
    pub fn cut_locus_radius(&self, t: f64) -> f64 {
        if self.space.k0 > 0.0 {
            PI * self.scale_and_derivative(t).0 / self.space.curvature_scale()
        } else {
            f64::INFINITY
        }
    }

    /// Cut-locus distance in base (`g₀`) units.
    pub fn base_cut_radius(&self) -> f64 {
        if self.space.k0 > 0.0 {
            PI / self.space.curvature_scale()
        } else {
            f64::INFINITY
        }
    }

    fn check_radius(&self, t: f64, rho: f64) -> Result<()> {
        self.check_time(t)?;
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(domain!("radius must be positive, got {rho}"));
        }
        let cut = self.cut_locus_radius(t);
        if rho >= cut {
            return Err(domain!("radius {rho} at or beyond the cut locus {cut}"));
        }
        Ok(())
    }

    /// `Δ₀ r₀` at base radius `u`.
    fn base_laplacian(&self, u: f64) -> f64 {
        let m1 = self.space.dim_minus_one();
        let kappa = self.space.curvature_scale();
        match self.family() {
            Family::Euclidean => m1 / u,
            Family::Sphere => m1 * kappa / math::tan(kappa * u),
            Family::Hyperbolic => m1 * kappa / math::tanh(kappa * u),
        }
    }

    /// `u·Δ₀r₀` at base radius `u`, continuous at `u = 0`.
    fn base_radial_laplacian_product(&self, u: f64) -> f64 {
        let m1 = self.space.dim_minus_one();
        let x = self.space.curvature_scale() * u;
        match self.family() {
            Family::Euclidean => m1,
            Family::Sphere => m1 * math::x_cot_x(x),
            Family::Hyperbolic => m1 * math::x_coth_x(x),
        }
    }

    /// `½Δ_{g(t)} r + ∂_t r + ⟨Z, ∇r⟩` at `g(t)`-radius `rho`.
    pub fn radial_drift(&self, t: f64, rho: f64) -> Result<f64> {
        self.check_radius(t, rho)?;
        Ok(self.radial_drift_unchecked(t, rho))
    }

    pub(crate) fn radial_drift_unchecked(&self, t: f64, rho: f64) -> f64 {
        let (c, dc) = self.scale_and_derivative(t);
        let u = rho / c;
        self.base_laplacian(u) / (2.0 * c) + dc / c * rho + self.drift.at(t)
    }

    /// Radial drift minus its origin singularity `(m−1)/(2ρ)`; bounded near 0.
    pub(crate) fn drift_regular_at_origin(&self, t: f64, rho: f64) -> f64 {
        let (c, dc) = self.scale_and_derivative(t);
        let m1 = self.space.dim_minus_one();
        let kappa = self.space.curvature_scale();
        let x = kappa * rho / c;
        let curvature = match self.family() {
            Family::Euclidean => 0.0,
            Family::Sphere => m1 * kappa / (2.0 * c) * math::cot_minus_inv(x),
            Family::Hyperbolic => m1 * kappa / (2.0 * c) * math::coth_minus_inv(x),
        };
        curvature + dc / c * rho + self.drift.at(t)
    }

    /// Drift of the distance to the antipode `ρ̃ = cut(t) − ρ`, minus its
    /// singularity `(m−1)/(2ρ̃)`. Sphere only.
    pub(crate) fn drift_regular_at_cut(&self, t: f64, rho_tilde: f64) -> f64 {
        let (c, dc) = self.scale_and_derivative(t);
        let m1 = self.space.dim_minus_one();
        let kappa = self.space.curvature_scale();
        let y = kappa * rho_tilde / c;
        dc / c * rho_tilde - self.drift.at(t) + m1 * kappa / (2.0 * c) * math::cot_minus_inv(y)
    }

    /// `(L_t + ∂_t) r_t² = 2ρ·radial_drift + |∇r|²` at `g(t)`-radius `rho`.
    pub fn lyapunov_lhs(&self, t: f64, rho: f64) -> Result<f64> {
        Ok(2.0 * rho * self.radial_drift(t, rho)? + 1.0)
    }

    /// The same quantity computed from the base radius `u = ρ/c(t)`:
    /// `u Δ₀u + 1 + 2c c' u² + 2c u b`.
    pub fn lyapunov_lhs_base(&self, t: f64, u: f64) -> Result<f64> {
        self.check_time(t)?;
        if !(u > 0.0) || u >= self.base_cut_radius() {
            return Err(domain!("base radius {u} outside (0, cut locus)"));
        }
        let (c, dc) = self.scale_and_derivative(t);
        Ok(self.base_radial_laplacian_product(u)
            + 1.0
            + 2.0 * c * dc * u * u
            + 2.0 * c * u * self.drift.at(t))
    }

    /// `τ(t) = ∫₀ᵗ c(s)^{−2} ds`.
    pub fn time_change(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(match &self.schedule {
            ScaleSchedule::Constant { scale } => t / (scale * scale),
            ScaleSchedule::RicciFlow => {
                let a = self.ricci_rate();
                if a == 0.0 {
                    t
                } else {
                    -math::ln1p(-a * t) / a
                }
            }
            ScaleSchedule::Tabulated(table) => {
                let f = |s: f64| {
                    let c = table.eval(s).0;
                    1.0 / (c * c)
                };
                adaptive_simpson(&f, 0.0, t, 1e-10)
            }
        })
    }

    /// Whether `∂_t g ≤ Ric` holds on the whole time domain. With
    /// `∂_t g = 2cc'·g₀` and `Ric = (m−1)k0·g₀` this is `2cc' ≤ (m−1)k0`.
    pub fn is_backwards_super_ricci_flow(&self) -> bool {
        let ric = self.space.dim_minus_one() * self.space.k0;
        match &self.schedule {
            ScaleSchedule::Constant { .. } => ric >= 0.0,
            ScaleSchedule::RicciFlow => self.space.k0 >= 0.0,
            ScaleSchedule::Tabulated(table) => scan_times(table, self.horizon())
                .into_iter()
                .all(|t| {
                    let (c, dc) = table.eval(t);
                    2.0 * c * dc <= ric
                }),
        }
    }

    /// `(sup c'/c, inf c)` over `[0, until]`.
    fn schedule_extremes(&self, until: f64) -> (f64, f64) {
        match &self.schedule {
            ScaleSchedule::Constant { scale } => (0.0, *scale),
            ScaleSchedule::RicciFlow => {
                // c'/c = −(m−1)k0/c² is extremal at t = 0 where c = 1.
                let rate0 = -self.space.dim_minus_one() * self.space.k0;
                let c_min = if self.space.k0 > 0.0 {
                    math::sqrt(1.0 - self.ricci_rate() * until)
                } else {
                    1.0
                };
                (rate0, c_min)
            }
            ScaleSchedule::Tabulated(table) => {
                let mut sup_rate = f64::NEG_INFINITY;
                let mut inf_c = f64::INFINITY;
                for t in scan_times(table, until) {
                    let (c, dc) = table.eval(t);
                    sup_rate = sup_rate.max(dc / c);
                    inf_c = inf_c.min(c);
                }
                (sup_rate, inf_c)
            }
        }
    }

    /// Certificate `(ν, λ)` on `[0, sub_horizon]` from the elementary
    /// comparisons `x cot x ≤ 1` (sphere), `x coth x ≤ 1 + x` (hyperbolic),
    /// `2ρb ≤ b(1 + ρ²)` (outward drift) and `ρ ≤ (1+ρ²)/2`, checked on a
    /// `(t, ρ)` grid before it is returned.
    pub fn certify(&self, sub_horizon: f64, grid: CertifyGrid) -> Result<Certificate> {
        let horizon = self.horizon();
        if !(sub_horizon > 0.0) {
            return Err(domain!("sub-horizon must be positive, got {sub_horizon}"));
        }
        if horizon.is_finite() && !(sub_horizon < horizon) {
            return Err(domain!(
                "sub-horizon {sub_horizon} must lie below the model horizon {horizon}"
            ));
        }
        if grid.n_time < 2 || grid.n_radius < 1 {
            return Err(domain!("certificate grid needs >= 2 times and >= 1 radius"));
        }
        let scan_until = if sub_horizon.is_finite() {
            sub_horizon
        } else {
            UNBOUNDED_CERTIFY_SPAN
        };
        let m = f64::from(self.space.dim);
        let (sup_rate, inf_c) = self.schedule_extremes(scan_until);
        let drift_sup = self.drift.positive_sup(scan_until);
        let curvature = match self.family() {
            Family::Hyperbolic => {
                self.space.dim_minus_one() * self.space.curvature_scale() / (2.0 * inf_c)
            }
            _ => 0.0,
        };
        let nu = m + curvature + drift_sup;
        let lambda = 2.0 * sup_rate + curvature + drift_sup;
        let origin = match self.schedule {
            ScaleSchedule::Tabulated(_) => CertificateOrigin::NumericGrid,
            _ => CertificateOrigin::AnalyticModel,
        };
        let cert = Certificate::new(nu, lambda, sub_horizon, origin)?;
        let violations = self.count_violations(&cert, scan_until, grid);
        if violations > 0 {
            return Err(Error::Internal(format!(
                "certificate ({nu}, {lambda}) violated at {violations} grid points"
            )));
        }
        Ok(cert)
    }

    /// Number of `(t, ρ)` grid points where `lyapunov_lhs > ν + λρ²`
    /// (allowing 1e-12 relative slack). For models without a cut locus the
    /// radial grid spans `(0, 100]` and is extended by far-field points up
    /// to `10⁶`.
    pub fn count_violations(&self, cert: &Certificate, until: f64, grid: CertifyGrid) -> usize {
        let mut violations = 0;
        for i in 0..grid.n_time {
            let t = until * i as f64 / (grid.n_time - 1) as f64;
            if self.check_time(t).is_err() {
                violations += 1;
                continue;
            }
            let cut = self.cut_locus_radius(t);
            let radii = (0..grid.n_radius).map(|j| {
                if cut.is_finite() {
                    cut * (j as f64 + 0.5) / grid.n_radius as f64
                } else {
                    UNBOUNDED_CERTIFY_RADIUS * (j + 1) as f64 / grid.n_radius as f64
                }
            });
            let far: &[f64] = if cut.is_finite() {
                &[]
            } else {
                &[1e3, 1e4, 1e5, 1e6]
            };
            for rho in radii.chain(far.iter().copied()) {
                let rhs = cert.nu() + cert.lambda() * rho * rho;
                match self.lyapunov_lhs(t, rho) {
                    Ok(lhs) if lhs <= rhs + CERTIFY_SLACK * rhs.abs().max(lhs.abs()).max(1.0) => {}
                    _ => violations += 1,
                }
            }
        }
        violations
    }

    /// FNV-1a digest of the model parameters, stable across platforms.
    pub fn digest(&self) -> u64 {
        let mut h = Fnv::new();
        h.write_u64(u64::from(self.space.dim));
        h.write_f64(self.space.k0);
        match &self.schedule {
            ScaleSchedule::Constant { scale } => {
                h.write_u64(0);
                h.write_f64(*scale);
            }
            ScaleSchedule::RicciFlow => h.write_u64(1),
            ScaleSchedule::Tabulated(table) => {
                h.write_u64(2);
                let (xs, ys) = table.knots();
                h.write_u64(xs.len() as u64);
                xs.iter().chain(ys).for_each(|&v| h.write_f64(v));
            }
        }
        match &self.drift {
            DriftSpec::Zero => h.write_u64(0),
            DriftSpec::Constant { b } => {
                h.write_u64(1);
                h.write_f64(*b);
            }
            DriftSpec::Tabulated { times, values } => {
                h.write_u64(2);
                h.write_u64(times.len() as u64);
                times.iter().chain(values).for_each(|&v| h.write_f64(v));
            }
        }
        h.finish()
    }
}

/// Knots plus interior subdivisions of a table, restricted to `[0, until]`.
fn scan_times(table: &MonotoneCubic, until: f64) -> Vec<f64> {
    let xs = table.knots().0;
    let mut out = Vec::new();
    for w in xs.windows(2) {
        if w[0] > until {
            break;
        }
        for s in 0..TABLE_SCAN_SUBDIVISIONS {
            let t = w[0] + (w[1] - w[0]) * s as f64 / TABLE_SCAN_SUBDIVISIONS as f64;
            if t <= until {
                out.push(t);
            }
        }
    }
    if until < *xs.last().unwrap() {
        out.push(until);
    }
    out
}

fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel_tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let tol = rel_tol * whole.abs().max(f64::MIN_POSITIVE);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol {
        left + right + diff / 15.0
    } else {
        simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
}

struct Fnv(u64);

impl Fnv {
    fn new() -> Self {
        Self(0xcbf2_9ce4_8422_2325)
    }

    fn write_u64(&mut self, v: u64) {
        for byte in v.to_le_bytes() {
            self.0 ^= u64::from(byte);
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    fn write_f64(&mut self, v: f64) {
        self.write_u64(v.to_bits());
    }

    fn finish(&self) -> u64 {
        self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    fn sphere_ricci() -> EvolvingModel {
        EvolvingModel::ricci_flow(3, 1.0).unwrap()
    }

    #[test]
    fn model_space_rejects_dimension_one() {
        assert!(ModelSpace::new(1, 0.0).is_err());
        assert!(EvolvingModel::fixed(1, 0.0).is_err());
    }

    #[test]
    fn radial_drift_examples() {
        let euc = EvolvingModel::fixed(3, 0.0).unwrap();
        for &rho in &[0.1, 1.0, 7.5] {
            assert!(close(euc.radial_drift(0.3, rho).unwrap(), 1.0 / rho, 1e-15));
        }
        let v = sphere_ricci().radial_drift(0.0, PI / 2.0).unwrap();
        assert!(close(v, -PI, 1e-14));
        let hyp = EvolvingModel::fixed(2, -1.0).unwrap();
        let v = hyp.radial_drift(0.0, 1.0).unwrap();
        assert!(close(v, 0.5 / 1f64.tanh(), 1e-15));
        assert!((v - 0.656518).abs() < 1e-6);
    }

    #[test]
    fn radial_drift_errors() {
        let s = EvolvingModel::fixed(3, 1.0).unwrap();
        assert!(s.radial_drift(0.0, 0.0).is_err());
        assert!(s.radial_drift(0.0, PI).is_err());
        assert!(s.radial_drift(0.0, 4.0).is_err());
        assert!(sphere_ricci().radial_drift(0.25, 0.1).is_err());
    }

    #[test]
    fn lyapunov_lhs_examples() {
        let euc = EvolvingModel::fixed(3, 0.0).unwrap();
        assert!(close(euc.lyapunov_lhs(0.0, 2.0).unwrap(), 3.0, 1e-15));
        let v = sphere_ricci().lyapunov_lhs(0.0, PI / 2.0).unwrap();
        assert!(close(v, 1.0 - PI * PI, 1e-14));
        let drifted = euc.with_drift(DriftSpec::Constant { b: 1.0 }).unwrap();
        assert!(close(drifted.lyapunov_lhs(0.0, 2.0).unwrap(), 7.0, 1e-15));
    }

    #[test]
    fn regular_drift_parts_reassemble() {
        let models = [
            sphere_ricci(),
            EvolvingModel::fixed(4, -0.7).unwrap(),
            EvolvingModel::fixed(3, 0.0)
                .unwrap()
                .with_drift(DriftSpec::Constant { b: 0.4 })
                .unwrap(),
        ];
        for model in &models {
            for &rho in &[0.01, 0.2, 0.9] {
                let t = 0.1;
                let full = model.radial_drift(t, rho).unwrap();
                let m1 = f64::from(model.space().dim - 1);
                let parts = m1 / (2.0 * rho) + model.drift_regular_at_origin(t, rho);
                assert!(close(parts, full, 1e-12));
            }
        }
        let s = sphere_ricci();
        let t = 0.15;
        let cut = s.cut_locus_radius(t);
        let dc_over_c = s.scale_rate(t).unwrap();
        for &rt in &[0.01, 0.1, 0.3] {
            let rho = cut - rt;
            let want = dc_over_c * cut - s.radial_drift(t, rho).unwrap();
            let got = 1.0 / rt + s.drift_regular_at_cut(t, rt);
            assert!(close(got, want, 1e-10), "{got} vs {want}");
        }
    }

    #[test]
    fn time_change_examples() {
        let euc = EvolvingModel::fixed(3, 0.0).unwrap();
        assert_eq!(euc.time_change(3.0).unwrap(), 3.0);
        let v = sphere_ricci().time_change(0.2).unwrap();
        assert!(close(v, -0.25 * 0.2f64.ln(), 1e-15));
        assert!((v - 0.402359).abs() < 1e-6);
        let h = EvolvingModel::ricci_flow(2, -1.0).unwrap();
        let v = h.time_change(1.0).unwrap();
        assert!(close(v, 0.5 * 3f64.ln(), 1e-15));
        assert!(sphere_ricci().time_change(0.25).is_err());
    }

    #[test]
    fn time_change_increasing_from_zero() {
        let table = ScaleSchedule::tabulated(vec![0.0, 0.5, 1.0, 2.0], vec![1.0, 1.2, 1.3, 2.0]).unwrap();
        let models = [
            sphere_ricci(),
            EvolvingModel::ricci_flow(3, -1.0).unwrap(),
            EvolvingModel::new(ModelSpace::new(3, 0.0).unwrap(), table, DriftSpec::Zero).unwrap(),
        ];
        for model in &models {
            assert_eq!(model.time_change(0.0).unwrap(), 0.0);
            let mut last = 0.0;
            for i in 1..24 {
                let v = model.time_change(0.01 * f64::from(i)).unwrap();
                assert!(v > last);
                last = v;
            }
        }
    }

    #[test]
    fn tabulated_schedule_reproduces_ricci_flow() {
        // Dense table of the Ricci scale; quadrature must match the closed form.
        let times: Vec<f64> = (0..=40).map(|i| 0.2 * f64::from(i) / 40.0).collect();
        let scales: Vec<f64> = times.iter().map(|t| (1.0 - 4.0 * t).sqrt()).collect();
        let sched = ScaleSchedule::tabulated(times, scales).unwrap();
        let tab = EvolvingModel::new(ModelSpace::new(3, 1.0).unwrap(), sched, DriftSpec::Zero).unwrap();
        let exact = sphere_ricci();
        for &t in &[0.01, 0.05, 0.1, 0.15] {
            assert!(close(tab.scale(t).unwrap(), exact.scale(t).unwrap(), 1e-5));
            assert!(close(tab.time_change(t).unwrap(), exact.time_change(t).unwrap(), 1e-5));
        }
        assert_eq!(tab.horizon(), 0.2);
    }

    #[test]
    fn adaptive_simpson_integrates_polynomials_exactly() {
        let v = adaptive_simpson(&|x: f64| x * x * x - 2.0 * x, 0.0, 2.0, 1e-12);
        assert!((v - 0.0).abs() < 1e-12);
        let v = adaptive_simpson(&|x: f64| 1.0 / (1.0 + x), 0.0, 1.0, 1e-12);
        assert!((v - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn monotone_cubic_preserves_monotonicity_and_knots() {
        let xs = vec![0.0, 0.1, 0.5, 0.6, 1.0];
        let ys = vec![1.0, 1.0, 2.0, 5.0, 5.5];
        let table = MonotoneCubic::new(xs.clone(), ys.clone()).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            assert!(close(table.eval(*x).0, *y, 1e-15));
        }
        let mut last = table.eval(0.0).0;
        for i in 1..=1000 {
            let (v, d) = table.eval(f64::from(i) / 1000.0);
            assert!(v >= last - 1e-15 && d >= -1e-12);
            last = v;
        }
        // derivative of interpolant agrees with finite differences
        for &x in &[0.05, 0.3, 0.55, 0.8] {
            let h = 1e-6;
            let fd = (table.eval(x + h).0 - table.eval(x - h).0) / (2.0 * h);
            assert!(close(table.eval(x).1, fd, 1e-6));
        }
        assert!(MonotoneCubic::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn cut_locus_examples() {
        assert_eq!(EvolvingModel::fixed(3, 0.0).unwrap().cut_locus_radius(1.0), f64::INFINITY);
        assert_eq!(EvolvingModel::fixed(3, -1.0).unwrap().cut_locus_radius(1.0), f64::INFINITY);
        assert!(close(EvolvingModel::fixed(3, 1.0).unwrap().cut_locus_radius(0.0), PI, 1e-15));
        let v = sphere_ricci().cut_locus_radius(0.2);
        assert!(close(v, PI * 0.2f64.sqrt(), 1e-14));
        assert!((v - 1.404963).abs() < 1e-6);
    }

    #[test]
    fn certify_examples() {
        let c = EvolvingModel::fixed(3, 0.0)
            .unwrap()
            .certify(f64::INFINITY, CertifyGrid::default())
            .unwrap();
        assert_eq!((c.nu(), c.lambda()), (3.0, 0.0));
        let c = sphere_ricci().certify(0.2, CertifyGrid::default()).unwrap();
        assert_eq!((c.nu(), c.lambda()), (3.0, -4.0));
        assert_eq!(c.horizon(), 0.2);
        let c = EvolvingModel::fixed(2, -1.0)
            .unwrap()
            .certify(f64::INFINITY, CertifyGrid::default())
            .unwrap();
        assert_eq!((c.nu(), c.lambda()), (2.5, 0.5));
        let c = EvolvingModel::fixed(3, 0.0)
            .unwrap()
            .with_drift(DriftSpec::Constant { b: 1.0 })
            .unwrap()
            .certify(f64::INFINITY, CertifyGrid::default())
            .unwrap();
        assert_eq!((c.nu(), c.lambda()), (4.0, 1.0));
        assert!(sphere_ricci().certify(0.25, CertifyGrid::default()).is_err());
    }

    #[test]
    fn invalid_certificates_are_counted() {
        let model = sphere_ricci();
        let bogus = Certificate::user(3.0, -5.0).unwrap();
        assert!(model.count_violations(&bogus, 0.2, CertifyGrid::default()) > 0);
        let hyp = EvolvingModel::fixed(3, -1.0).unwrap();
        let bogus = Certificate::user(3.0, 0.0).unwrap();
        assert!(hyp.count_violations(&bogus, 1.0, CertifyGrid::default()) > 0);
    }

    #[test]
    fn backwards_super_ricci_flow_marker() {
        assert!(sphere_ricci().is_backwards_super_ricci_flow());
        assert!(EvolvingModel::ricci_flow(3, 0.0).unwrap().is_backwards_super_ricci_flow());
        assert!(!EvolvingModel::ricci_flow(3, -1.0).unwrap().is_backwards_super_ricci_flow());
        assert!(!EvolvingModel::fixed(2, -1.0).unwrap().is_backwards_super_ricci_flow());
    }

    #[test]
    fn digest_distinguishes_models() {
        let a = sphere_ricci().digest();
        let b = EvolvingModel::fixed(3, 1.0).unwrap().digest();
        let c = EvolvingModel::ricci_flow(3, 1.0).unwrap().digest();
        assert_ne!(a, b);
        assert_eq!(a, c);
    }
}
