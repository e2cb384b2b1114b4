//! End-to-end verification: certify, simulate, evaluate bounds and judge.
//!
//! Every statistic is compared to its bound with a one-sided z = 3 test:
//! a check fails iff `mean − 3·stderr` exceeds the (clamped) bound. With a
//! valid certificate the false-failure rate per check is below 0.15%, so a
//! failure points at a bug.

use std::collections::BTreeMap;

use evoflow_core::bounds::{self, BoundQuery, Certificate};
use evoflow_core::geometry::{CertifyGrid, EvolvingModel};
use evoflow_core::simulate::{
    self, rng, Backend, MCEstimate, SampleSet, SimConfig, Simulation, EXP_MOMENT_GUARD,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{CertificateConfig, RunConfig};
use crate::error::AppError;
use crate::format::sig12;
use crate::runner;

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const Z_ONE_SIDED: f64 = 3.0;
/// Tail and exit checks need `n·bound` at least this large.
pub const MIN_EXPECTED_COUNT: f64 = 20.0;
pub const TIGHTNESS_FLOOR: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CertificateChoice {
    Auto,
    Given(Certificate),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub model: EvolvingModel,
    pub certificate: CertificateChoice,
    /// Starting base-space radius.
    pub r0: f64,
    pub checkpoints: Vec<f64>,
    pub moment_orders: Vec<u32>,
    pub thetas: Vec<f64>,
    /// Exponential weights as `ϑΛ(t)`, converted at each checkpoint.
    pub theta_loads: Vec<f64>,
    pub tail_radii: Vec<f64>,
    pub exit_radii: Vec<f64>,
    pub check_qv: bool,
    pub expect_tight: bool,
    pub sim: SimConfig,
}

impl ExperimentSpec {
    /// An experiment with no statistics; fill the public fields as needed.
    pub fn new(model: EvolvingModel, certificate: CertificateChoice, sim: SimConfig) -> Self {
        Self {
            model,
            certificate,
            r0: 0.0,
            checkpoints: Vec::new(),
            moment_orders: Vec::new(),
            thetas: Vec::new(),
            theta_loads: Vec::new(),
            tail_radii: Vec::new(),
            exit_radii: Vec::new(),
            check_qv: false,
            expect_tight: false,
            sim,
        }
    }

    pub fn from_config(cfg: &RunConfig, seed: u64) -> Result<Self, AppError> {
        let certificate = match &cfg.certificate {
            CertificateConfig::Auto(_) => CertificateChoice::Auto,
            CertificateConfig::Explicit(c) => CertificateChoice::Given(c.to_certificate()?),
        };
        let e = &cfg.experiment;
        Ok(Self {
            model: cfg.model.build()?,
            certificate,
            r0: e.r0,
            checkpoints: e.checkpoints.clone(),
            moment_orders: e.moment_orders.clone(),
            thetas: e.thetas.clone(),
            theta_loads: e.theta_loads.clone(),
            tail_radii: e.tail_radii.clone(),
            exit_radii: e.exit_radii.clone(),
            check_qv: e.check_qv,
            expect_tight: e.expect_tight,
            sim: cfg.sim.to_core(seed),
        })
    }

    /// SHA-256 of the experiment's debug rendering (floats print round-trip exact).
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(format!("{self:?}").as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// The certificate the checks use, deriving one when asked.
    pub fn resolve_certificate(&self) -> Result<Certificate, AppError> {
        match self.certificate {
            CertificateChoice::Given(c) => Ok(c),
            CertificateChoice::Auto => {
                let horizon = self.model.horizon();
                let last = self.checkpoints.iter().copied().fold(f64::NAN, f64::max);
                let sub_horizon = if horizon.is_infinite() {
                    f64::INFINITY
                } else if last.is_nan() {
                    0.5 * horizon
                } else {
                    last
                };
                Ok(self.model.certify(sub_horizon, CertifyGrid::default())?)
            }
        }
    }

    fn validate(&self, cert: &Certificate) -> Result<(), AppError> {
        for &t in &self.checkpoints {
            if t.is_nan() || t <= 0.0 {
                return Err(AppError::Config(format!("checkpoint {t} must be positive")));
            }
            self.model
                .check_time(t)
                .map_err(|e| AppError::Config(format!("checkpoint {t}: {e}")))?;
            if t > cert.horizon() {
                return Err(AppError::Config(format!(
                    "checkpoint {t} lies beyond the certificate horizon {}",
                    cert.horizon()
                )));
            }
        }
        if !self.exit_radii.is_empty() && cert.lambda() < 0.0 {
            return Err(AppError::Config(format!(
                "exit-time checks need lambda >= 0, certificate has {}",
                cert.lambda()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Moment,
    ExpMoment,
    Tail,
    Exit,
    Qv,
    Tightness,
}

impl CheckKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CheckKind::Moment => "moment",
            CheckKind::ExpMoment => "exp_moment",
            CheckKind::Tail => "tail",
            CheckKind::Exit => "exit",
            CheckKind::Qv => "qv",
            CheckKind::Tightness => "tightness",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Skipped,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Skipped => "skipped",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundCheck {
    pub kind: CheckKind,
    pub t: f64,
    pub params: BTreeMap<String, f64>,
    /// Clamped to `[0, 1]` for probabilities; the target `t` for `qv`.
    /// An infinite bound is written as `null`.
    #[serde(with = "extended_float")]
    pub bound: f64,
    pub estimate_mean: Option<f64>,
    pub estimate_stderr: Option<f64>,
    pub verdict: Verdict,
    /// `(bound − mean)/bound`.
    pub slack: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl BoundCheck {
    fn judged(kind: CheckKind, t: f64, params: BTreeMap<String, f64>, bound: f64, est: &MCEstimate) -> Self {
        let fail = est.mean - Z_ONE_SIDED * est.stderr > bound;
        Self {
            kind,
            t,
            params,
            bound,
            estimate_mean: Some(est.mean),
            estimate_stderr: Some(est.stderr),
            verdict: if fail { Verdict::Fail } else { Verdict::Pass },
            slack: slack(bound, est.mean),
            reason: None,
        }
    }

    fn skipped(kind: CheckKind, t: f64, params: BTreeMap<String, f64>, bound: f64, reason: String) -> Self {
        Self {
            kind,
            t,
            params,
            bound,
            estimate_mean: None,
            estimate_stderr: None,
            verdict: Verdict::Skipped,
            slack: None,
            reason: Some(reason),
        }
    }

    /// Ratio check: `mean/bound ∈ [0.95, 1 + 3·stderr/bound]`.
    fn tightness(of: &BoundCheck) -> Self {
        let mut check = of.clone();
        check.kind = CheckKind::Tightness;
        let (Some(ratio), Some(se)) = (tightness_ratio(of), of.estimate_stderr) else {
            check.verdict = Verdict::Skipped;
            return check;
        };
        let upper = 1.0 + Z_ONE_SIDED * se / of.bound;
        check.verdict = if (TIGHTNESS_FLOOR..=upper).contains(&ratio) {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        check
    }
}

mod extended_float {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

fn slack(bound: f64, mean: f64) -> Option<f64> {
    (bound > 0.0).then(|| (bound - mean) / bound)
}

/// `estimate.mean / bound`; `None` when there is no estimate or the bound
/// is not positive.
pub fn tightness_ratio(check: &BoundCheck) -> Option<f64> {
    let mean = check.estimate_mean?;
    (check.bound > 0.0).then(|| mean / check.bound)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Violation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub schema_version: u32,
    pub tool_version: String,
    pub spec_digest: String,
    pub certificate: Certificate,
    pub seed: u64,
    pub status: Status,
    pub checks: Vec<BoundCheck>,
    pub notes: Vec<String>,
}

pub const CSV_HEADER: &str = "kind,t,params,bound,estimate_mean,estimate_stderr,verdict,slack";

fn opt(x: Option<f64>) -> String {
    x.map(sig12).unwrap_or_default()
}

impl Report {
    pub fn to_json(&self) -> Result<String, AppError> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self, AppError> {
        Ok(serde_json::from_str(text)?)
    }

    /// One row per check; `params` reads `name=value` joined by `;`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for c in &self.checks {
            let params: Vec<String> = c.params.iter().map(|(k, v)| format!("{k}={}", sig12(*v))).collect();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                c.kind.as_str(),
                sig12(c.t),
                params.join(";"),
                sig12(c.bound),
                opt(c.estimate_mean),
                opt(c.estimate_stderr),
                c.verdict.as_str(),
                opt(c.slack),
            ));
        }
        out
    }

    pub fn failures(&self) -> impl Iterator<Item = &BoundCheck> {
        self.checks.iter().filter(|c| c.verdict == Verdict::Fail)
    }
}

fn params<const N: usize>(pairs: [(&str, f64); N]) -> BTreeMap<String, f64> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// Runs every check at every checkpoint. Checkpoint `k` simulates with seed
/// `checkpoint_seed(seed, k)` and reuses its samples across statistics.
pub fn run_verification(spec: &ExperimentSpec, workers: usize) -> Result<Report, AppError> {
    let cert = spec.resolve_certificate()?;
    spec.validate(&cert)?;
    let mut checks = Vec::new();
    let mut notes = Vec::new();
    if cert.lambda() < 0.0 && !spec.tail_radii.is_empty() {
        notes.push(format!(
            "certificate lambda = {} < 0: tail bounds use the concentration expression as stated, \
             whose exponential step assumes theta*Lambda < 1 only",
            sig12(cert.lambda())
        ));
    }
    let start = spec.model.scale(0.0)? * spec.r0;
    for (k, &t) in spec.checkpoints.iter().enumerate() {
        let seed = rng::checkpoint_seed(spec.sim.seed, k as u64);
        let radial_main = spec.sim.backend == Backend::RadialEuler;
        let mut cfg = spec.sim;
        cfg.seed = seed;
        if radial_main && !spec.exit_radii.is_empty() {
            cfg.record_sup = true;
        }
        let main = runner::run(&Simulation::new(&spec.model, spec.r0, t, cfg)?.with_certificate(cert), workers)?;
        let needs_radial = !spec.exit_radii.is_empty() || spec.check_qv;
        let aux = if needs_radial && !radial_main {
            let mut aux_cfg = spec.sim;
            aux_cfg.backend = Backend::RadialEuler;
            aux_cfg.seed = rng::checkpoint_seed(seed, 0);
            aux_cfg.record_sup = !spec.exit_radii.is_empty();
            let sim = Simulation::new(&spec.model, spec.r0, t, aux_cfg)?.with_certificate(cert);
            Some(runner::run(&sim, workers)?)
        } else {
            None
        };
        let radial = aux.as_ref().unwrap_or(&main);
        let stopped = main.stopped_count() + aux.as_ref().map_or(0, SampleSet::stopped_count);
        if stopped > 0 {
            notes.push(format!("t={}: {stopped} paths stopped at the cut locus", sig12(t)));
        }
        let query = BoundQuery::new(cert, start, t)?;
        checkpoint_checks(spec, &cert, &query, &main, radial, &mut checks)?;
    }
    let status = if checks.iter().any(|c| c.verdict == Verdict::Fail) {
        Status::Violation
    } else {
        Status::Pass
    };
    Ok(Report {
        schema_version: REPORT_SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        spec_digest: spec.digest(),
        certificate: cert,
        seed: spec.sim.seed,
        status,
        checks,
        notes,
    })
}

fn checkpoint_checks(
    spec: &ExperimentSpec,
    cert: &Certificate,
    query: &BoundQuery,
    main: &SampleSet,
    radial: &SampleSet,
    checks: &mut Vec<BoundCheck>,
) -> Result<(), AppError> {
    let t = query.t;
    let n = main.len() as f64;
    let growth = cert.growth(t)?;

    for &p in &spec.moment_orders {
        let bound = bounds::even_moment_bound(&query.with_p(p))?;
        let est = simulate::estimate_moment(main, p)?;
        let check = BoundCheck::judged(CheckKind::Moment, t, params([("p", f64::from(p))]), bound, &est);
        if spec.expect_tight {
            let tight = BoundCheck::tightness(&check);
            checks.push(check);
            checks.push(tight);
        } else {
            checks.push(check);
        }
    }

    let thetas = spec
        .thetas
        .iter()
        .copied()
        .chain(spec.theta_loads.iter().map(|load| load / growth));
    for theta in thetas {
        let load = theta * growth;
        let p = params([("theta", theta), ("theta_load", load)]);
        if load > EXP_MOMENT_GUARD {
            let reason = format!("theta*Lambda = {} exceeds {EXP_MOMENT_GUARD}", sig12(load));
            let bound = bounds::exp_moment_bound(&query.with_theta(theta)).unwrap_or(f64::INFINITY);
            checks.push(BoundCheck::skipped(CheckKind::ExpMoment, t, p, bound, reason));
            continue;
        }
        let bound = bounds::exp_moment_bound(&query.with_theta(theta))?;
        let est = simulate::estimate_exp_moment(main, theta, cert)?;
        let check = BoundCheck::judged(CheckKind::ExpMoment, t, p, bound, &est);
        if spec.expect_tight {
            let tight = BoundCheck::tightness(&check);
            checks.push(check);
            checks.push(tight);
        } else {
            checks.push(check);
        }
    }

    for &r in &spec.tail_radii {
        let opt = bounds::concentration_bound_optimized(&query.with_radius(r))?;
        let p = params([("r", r), ("delta", opt.delta)]);
        checks.push(probability_check(CheckKind::Tail, t, p, opt.bound.value, n, || {
            simulate::estimate_tail(main, r)
        })?);
    }

    for &r in &spec.exit_radii {
        let opt = bounds::exit_time_bound_optimized(&query.with_radius(r))?;
        let p = params([("r", r), ("delta", opt.delta)]);
        let nr = radial.len() as f64;
        checks.push(probability_check(CheckKind::Exit, t, p, opt.bound.value, nr, || {
            simulate::estimate_sup_tail(radial, r)
        })?);
    }

    if spec.check_qv {
        let est = simulate::estimate_quadratic_variation(radial)?;
        let dt = radial.meta.config.dt;
        let pass = (est.mean - t).abs() <= dt.sqrt() + Z_ONE_SIDED * est.stderr;
        checks.push(BoundCheck {
            kind: CheckKind::Qv,
            t,
            params: params([("dt", dt)]),
            bound: t,
            estimate_mean: Some(est.mean),
            estimate_stderr: Some(est.stderr),
            verdict: if pass { Verdict::Pass } else { Verdict::Fail },
            slack: slack(t, est.mean),
            reason: None,
        });
    }
    Ok(())
}

fn probability_check(
    kind: CheckKind,
    t: f64,
    p: BTreeMap<String, f64>,
    bound: f64,
    n: f64,
    estimate: impl FnOnce() -> evoflow_core::Result<MCEstimate>,
) -> Result<BoundCheck, AppError> {
    if n * bound < MIN_EXPECTED_COUNT {
        let reason = format!("expected count n*bound = {} below {MIN_EXPECTED_COUNT}", sig12(n * bound));
        return Ok(BoundCheck::skipped(kind, t, p, bound, reason));
    }
    Ok(BoundCheck::judged(kind, t, p, bound, &estimate()?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn euclid_spec(n: usize) -> ExperimentSpec {
        let model = EvolvingModel::fixed(3, 0.0).unwrap();
        let cert = Certificate::user(3.0, 0.0).unwrap();
        let mut spec = ExperimentSpec::new(model, CertificateChoice::Given(cert), SimConfig::new(n, 1e-3, 42));
        spec.checkpoints = vec![1.0];
        spec
    }

    #[test]
    fn empty_checkpoints_pass_vacuously() {
        let mut spec = euclid_spec(10);
        spec.checkpoints.clear();
        spec.moment_orders = vec![1];
        let report = run_verification(&spec, 1).unwrap();
        assert!(report.checks.is_empty());
        assert_eq!(report.status, Status::Pass);
    }

    #[test]
    fn euclidean_moments_are_tight() {
        let mut spec = euclid_spec(20_000);
        spec.sim.backend = Backend::AmbientExact;
        spec.moment_orders = vec![1, 2];
        spec.expect_tight = true;
        let report = run_verification(&spec, 4).unwrap();
        assert_eq!(report.status, Status::Pass, "{report:?}");
        assert_eq!(report.checks.len(), 4);
        for c in &report.checks {
            assert!(c.slack.unwrap().abs() < 0.05, "{c:?}");
        }
    }

    #[test]
    fn ratio_of_clamped_bound() {
        let check = BoundCheck {
            kind: CheckKind::Tail,
            t: 1.0,
            params: BTreeMap::new(),
            bound: 1.0,
            estimate_mean: Some(0.5),
            estimate_stderr: Some(0.01),
            verdict: Verdict::Pass,
            slack: Some(0.5),
            reason: None,
        };
        assert_eq!(tightness_ratio(&check), Some(0.5));
    }

    #[test]
    fn violation_status_and_one_sided_rule() {
        let est = MCEstimate {
            mean: 1.2,
            stderr: 0.05,
            n: 100,
            level: 0.95,
            lower: 1.1,
            upper: 1.3,
        };
        assert_eq!(BoundCheck::judged(CheckKind::Moment, 1.0, BTreeMap::new(), 1.0, &est).verdict, Verdict::Fail);
        let noisy = MCEstimate { stderr: 0.1, ..est };
        assert_eq!(BoundCheck::judged(CheckKind::Moment, 1.0, BTreeMap::new(), 1.0, &noisy).verdict, Verdict::Pass);
    }

    #[test]
    fn report_round_trip_is_byte_identical() {
        let mut spec = euclid_spec(2_000);
        spec.moment_orders = vec![1, 3];
        spec.thetas = vec![0.1, 2.0];
        spec.tail_radii = vec![0.5, 6.0];
        spec.exit_radii = vec![2.0];
        spec.check_qv = true;
        let report = run_verification(&spec, 2).unwrap();
        let text = report.to_json().unwrap();
        assert_eq!(Report::from_json(&text).unwrap().to_json().unwrap(), text);
        let kinds: Vec<_> = report.checks.iter().map(|c| c.verdict).collect();
        // ϑ = 2 is over the guard and r = 6 lacks power
        assert_eq!(kinds.iter().filter(|v| **v == Verdict::Skipped).count(), 2);
        assert_eq!(report.to_csv().lines().count(), report.checks.len() + 1);
    }

    #[test]
    fn rejects_exit_checks_with_negative_lambda() {
        let mut spec = euclid_spec(10);
        spec.model = EvolvingModel::ricci_flow(3, 1.0).unwrap();
        spec.certificate = CertificateChoice::Auto;
        spec.checkpoints = vec![0.2];
        spec.exit_radii = vec![1.0];
        assert!(matches!(run_verification(&spec, 1), Err(AppError::Config(_))));
    }

    #[test]
    fn rejects_checkpoints_past_the_horizon() {
        let mut spec = euclid_spec(10);
        spec.certificate = CertificateChoice::Given(Certificate::user(3.0, 0.0).unwrap().with_horizon(0.5).unwrap());
        assert!(matches!(run_verification(&spec, 1), Err(AppError::Config(_))));
    }
}
