//! Command-line interface.
//!
//! Exit codes: 0 success or all checks passed, 1 a bound violation was
//! detected, 2 usage or config error, 3 numerical guard refusal.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use evoflow_core::bounds::{self, BoundQuery, Certificate, CertificateOrigin};
use evoflow_core::geometry::{CertifyGrid, DriftSpec, EvolvingModel, Family, ModelSpace, ScaleSchedule};
use evoflow_core::simulate::{rng, Simulation};
use evoflow_core::special_fn::{self, LaguerreParams};

use crate::config::RunConfig;
use crate::error::{AppError, EXIT_VIOLATION};
use crate::format::sig12;
use crate::harness::{self, ExperimentSpec, Status};
use crate::io::{self, Manifest, OutDir};
use crate::runner;

#[derive(Debug, Parser)]
#[command(name = "evoflow", version, about = "Moment, concentration and exit-time bounds for g(t)-Brownian motion on evolving model spaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate special-function identities and print a table
    Special(SpecialArgs),
    /// Evaluate one bound for an explicit certificate and print its value
    Bounds(BoundsArgs),
    /// Derive a Lyapunov certificate for a model space
    Certify(CertifyArgs),
    /// Simulate the radial process at each checkpoint of a config
    Simulate(RunArgs),
    /// Run every configured check and write a report
    Verify(RunArgs),
}

#[derive(Debug, Args)]
pub struct SpecialArgs {
    #[command(subcommand)]
    pub which: Special,
}

#[derive(Debug, Subcommand)]
pub enum Special {
    /// Generalized Laguerre polynomial by explicit sum and by recurrence
    Laguerre {
        /// Polynomial degree
        #[arg(long)]
        degree: u32,
        /// Parameter alpha (> -1)
        #[arg(long)]
        alpha: f64,
        /// Evaluation point
        #[arg(long, allow_hyphen_values = true)]
        z: f64,
    },
    /// Truncated generating series against its closed form
    Generating {
        /// Series variable in [0, 1)
        #[arg(long)]
        gamma: f64,
        /// Parameter alpha (> -1)
        #[arg(long)]
        alpha: f64,
        /// Evaluation point
        #[arg(long, allow_hyphen_values = true)]
        z: f64,
        /// Number of series terms
        #[arg(long, default_value_t = 200)]
        terms: u32,
    },
    /// Growth factor Lambda(t) = (e^{lambda t} - 1)/lambda
    Growth {
        /// Rate lambda
        #[arg(long, allow_hyphen_values = true)]
        lambda: f64,
        /// Time t >= 0
        #[arg(long)]
        t: f64,
    },
    /// Gaussian moments E(mu + sigma N)^{2p} and E exp(theta/2 (mu + sigma N)^2)
    Gaussian {
        /// Mean mu
        #[arg(long, allow_hyphen_values = true)]
        mu: f64,
        /// Variance sigma^2
        #[arg(long)]
        sigma2: f64,
        /// Moment order p
        #[arg(long, default_value_t = 1)]
        p: u32,
        /// Exponential weight theta (theta * sigma2 < 1)
        #[arg(long)]
        theta: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum BoundKind {
    SecondMoment,
    FirstMoment,
    EvenMoment,
    ExpMoment,
    Concentration,
    ConcentrationOptimized,
    ExitTime,
    ExitTimeOptimized,
    Rate,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    /// Certificate nu (>= 1)
    #[arg(long)]
    pub nu: f64,
    /// Certificate lambda
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: f64,
    /// Starting g(0)-distance from the pole
    #[arg(long, default_value_t = 0.0)]
    pub r0: f64,
    /// Time t
    #[arg(long)]
    pub t: f64,
    /// Which bound to evaluate
    #[arg(long, value_enum)]
    pub kind: BoundKind,
    /// Moment order (even_moment)
    #[arg(long)]
    pub p: Option<u32>,
    /// Exponential weight (exp_moment)
    #[arg(long)]
    pub theta: Option<f64>,
    /// Target radius (concentration, exit_time)
    #[arg(long)]
    pub r: Option<f64>,
    /// Free parameter in (0, 1) for the non-optimized probability bounds
    #[arg(long)]
    pub delta: Option<f64>,
    /// Certificate horizon (unbounded if omitted)
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Print the unclamped value of probability bounds
    #[arg(long)]
    pub raw: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Sphere,
    Euclidean,
    Hyperbolic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScheduleKind {
    Static,
    Ricci,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    /// Model family
    #[arg(long, value_enum, required_unless_present_any = ["config", "from_curvature"])]
    pub model: Option<ModelKind>,
    /// Manifold dimension m (>= 2)
    #[arg(long, default_value_t = 3)]
    pub dim: u32,
    /// Initial sectional curvature; defaults to 1, 0 or -1 by family
    #[arg(long, allow_hyphen_values = true)]
    pub k0: Option<f64>,
    /// Metric schedule
    #[arg(long, value_enum, default_value_t = ScheduleKind::Static)]
    pub schedule: ScheduleKind,
    /// Constant radial drift b
    #[arg(long, allow_hyphen_values = true)]
    pub drift: Option<f64>,
    /// Horizon up to which the certificate must hold
    #[arg(long)]
    pub sub_horizon: Option<f64>,
    /// Read the model block of a config file instead
    #[arg(long, conflicts_with_all = ["model", "from_curvature"])]
    pub config: Option<PathBuf>,
    /// Certify from curvature constants C1, C2 instead of a model
    #[arg(long, requires_all = ["c1", "c2"])]
    pub from_curvature: bool,
    /// Ricci lower bound constant: Ric >= -C1 (1 + r^2)
    #[arg(long)]
    pub c1: Option<f64>,
    /// Drift and metric-variation constant: bounded by C2 (1 + r)
    #[arg(long)]
    pub c2: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Run configuration (JSON), or a manifest from an earlier run
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory
    #[arg(long, default_value = "evoflow-out")]
    pub out: PathBuf,
    /// Seed; overrides the config and EVOFLOW_SEED
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on this
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
}

/// Runs a parsed invocation, printing results to `out`.
pub fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<ExitCode, AppError> {
    match cli.command {
        Command::Special(args) => special(args.which, out),
        Command::Bounds(args) => bounds_cmd(&args, out),
        Command::Certify(args) => certify(&args, out),
        Command::Simulate(args) => simulate(&args, out),
        Command::Verify(args) => verify(&args, out),
    }
}

fn row(out: &mut dyn Write, name: &str, value: f64) -> Result<(), AppError> {
    writeln!(out, "{name:<20} {}", sig12(value))?;
    Ok(())
}

fn special(which: Special, out: &mut dyn Write) -> Result<ExitCode, AppError> {
    match which {
        Special::Laguerre { degree, alpha, z } => {
            let params = LaguerreParams::new(degree, alpha, z).with_max_degree(degree.max(special_fn::DEFAULT_MAX_DEGREE));
            let value = special_fn::laguerre(&params)?;
            let explicit = special_fn::laguerre_explicit(degree, alpha, z);
            let recurrence = special_fn::laguerre_recurrence(degree, alpha, z);
            row(out, "laguerre", value)?;
            row(out, "explicit_sum", explicit)?;
            row(out, "recurrence", recurrence)?;
            row(out, "abs_difference", (explicit - recurrence).abs())?;
        }
        Special::Generating { gamma, alpha, z, terms } => {
            let sum = special_fn::laguerre_generating_sum(gamma, alpha, z, terms)?;
            let closed = special_fn::laguerre_generating_closed_form(gamma, alpha, z)?;
            row(out, "series", sum)?;
            row(out, "closed_form", closed)?;
            row(out, "rel_difference", ((sum - closed) / closed).abs())?;
        }
        Special::Growth { lambda, t } => {
            row(out, "Lambda", special_fn::lambda_integral(lambda, t)?)?;
        }
        Special::Gaussian { mu, sigma2, p, theta } => {
            row(out, "even_moment", special_fn::gaussian_even_moment(mu, sigma2, p)?)?;
            if let Some(theta) = theta {
                row(out, "exp_moment", special_fn::gaussian_exp_moment(mu, sigma2, theta)?)?;
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn bounds_cmd(a: &BoundsArgs, out: &mut dyn Write) -> Result<ExitCode, AppError> {
    let cert = Certificate::new(
        a.nu,
        a.lambda,
        a.horizon.unwrap_or(f64::INFINITY),
        CertificateOrigin::UserSupplied,
    )?;
    let mut q = BoundQuery::new(cert, a.r0, a.t)?;
    q.p = a.p;
    q.theta = a.theta;
    q.r = a.r;
    q.delta = a.delta;
    let prob = |b: bounds::ProbabilityBound| if a.raw { b.raw } else { b.value };
    let value = match a.kind {
        BoundKind::SecondMoment => bounds::second_moment_bound(&q)?,
        BoundKind::FirstMoment => bounds::first_moment_bound(&q)?,
        BoundKind::EvenMoment => bounds::even_moment_bound(&q)?,
        BoundKind::ExpMoment => bounds::exp_moment_bound(&q)?,
        BoundKind::Concentration => prob(bounds::concentration_bound(&q)?),
        BoundKind::ConcentrationOptimized => prob(bounds::concentration_bound_optimized(&q)?.bound),
        BoundKind::ExitTime => prob(bounds::exit_time_bound(&q)?),
        BoundKind::ExitTimeOptimized => prob(bounds::exit_time_bound_optimized(&q)?.bound),
        BoundKind::Rate => bounds::concentration_rate(&cert, a.t)?,
    };
    writeln!(out, "{}", sig12(value))?;
    Ok(ExitCode::SUCCESS)
}

fn origin_name(origin: CertificateOrigin) -> &'static str {
    match origin {
        CertificateOrigin::UserSupplied => "user_supplied",
        CertificateOrigin::AnalyticModel => "analytic_model",
        CertificateOrigin::CurvatureBounds => "curvature_bounds",
        CertificateOrigin::NumericGrid => "numeric_grid",
    }
}

fn model_from_flags(a: &CertifyArgs, kind: ModelKind) -> Result<EvolvingModel, AppError> {
    let k0 = a.k0.unwrap_or(match kind {
        ModelKind::Sphere => 1.0,
        ModelKind::Euclidean => 0.0,
        ModelKind::Hyperbolic => -1.0,
    });
    let space = ModelSpace::new(a.dim, k0)?;
    let expected = match kind {
        ModelKind::Sphere => Family::Sphere,
        ModelKind::Euclidean => Family::Euclidean,
        ModelKind::Hyperbolic => Family::Hyperbolic,
    };
    if space.family() != expected {
        return Err(AppError::Usage(format!("k0 = {k0} does not describe a {kind:?} model")));
    }
    let schedule = match a.schedule {
        ScheduleKind::Static => ScaleSchedule::Constant { scale: 1.0 },
        ScheduleKind::Ricci => ScaleSchedule::RicciFlow,
    };
    let drift = a.drift.map_or(DriftSpec::Zero, |b| DriftSpec::Constant { b });
    Ok(EvolvingModel::new(space, schedule, drift)?)
}

fn certify(a: &CertifyArgs, out: &mut dyn Write) -> Result<ExitCode, AppError> {
    let cert = if a.from_curvature {
        let (c1, c2) = (a.c1.unwrap_or_default(), a.c2.unwrap_or_default());
        bounds::certificate_from_curvature(a.dim, c1, c2)?
    } else {
        let model = match (&a.config, a.model) {
            (Some(path), _) => RunConfig::load(path)?.model.build()?,
            (None, Some(kind)) => model_from_flags(a, kind)?,
            (None, None) => return Err(AppError::Usage("one of --model, --config or --from-curvature is required".into())),
        };
        let sub_horizon = a.sub_horizon.unwrap_or_else(|| {
            let h = model.horizon();
            if h.is_finite() {
                0.5 * h
            } else {
                f64::INFINITY
            }
        });
        model.certify(sub_horizon, CertifyGrid::default())?
    };
    writeln!(
        out,
        "nu={} lambda={} horizon={} origin={}",
        sig12(cert.nu()),
        sig12(cert.lambda()),
        sig12(cert.horizon()),
        origin_name(cert.origin())
    )?;
    Ok(ExitCode::SUCCESS)
}

fn load_run(a: &RunArgs) -> Result<(RunConfig, u64), AppError> {
    if a.workers == 0 {
        return Err(AppError::Usage("--workers must be >= 1".into()));
    }
    let cfg = RunConfig::load(&a.config)?;
    let seed = cfg.resolve_seed(a.seed)?;
    Ok((cfg, seed))
}

fn simulate(a: &RunArgs, out: &mut dyn Write) -> Result<ExitCode, AppError> {
    let started = Instant::now();
    let (cfg, seed) = load_run(a)?;
    let spec = ExperimentSpec::from_config(&cfg, seed)?;
    let cert = spec.resolve_certificate()?;
    let mut dir = OutDir::create(&a.out)?;
    for (k, &t) in spec.checkpoints.iter().enumerate() {
        let mut sim_cfg = spec.sim;
        sim_cfg.seed = rng::checkpoint_seed(seed, k as u64);
        let sim = Simulation::new(&spec.model, spec.r0, t, sim_cfg)?.with_certificate(cert);
        let samples = runner::run(&sim, a.workers)?;
        dir.write(&format!("samples_{k}.csv"), &io::samples_csv(&samples))?;
        dir.write(&format!("samples_{k}.meta.json"), &io::pretty_json(&samples.meta)?)?;
        writeln!(
            out,
            "t={} paths={} stopped={} -> samples_{k}.csv",
            sig12(t),
            samples.len(),
            samples.stopped_count()
        )?;
    }
    let mut manifest = Manifest::new("simulate", &cfg, seed, a.workers);
    manifest.wall_clock_seconds = started.elapsed().as_secs_f64();
    dir.finish(manifest)?;
    Ok(ExitCode::SUCCESS)
}

fn verify(a: &RunArgs, out: &mut dyn Write) -> Result<ExitCode, AppError> {
    let started = Instant::now();
    let (cfg, seed) = load_run(a)?;
    let spec = ExperimentSpec::from_config(&cfg, seed)?;
    let report = harness::run_verification(&spec, a.workers)?;
    let mut dir = OutDir::create(&a.out)?;
    dir.write("report.json", &report.to_json()?)?;
    dir.write("report.csv", &report.to_csv())?;
    let mut manifest = Manifest::new("verify", &cfg, seed, a.workers);
    manifest.wall_clock_seconds = started.elapsed().as_secs_f64();
    dir.finish(manifest)?;

    let failures = report.failures().count();
    for c in report.failures() {
        eprintln!(
            "violation: {} at t={} bound={} mean={} stderr={}",
            c.kind.as_str(),
            sig12(c.t),
            sig12(c.bound),
            c.estimate_mean.map(sig12).unwrap_or_default(),
            c.estimate_stderr.map(sig12).unwrap_or_default()
        );
    }
    let status = match report.status {
        Status::Pass => "pass",
        Status::Violation => "violation",
    };
    writeln!(
        out,
        "status={status} checks={} failures={failures} nu={} lambda={}",
        report.checks.len(),
        sig12(report.certificate.nu()),
        sig12(report.certificate.lambda())
    )?;
    Ok(match report.status {
        Status::Pass => ExitCode::SUCCESS,
        Status::Violation => ExitCode::from(EXIT_VIOLATION),
    })
}
