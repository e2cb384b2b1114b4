use evoflow_core::bounds::{self, BoundQuery, Certificate};
use evoflow_core::geometry::{DriftSpec, EvolvingModel};
use evoflow_core::simulate::{
    estimate_exp_moment, estimate_moment, estimate_sup_tail, estimate_tail, realized_quadratic_variation,
    simulate_radial, simulate_sup_radial, Backend, MCEstimate, SimConfig,
};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn within(est: &MCEstimate, target: f64, z: f64) -> bool {
    (est.mean - target).abs() <= z * est.stderr
}

fn ambient(n: usize, seed: u64) -> SimConfig {
    SimConfig::new(n, 1e-3, seed).with_backend(Backend::AmbientExact)
}

#[test]
fn euclidean_moments_match_chi_square() {
    let model = EvolvingModel::fixed(3, 0.0).unwrap();
    let s = simulate_radial(&model, 0.0, 1.0, ambient(100_000, 42)).unwrap();
    let m1 = estimate_moment(&s, 1).unwrap();
    assert!(within(&m1, 3.0, 3.0), "{m1:?}");
    let m2 = estimate_moment(&s, 2).unwrap();
    assert!(within(&m2, 15.0, 3.0), "{m2:?}");
}

#[test]
fn euclidean_exponential_moment_matches_gaussian_value() {
    let model = EvolvingModel::fixed(3, 0.0).unwrap();
    let cert = Certificate::user(3.0, 0.0).unwrap();
    let s = simulate_radial(&model, 0.0, 1.0, ambient(1_000_000, 42)).unwrap();
    let e = estimate_exp_moment(&s, 0.5, &cert).unwrap();
    assert!(within(&e, 2f64.powf(1.5), 3.0), "{e:?}");
}

#[test]
fn euclidean_tail_below_concentration_bound() {
    let model = EvolvingModel::fixed(3, 0.0).unwrap();
    let s = simulate_radial(&model, 0.0, 1.0, ambient(1_000_000, 7)).unwrap();
    let tail = estimate_tail(&s, 4.0).unwrap();
    let q = BoundQuery::new(Certificate::user(3.0, 0.0).unwrap(), 0.0, 1.0)
        .unwrap()
        .with_radius(4.0);
    let bound = bounds::concentration_bound_optimized(&q).unwrap().bound.value;
    assert!((bound - 0.018518).abs() < 1e-6);
    assert!(tail.mean < bound);
    // χ²₃ oracle: P(ρ² ≥ 16)
    let exact = 1.0 - ChiSquared::new(3.0).unwrap().cdf(16.0);
    assert!(within(&tail, exact, 4.0), "{tail:?} vs {exact}");
}

/// Kolmogorov–Smirnov statistic of `samples` against `cdf`.
fn ks_statistic(mut samples: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn ambient_euclidean_law_passes_ks() {
    // Growing scale: c(t) = 1 + t on a tabulated schedule.
    let times: Vec<f64> = (0..=20).map(|i| 0.1 * f64::from(i)).collect();
    let scales: Vec<f64> = times.iter().map(|t| 1.0 + t).collect();
    let schedule = evoflow_core::geometry::ScaleSchedule::tabulated(times, scales).unwrap();
    let tabulated = EvolvingModel::new(
        evoflow_core::geometry::ModelSpace::new(4, 0.0).unwrap(),
        schedule,
        DriftSpec::Zero,
    )
    .unwrap();
    let n = 10_000;
    let critical = 1.628 / (n as f64).sqrt();
    for (model, t) in [(EvolvingModel::fixed(3, 0.0).unwrap(), 1.0), (tabulated, 1.5)] {
        let m = f64::from(model.space().dim);
        let scale = model.time_change(t).unwrap() * model.scale(t).unwrap().powi(2);
        let s = simulate_radial(&model, 0.0, t, ambient(n, 11)).unwrap();
        let sq: Vec<f64> = s.terminal_radii.iter().map(|r| r * r / scale).collect();
        let chi = ChiSquared::new(m).unwrap();
        let d = ks_statistic(sq, |x| chi.cdf(x));
        assert!(d < critical, "KS {d} >= {critical}");
    }
}

fn assert_backends_agree(model: &EvolvingModel, r0: f64, t: f64, seed: u64) {
    let euler = simulate_radial(model, r0, t, SimConfig::new(100_000, 1e-3, seed)).unwrap();
    let exact = simulate_radial(model, r0, t, ambient(100_000, seed + 1)).unwrap();
    for p in [1, 2] {
        let a = estimate_moment(&euler, p).unwrap();
        let b = estimate_moment(&exact, p).unwrap();
        let se = a.stderr.hypot(b.stderr);
        assert!(
            (a.mean - b.mean).abs() < 3.0 * se,
            "p={p}: euler {a:?} vs ambient {b:?}"
        );
    }
}

#[test]
fn backends_agree_euclidean() {
    assert_backends_agree(&EvolvingModel::fixed(3, 0.0).unwrap(), 0.0, 1.0, 100);
    assert_backends_agree(&EvolvingModel::fixed(2, 0.0).unwrap(), 0.5, 1.0, 110);
}

#[test]
fn backends_agree_shrinking_sphere() {
    assert_backends_agree(&EvolvingModel::ricci_flow(3, 1.0).unwrap(), 0.0, 0.2, 200);
}

#[test]
fn backends_agree_static_sphere() {
    assert_backends_agree(&EvolvingModel::fixed(2, 1.0).unwrap(), 0.3, 0.5, 300);
}

#[test]
fn backends_agree_hyperbolic() {
    assert_backends_agree(&EvolvingModel::fixed(2, -1.0).unwrap(), 0.0, 1.0, 400);
    assert_backends_agree(&EvolvingModel::ricci_flow(3, -0.5).unwrap(), 0.0, 0.5, 410);
}

#[test]
fn quadratic_variation_tends_to_t() {
    for model in [EvolvingModel::fixed(3, 0.0).unwrap(), EvolvingModel::fixed(3, 1.0).unwrap()] {
        let qv = realized_quadratic_variation(&model, 0.0, 1.0, SimConfig::new(10_000, 1e-3, 5)).unwrap();
        assert!((qv.mean - 1.0).abs() < 0.05, "{qv:?}");
    }
}

#[test]
fn sup_tail_dominates_terminal_tail() {
    let model = EvolvingModel::fixed(3, 0.0).unwrap();
    let s = simulate_sup_radial(&model, 0.0, 1.0, SimConfig::new(5_000, 1e-3, 8)).unwrap();
    for r in [0.5, 1.0, 2.0, 3.0, 4.0] {
        let sup = estimate_sup_tail(&s, r).unwrap().mean;
        let end = estimate_tail(&s, r).unwrap().mean;
        assert!(sup >= end);
    }
}

#[test]
fn drifted_exit_probability_below_bound() {
    let model = EvolvingModel::fixed(3, 0.0)
        .unwrap()
        .with_drift(DriftSpec::Constant { b: 1.0 })
        .unwrap();
    let cert = model
        .certify(f64::INFINITY, Default::default())
        .unwrap();
    assert_eq!((cert.nu(), cert.lambda()), (4.0, 1.0));
    let s = simulate_sup_radial(&model, 0.0, 1.0, SimConfig::new(20_000, 1e-3, 9)).unwrap();
    for r in [3.0, 4.0] {
        let q = BoundQuery::new(cert, 0.0, 1.0).unwrap().with_radius(r);
        let bound = bounds::exit_time_bound_optimized(&q).unwrap().bound.value;
        let est = estimate_sup_tail(&s, r).unwrap();
        assert!(est.mean - 3.0 * est.stderr <= bound, "r={r}: {est:?} vs {bound}");
    }
}

#[test]
fn worker_order_does_not_change_samples() {
    let model = EvolvingModel::ricci_flow(3, 1.0).unwrap();
    let cfg = SimConfig::new(64, 1e-3, 1234);
    let sim = evoflow_core::simulate::Simulation::new(&model, 0.2, 0.2, cfg).unwrap();
    let serial = sim.run().unwrap();
    // interleaved chunks, as two workers would produce them
    let mut slots = vec![None; 64];
    for start in [1, 0] {
        for i in (start..64).step_by(2) {
            slots[i] = Some(sim.run_path(i));
        }
    }
    let outcomes: Vec<_> = slots.into_iter().map(Option::unwrap).collect();
    assert_eq!(sim.collect(&outcomes).unwrap(), serial);
}
