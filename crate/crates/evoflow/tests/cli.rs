use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn evoflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evoflow"))
        .args(args)
        .env_remove("EVOFLOW_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

const SMALL: &str = r#"{
  "schema_version": 1,
  "model": { "dim": 3, "k0": 1.0, "schedule": { "kind": "ricci_flow" } },
  "experiment": { "checkpoints": [0.1, 0.2], "moment_orders": [1, 2], "theta_loads": [0.25], "tail_radii": [1.0], "check_qv": true },
  "sim": { "n_paths": 2000, "dt": 0.001, "seed": 5 }
}"#;

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn bounds_prints_second_moment() {
    let o = evoflow(&["bounds", "--nu", "3", "--lambda", "0", "--r0", "0", "--t", "1", "--kind", "second_moment"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "3\n");
}

#[test]
fn bounds_exit_codes() {
    let refused = evoflow(&["bounds", "--nu", "3", "--lambda", "0", "--t", "1", "--kind", "exp_moment", "--theta", "2"]);
    assert_eq!(refused.status.code(), Some(3));
    let domain = evoflow(&["bounds", "--nu", "0.5", "--lambda", "0", "--t", "1", "--kind", "second_moment"]);
    assert_eq!(domain.status.code(), Some(2));
    let unknown = evoflow(&["bounds", "--nu", "3", "--lambda", "0", "--t", "1", "--kind", "second_moment", "--bogus"]);
    assert_eq!(unknown.status.code(), Some(2));
}

#[test]
fn missing_config_is_a_config_error() {
    let o = evoflow(&["verify", "--config", "missing.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.json"));
}

#[test]
fn certify_shrinking_sphere() {
    let o = evoflow(&["certify", "--model", "sphere", "--dim", "3", "--k0", "1", "--schedule", "ricci", "--sub-horizon", "0.2"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("nu=3 lambda=-4 horizon=0.2"), "{}", stdout(&o));
}

#[test]
fn certify_from_curvature() {
    let o = evoflow(&["certify", "--from-curvature", "--dim", "2", "--c1", "0", "--c2", "0"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("nu=3 lambda=1 "), "{}", stdout(&o));
}

#[test]
fn special_tables() {
    let o = evoflow(&["special", "growth", "--lambda", "0", "--t", "2"]);
    assert_eq!(stdout(&o), format!("{:<20} 2\n", "Lambda"));
    let o = evoflow(&["special", "gaussian", "--mu", "0", "--sigma2", "1", "--p", "2", "--theta", "0.5"]);
    assert!(stdout(&o).starts_with(&format!("{:<20} 3\n", "even_moment")));
}

#[test]
fn help_matches_golden_files() {
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let cases: &[(&str, &[&str])] = &[
        ("help.txt", &["--help"]),
        ("help_special.txt", &["special", "--help"]),
        ("help_bounds.txt", &["bounds", "--help"]),
        ("help_certify.txt", &["certify", "--help"]),
        ("help_simulate.txt", &["simulate", "--help"]),
        ("help_verify.txt", &["verify", "--help"]),
        ("help_special_laguerre.txt", &["special", "laguerre", "--help"]),
        ("help_special_generating.txt", &["special", "generating", "--help"]),
        ("help_special_growth.txt", &["special", "growth", "--help"]),
        ("help_special_gaussian.txt", &["special", "gaussian", "--help"]),
    ];
    for (file, args) in cases {
        let want = fs::read_to_string(golden.join(file)).unwrap();
        let o = evoflow(args);
        assert_eq!(o.status.code(), Some(0));
        assert_eq!(stdout(&o), want, "{file}");
    }
}

#[test]
fn verify_writes_report_and_manifest_that_reproduces_it() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let first = dir.path().join("first");
    let o = evoflow(&["verify", "--config", &config, "--out", first.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("status=pass"));

    let manifest = first.join("manifest.json");
    let text = fs::read_to_string(&manifest).unwrap();
    let m: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(m["seed"], 5);
    assert_eq!(m["config"]["sim"]["seed"], 5);
    assert_eq!(m["outputs"], serde_json::json!(["report.json", "report.csv"]));

    let second = dir.path().join("second");
    let o = evoflow(&["verify", "--config", manifest.to_str().unwrap(), "--out", second.to_str().unwrap(), "--workers", "3"]);
    assert_eq!(o.status.code(), Some(0));
    for file in ["report.json", "report.csv"] {
        assert_eq!(fs::read(first.join(file)).unwrap(), fs::read(second.join(file)).unwrap(), "{file}");
    }
    let csv = fs::read_to_string(first.join("report.csv")).unwrap();
    assert!(csv.starts_with("kind,t,params,bound,estimate_mean,estimate_stderr,verdict,slack\n"));
}

#[test]
fn simulate_writes_samples_reproducibly() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let a = dir.path().join("a");
    let o = evoflow(&["simulate", "--config", &config, "--out", a.to_str().unwrap(), "--seed", "9"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(a.join("samples_1.csv")).unwrap();
    assert!(csv.starts_with("path_index,terminal_radius,sup_radius,stopped_flag\n"));
    assert_eq!(csv.lines().count(), 2001);
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("samples_1.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["t"], 0.2);

    let b = dir.path().join("b");
    let manifest = a.join("manifest.json");
    evoflow(&["simulate", "--config", manifest.to_str().unwrap(), "--out", b.to_str().unwrap(), "--workers", "2"]);
    for file in ["samples_0.csv", "samples_1.csv", "samples_0.meta.json", "samples_1.meta.json"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file}");
    }
}

#[test]
fn seed_from_environment_has_lowest_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &SMALL.replace(r#", "seed": 5"#, ""));
    let run = |out: &str, env: Option<&str>, cli: Option<&str>| {
        let out = dir.path().join(out);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_evoflow"));
        cmd.args(["verify", "--config", &config, "--out", out.to_str().unwrap()]);
        cmd.env_remove("EVOFLOW_SEED");
        if let Some(seed) = env {
            cmd.env("EVOFLOW_SEED", seed);
        }
        if let Some(seed) = cli {
            cmd.args(["--seed", seed]);
        }
        assert!(cmd.output().unwrap().status.success());
        let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
        m["seed"].as_u64().unwrap()
    };
    assert_eq!(run("none", None, None), 0);
    assert_eq!(run("env", Some("11"), None), 11);
    assert_eq!(run("both", Some("11"), Some("12")), 12);
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    for bad in [
        SMALL.replace(r#""schema_version": 1"#, r#""schema_version": 9"#),
        SMALL.replace(r#""dt": 0.001"#, r#""dt": 0.001, "dtt": 1"#),
        SMALL.replace(r#""check_qv": true"#, r#""exit_radii": [1.0]"#),
        SMALL.replace("[0.1, 0.2]", "[0.3]"),
    ] {
        let config = write_config(dir.path(), &bad);
        let o = evoflow(&["verify", "--config", &config, "--out", dir.path().join("o").to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{bad}");
    }
}
