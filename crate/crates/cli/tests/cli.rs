//! End-to-end checks of the binary surface: scenario files, exit codes,
//! output shapes, small-scale determinism.

use std::process::Command;

use solq_cli::config::ScenarioConfig;
use solq_cli::runner::run_scenario;

fn solq_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_solq"))
}

const SMALL_SCENARIO: &str = r#"
system = "scalar"

[initial]
gamma = 1.0
theta = 1.5707963267948966
rho = 3.0

[grid]
n = 128
t_half_span = 16.0

[solver]
z_step = 0.01

[[observables]]
kind = "pair"
z_checkpoints = [0.0, 0.5, 1.0]
"#;

#[test]
fn run_small_scenario_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("s.toml");
    std::fs::write(&scenario, SMALL_SCENARIO).unwrap();
    let out = dir.path().join("out");
    let status = solq_bin()
        .args(["run", "--scenario"])
        .arg(&scenario)
        .arg("--out")
        .arg(&out)
        .args(["--threads", "2"])
        .status()
        .unwrap();
    assert!(status.success());
    let csv = std::fs::read_to_string(out.join("c12_vs_z.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 4); // header + 3 checkpoints
    assert!(lines[0].starts_with("z,"));
    assert!(!csv.contains('\r'));
    assert!(out.join("meta.json").exists());
}

#[test]
fn invalid_config_exits_2_with_machine_readable_error() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("bad.toml");
    std::fs::write(&scenario, SMALL_SCENARIO.replace("n = 128", "n = 100")).unwrap();
    let output = solq_bin()
        .args(["run", "--scenario"])
        .arg(&scenario)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    let err: serde_json::Value = serde_json::from_str(stderr.lines().last().unwrap()).unwrap();
    assert_eq!(err["kind"], "config");
}

#[test]
fn numerical_breach_in_all_tuples_exits_3() {
    // An absurd amplitude overflows |u|^2 to infinity in the Kerr phase;
    // the breach aborts the only tuple.
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("blowup.toml");
    std::fs::write(
        &scenario,
        SMALL_SCENARIO.replace("gamma = 1.0", "gamma = 1.0e200"),
    )
    .unwrap();
    let output = solq_bin()
        .args(["run", "--scenario"])
        .arg(&scenario)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("numerical"));
}

#[test]
fn unknown_preset_exits_2() {
    let output = solq_bin()
        .args(["preset", "fig9", "--out", "/tmp/nowhere"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn presets_listing_names_all_four() {
    let output = solq_bin().arg("presets").output().unwrap();
    assert!(output.status.success());
    let text = String::from_utf8_lossy(&output.stdout);
    for name in ["fig1", "fig2a", "fig2b", "fig3"] {
        assert!(text.contains(name), "missing preset {name}");
    }
}

#[test]
fn grid_and_step_overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("s.toml");
    std::fs::write(&scenario, SMALL_SCENARIO).unwrap();
    let out = dir.path().join("out");
    let status = solq_bin()
        .args(["run", "--scenario"])
        .arg(&scenario)
        .arg("--out")
        .arg(&out)
        .args(["--grid", "256,16", "--step", "0.005"])
        .status()
        .unwrap();
    assert!(status.success());
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["config"]["grid"]["n"], 256);
    assert_eq!(meta["config"]["solver"]["z_step"], 0.005);
}

#[test]
fn repeated_runs_are_byte_identical_across_thread_counts() {
    let cfg = ScenarioConfig::from_toml(SMALL_SCENARIO).unwrap();
    let read_all = |dir: &std::path::Path| -> Vec<(String, Vec<u8>)> {
        let mut files: Vec<_> = std::fs::read_dir(dir)
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.extension().is_some_and(|x| x == "csv" || x == "pgm"))
            .collect();
        files.sort();
        files
            .into_iter()
            .map(|p| {
                (
                    p.file_name().unwrap().to_string_lossy().into_owned(),
                    std::fs::read(&p).unwrap(),
                )
            })
            .collect()
    };
    let run_with = |threads: usize| {
        let dir = tempfile::tempdir().unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| run_scenario(&cfg, dir.path())).unwrap();
        let contents = read_all(dir.path());
        contents
    };
    let serial = run_with(1);
    let parallel = run_with(8);
    assert_eq!(serial, parallel);
}

#[test]
fn oracle_mode_reports_cross_check() {
    let mut cfg = ScenarioConfig::from_toml(SMALL_SCENARIO).unwrap();
    cfg.oracle = true;
    let dir = tempfile::tempdir().unwrap();
    let outcome = run_scenario(&cfg, dir.path()).unwrap();
    let oracle = outcome.tuples[0].oracle.as_ref().expect("oracle report");
    assert!(oracle.max_relative_covariance_deviation < 1e-9);
    assert!(oracle.bogoliubov_unitarity_residual < 1e-8);
    assert!(oracle.bogoliubov_symmetry_residual < 1e-8);
}
