use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const TINY: &str = r#"
seed = 5
seeds = 2
scheme = "rirs_only"

[system]
antennas = 3
irs_rows = 2
irs_cols = 3
users = 2
paths = 1

[algorithm]
psi_grid = 5
phi_grid = 5
randomizations = 5
test_samples = 20

[algorithm.de]
population = 4
generations = 3

[algorithm.ssca]
samples = 3
max_iter = 10
"#;

fn workdir(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::write(dir.join("tiny.toml"), TINY).unwrap();
    dir
}

fn sixdma(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sixdma")).args(args).output().unwrap()
}

fn run_tiny(dir: &Path, sub: &str, extra: &[&str]) -> Output {
    let cfg = dir.join("tiny.toml");
    let out = dir.join("out");
    let mut args = vec![sub, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = sixdma(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    o
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let o = sixdma(&["run", "--bogus"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn unknown_scheme_fails() {
    let dir = workdir("bad-scheme");
    let cfg = dir.join("tiny.toml");
    let o = sixdma(&["run", "--config", cfg.to_str().unwrap(), "--scheme", "best", "--out", dir.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown scheme"));
}

#[test]
fn validate_default_config_succeeds() {
    let dir = workdir("validate");
    let o = sixdma(&["validate", "--out", dir.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().filter(|l| l.starts_with("PASS")).count(), 5);
}

#[test]
fn run_writes_results_and_manifest() {
    let dir = workdir("run");
    run_tiny(&dir, "run", &[]);
    let results = std::fs::read_to_string(dir.join("out/results.csv")).unwrap();
    let mut lines = results.lines();
    assert_eq!(
        lines.next().unwrap(),
        "scheme,axis,value,seed_index,rate,std_error,objective,psi,phi,positions,converged,config_hash"
    );
    assert_eq!(lines.filter(|l| l.starts_with("rirs_only,none,,")).count(), 2);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("out/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 5);
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    assert!(dir.join("out/summary.csv").exists() && dir.join("out/trace.csv").exists());
}

#[test]
fn seed_and_scheme_flags_override_the_file() {
    let dir = workdir("override");
    run_tiny(&dir, "run", &["--seed", "9", "--scheme", "fixed_configuration"]);
    let results = std::fs::read_to_string(dir.join("out/results.csv")).unwrap();
    assert!(results.lines().skip(1).all(|l| l.starts_with("fixed_configuration,")));
    let manifest = std::fs::read_to_string(dir.join("out/manifest.json")).unwrap();
    assert!(manifest.contains("\"seed\": 9"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = workdir("repro-a");
    let b = workdir("repro-b");
    run_tiny(&a, "run", &["--scheme", "proposed"]);
    run_tiny(&b, "run", &["--scheme", "proposed", "--threads", "1"]);
    assert_eq!(std::fs::read(a.join("out/results.csv")).unwrap(), std::fs::read(b.join("out/results.csv")).unwrap());
}

#[test]
fn sweep_emits_one_row_per_scheme_point_and_seed() {
    let dir = workdir("sweep");
    run_tiny(&dir, "sweep", &["--axis", "power", "--points", "20,30", "--scheme", "rirs_only,fixed_configuration"]);
    let results = std::fs::read_to_string(dir.join("out/results.csv")).unwrap();
    assert_eq!(results.lines().count(), 1 + 2 * 2 * 2);
    let summary = std::fs::read_to_string(dir.join("out/summary.csv")).unwrap();
    assert_eq!(summary.lines().next().unwrap(), "scheme,axis,value,seeds,mean_rate,std_error");
    assert_eq!(summary.lines().count(), 1 + 4);
}

#[test]
fn single_user_convergence_emits_one_row_per_generation() {
    let dir = workdir("conv");
    run_tiny(&dir, "convergence", &["--single-user"]);
    let trace = std::fs::read_to_string(dir.join("out/trace.csv")).unwrap();
    assert_eq!(trace.lines().next().unwrap(), "kind,scheme,seed_index,iteration,value");
    assert_eq!(trace.lines().count(), 1 + 3);
}

#[test]
fn config_subcommand_prints_effective_toml() {
    let o = sixdma(&["config", "--desk", "--seed", "3"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("seed = 3"));
    assert!(text.contains("antennas = 6"));
}
