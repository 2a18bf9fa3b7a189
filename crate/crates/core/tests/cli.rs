use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_obsentropy");

const SMALL: [&str; 8] = [
    "--set",
    "model.sites=8",
    "--set",
    "model.particles=2",
    "--set",
    "initial.sub_sites=4",
    "--set",
    "time.points=11",
];

fn obsentropy(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env("OBSENTROPY_THREADS", "1").output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn run_small(scenario: &str, out: &Path) -> Output {
    let mut args = vec!["run", scenario, "--out", out.to_str().unwrap()];
    args.extend(SMALL);
    args.extend(["--set", "initial.eigenstate=2"]);
    obsentropy(&args)
}

#[test]
fn lists_and_describes_scenarios() {
    let o = obsentropy(&["list-scenarios"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    for id in ["expansion", "eigenstate_quench", "entanglement", "pure_thermal", "entropy_vs_energy", "s_ex_bins", "property_suite"] {
        assert!(text.contains(id), "{id} missing");
    }
    let o = obsentropy(&["describe", "pure_thermal"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8(o.stdout).unwrap().contains("switch = 30.0"));
    assert_eq!(code(&obsentropy(&["describe", "nope"])), 2);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(code(&obsentropy(&["run", "expansion", "--out", out, "--set", "model.colour=3"])), 2);
    assert_eq!(code(&obsentropy(&["run", "expansion", "--out", out, "--set", "model.sites=many"])), 2);
    assert_eq!(code(&obsentropy(&["run", "expansion", "--out", out, "--set", "model.t=2.0"])), 2);
    assert_eq!(code(&obsentropy(&["run", "expansion", "--out", out, "--set", "time.points=0"])), 2);
    let o = Command::new(BIN)
        .args(["run", "expansion", "--out", out])
        .env("OBSENTROPY_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);

    let file = dir.path().join("bad.toml");
    std::fs::write(&file, "[model]\nsites = \"sixteen\"\n").unwrap();
    assert_eq!(code(&obsentropy(&["run", "expansion", "--config", file.to_str().unwrap(), "--out", out])), 2);
}

#[test]
fn oversized_sector_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = obsentropy(&[
        "run",
        "eigenstate_quench",
        "--out",
        dir.path().to_str().unwrap(),
        "--set",
        "model.sites=24",
        "--set",
        "model.particles=12",
    ]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for scenario in ["eigenstate_quench", "s_ex_bins"] {
        assert_eq!(code(&run_small(scenario, a.path())), 0);
        assert_eq!(code(&run_small(scenario, b.path())), 0);
        let x = std::fs::read(a.path().join(format!("{scenario}.csv"))).unwrap();
        let y = std::fs::read(b.path().join(format!("{scenario}.csv"))).unwrap();
        assert_eq!(x, y);
        let text = String::from_utf8(x).unwrap();
        assert!(text.starts_with('#'));
        assert!(text.contains("config_hash"));
    }
}

#[test]
fn config_file_and_overrides_compose() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("small.toml");
    std::fs::write(
        &file,
        "[model]\nsites = 8\nparticles = 2\n[initial]\nsub_sites = 4\neigenstate = 2\n[time]\npoints = 5\n[output]\nname = \"from_file\"\n",
    )
    .unwrap();
    let out = dir.path().to_str().unwrap();
    let o = obsentropy(&["run", "expansion", "--config", file.to_str().unwrap(), "--out", out, "--set", "time.t_max=4.0", "--set", "time.average_from=2.0"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("from_file.csv")).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 6);
    assert!(rows[0].starts_with("t,"));
    assert!(rows[5].starts_with("4,"));
}

#[test]
fn small_suite_passes_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = obsentropy(&[
        "suite",
        "--out",
        out,
        "--set",
        "suite.dims=[4, 5]",
        "--set",
        "suite.trials=3",
        "--set",
        "suite.chain=false",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("property_suite.json")).unwrap()).unwrap();
    assert_eq!(json["passed"], true);
    assert!(dir.path().join("property_suite.csv").exists());
}
