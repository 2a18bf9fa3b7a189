//! Scenario runners on small chains.

use obsentropy::experiments::{resolve_config, run_scenario, Table};

fn small(id: &str, extra: &[&str]) -> Vec<String> {
    let mut o: Vec<String> = ["model.sites=8", "model.particles=3"].iter().map(|s| s.to_string()).collect();
    if id != "entropy_vs_energy" {
        o.extend(["initial.sub_sites=4", "time.t_max=20.0", "time.points=41"].map(String::from));
    }
    if id != "pure_thermal" && id != "entropy_vs_energy" {
        o.push("initial.eigenstate=3".into());
    }
    if ["expansion", "eigenstate_quench", "entanglement"].contains(&id) {
        o.push("time.average_from=10.0".into());
    }
    if id == "entanglement" {
        o.push("entanglement.cut=4".into());
    }
    o.extend(extra.iter().map(|s| s.to_string()));
    o
}

fn run(id: &str, extra: &[&str], threads: usize) -> Table {
    let cfg = resolve_config(id, None, &small(id, extra)).unwrap();
    let mut out = run_scenario(id, &cfg, threads).unwrap();
    out.tables.remove(0)
}

fn meta(t: &Table, key: &str) -> f64 {
    t.metadata_value(key).unwrap_or_else(|| panic!("{key} missing")).parse().unwrap()
}

fn assert_unitary(t: &Table) {
    let norm = t.column("norm").unwrap();
    let energy = t.column("energy").unwrap();
    assert!(norm.iter().all(|n| (n - 1.0).abs() < 1e-10));
    assert!(energy.iter().all(|e| (e - energy[0]).abs() < 1e-9));
}

#[test]
fn quench_starts_at_zero_factorised_entropy() {
    let t = run("eigenstate_quench", &[], 1);
    assert_unitary(&t);
    let sf = t.column("S_F").unwrap();
    let sxe = t.column("S_xE").unwrap();
    assert!(sf[0].abs() < 1e-9, "{}", sf[0]);
    let ln_d = meta(&t, "ln_dim");
    assert!((ln_d - 56f64.ln()).abs() < 1e-10);
    assert!(sf.iter().chain(&sxe).all(|&s| (-1e-9..=ln_d + 1e-9).contains(&s)));
    assert!(meta(&t, "S_F_average") <= meta(&t, "canonical_entropy") + 1e-9);
}

#[test]
fn single_energy_bin_reduces_to_position() {
    let t = run("s_ex_bins", &["bins.counts=[1, 4, 1000]"], 1);
    assert_unitary(&t);
    let sx = t.column("S_x").unwrap();
    for (a, b) in sx.iter().zip(t.column("S_Ex_M1").unwrap()) {
        assert!((a - b).abs() < 1e-10);
    }
    let ln_d = 56f64.ln();
    for col in ["S_Ex_M4", "S_Ex_M1000"] {
        assert!(t.column(col).unwrap().iter().all(|&s| (-1e-9..=ln_d + 1e-9).contains(&s)), "{col}");
    }
    assert_eq!(t.metadata_value("bin_counts"), Some("1 4 1000"));
}

#[test]
fn pure_thermal_state_has_canonical_diagonal_entropy() {
    let t = run("pure_thermal", &["time.switch=5.0", "time.average_from=10.0"], 1);
    let before = meta(&t, "diagonal_entropy_before");
    assert!((before - meta(&t, "canonical_entropy_before")).abs() < 1e-8);
    let sites = t.column("sites").unwrap();
    let times = t.column("t").unwrap();
    for (s, time) in sites.iter().zip(&times) {
        assert_eq!(*s, if *time < 5.0 { 4.0 } else { 8.0 });
    }
    assert!(t.column("norm").unwrap().iter().all(|n| (n - 1.0).abs() < 1e-10));
}

#[test]
fn entropy_vs_energy_carries_offsets() {
    let t = run("entropy_vs_energy", &["window.k=6", "window.centers=5", "window.lo=0.25", "window.hi=0.75"], 1);
    assert!((meta(&t, "offset_real_gaussian") - 0.72963715).abs() < 1e-8);
    assert!((meta(&t, "offset_complex_gaussian") - 0.422784336).abs() < 1e-8);
    assert_eq!(t.rows.len(), 5);
    let ln_d = meta(&t, "ln_dim");
    for col in ["S_F_eigenstate", "S_xE_eigenstate", "S_F_ps", "S_xE_ps", "S_F_micro", "S_xE_micro"] {
        let v = t.column(col).unwrap();
        assert!(v.iter().all(|&s| (-1e-9..=ln_d + 1e-9).contains(&s)), "{col}");
    }
    let e = t.column("E").unwrap();
    assert!(e.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn thread_count_does_not_change_results() {
    for id in ["expansion", "entanglement", "pure_thermal"] {
        let extra: &[&str] = if id == "pure_thermal" { &["time.switch=5.0", "time.average_from=10.0"] } else { &[] };
        let a = run(id, extra, 1);
        let b = run(id, extra, 2);
        assert_eq!(a.rows, b.rows, "{id}");
    }
}
