use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BASE: &str = "\
nu_a = 5.5 GHz
nu_b = 2.75 GHz
delta = 550 MHz
delta_r = 275 MHz
g_d = 20 MHz
g_gr = 10 MHz
g_er = 10 MHz
";

fn pdcsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pdcsim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let idx = lines
        .next()
        .unwrap()
        .split(',')
        .position(|h| h == name)
        .unwrap();
    lines
        .map(|l| l.split(',').nth(idx).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn params_prints_coupling() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "p.cfg",
        &format!("{BASE}gamma_a = 11 MHz\ngamma_b = 5.5 MHz\n"),
    );
    let out = pdcsim(&["params", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let chi: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("chi_Hz = "))
        .expect("chi line")
        .parse()
        .unwrap();
    assert!((chi - 26.45e3).abs() < 10.0);
    assert!(text.contains("epsilon_c_Hz"));
}

#[test]
fn dynamics_csv_keeps_qubit_in_ground_state() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "d.cfg", &format!("{BASE}grid = 401\n"));
    let csv_path = dir.path().join("d.csv");
    let out = pdcsim(&[
        "dynamics",
        "--config",
        &cfg,
        "--out",
        csv_path.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(&csv_path).unwrap();
    assert!(csv.starts_with("t_s,P_g,n_a_full,n_b_full,n_a_eff,n_b_eff,K\n"));
    assert!(!csv.contains('\r'));
    let pg = column(&csv, "P_g");
    assert_eq!(pg.len(), 401);
    assert!(pg.iter().all(|&x| x >= 0.99));
    assert!(column(&csv, "n_b_eff").iter().any(|&x| x > 1.9));
}

#[test]
fn bad_key_is_a_config_error_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.cfg", &format!("{BASE}gama_a = 1 MHz\n"));
    let csv_path = dir.path().join("never.csv");
    let out = pdcsim(&[
        "dynamics",
        "--config",
        &cfg,
        "--out",
        csv_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 8"));
    assert!(!csv_path.exists());
}

#[test]
fn scan_without_decays_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.cfg", &format!("{BASE}eps_over_ec = 0.5\n"));
    assert_eq!(pdcsim(&["scan", "--config", &cfg]).status.code(), Some(2));
}

#[test]
fn scenario_mismatch_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "m.cfg", &format!("{BASE}scenario = scan\n"));
    assert_eq!(pdcsim(&["params", "--config", &cfg]).status.code(), Some(2));
}

#[test]
fn sde_scan_is_independent_of_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    // decays scaled to χ: γ_b = 5χ, γ_a = 2γ_b
    let text = format!(
        "{BASE}gamma_a = 264.46 kHz\ngamma_b = 132.23 kHz\neps_over_ec = 0.3, 0.5, 2.0\nmethods = linearized, sde\nn_traj = 400\n"
    );
    let cfg = write_config(dir.path(), "sde.cfg", &text);
    let run = |threads: &str, name: &str| {
        let path = dir.path().join(name);
        let out = pdcsim(&[
            "scan",
            "--config",
            &cfg,
            "--threads",
            threads,
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        fs::read(path).unwrap()
    };
    let one = run("1", "one.csv");
    let four = run("4", "four.csv");
    assert_eq!(one, four);
    let csv = String::from_utf8(one).unwrap();
    assert_eq!(csv.lines().count(), 7);
    assert!(csv.lines().nth(2).unwrap().contains(",sde,"));
}

#[test]
fn seed_override_changes_sde_output() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{BASE}gamma_a = 264.46 kHz\ngamma_b = 132.23 kHz\neps_over_ec = 0.5\nmethods = sde\nn_traj = 200\n");
    let cfg = write_config(dir.path(), "seed.cfg", &text);
    let a = pdcsim(&["scan", "--config", &cfg, "--seed", "1"]).stdout;
    let b = pdcsim(&["scan", "--config", &cfg, "--seed", "2"]).stdout;
    assert!(!a.is_empty());
    assert_ne!(a, b);
}

#[test]
fn validate_passes_for_reference_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "v.cfg",
        &format!("{BASE}gamma_a = 11 MHz\ngamma_b = 5.5 MHz\n"),
    );
    let out = pdcsim(&["validate", "--config", &cfg]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert!(text.lines().all(|l| l.starts_with("PASS")));
}
