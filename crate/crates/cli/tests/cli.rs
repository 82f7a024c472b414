use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sim")).args(args).env_remove("SIM_WORKERS").output().expect("spawn sim")
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("config.toml");
    fs::write(&path, body).unwrap();
    path
}

fn run_in(dir: &Path, cmd: &str, config: &Path, extra: &[&str]) -> (Output, PathBuf) {
    let out = dir.join(format!("out-{cmd}-{}", extra.join("-")));
    let mut args = vec![cmd, "--config", config.to_str().unwrap(), "--out-dir", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    (sim(&args), out)
}

fn column(csv: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let idx = lines.next().unwrap().split(',').position(|h| h == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().to_string()).collect()
}

fn manifest(out: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap()
}

const GROUND: &str = r#"
setup = "mirror"
tau = 0.3
dt = 0.1
omega = 0.0
phi = 0.0
t_max = 2.0
record_stride = 2
"#;

#[test]
fn undriven_run_stays_in_the_ground_state() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), GROUND);
    let (res, out) = run_in(tmp.path(), "run", &cfg, &[]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let ts = fs::read_to_string(out.join("timeseries.csv")).unwrap();
    assert!(ts.starts_with("t,pe1,pe2,n_delay,norm,disc_weight\n"));
    let pe = column(&ts, "pe1");
    assert_eq!(pe.len(), 10);
    assert!(pe.iter().all(|p| p.parse::<f64>().unwrap() == 0.0));
    assert!(column(&ts, "pe2").iter().all(String::is_empty));
    let dist = fs::read_to_string(out.join("photon_dist.csv")).unwrap();
    assert_eq!(dist.lines().nth(1).unwrap(), "0,1.00000000000e0");
}

#[test]
fn manifest_digests_match_emitted_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &GROUND.replace("omega = 0.0", "omega = 0.8"));
    let (res, out) = run_in(tmp.path(), "run", &cfg, &[]);
    assert!(res.status.success());
    let m = manifest(&out);
    let files = m["files"].as_array().unwrap();
    let names: Vec<&str> = files.iter().map(|f| f["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["timeseries.csv", "entropy.csv", "photon_dist.csv"]);
    for f in files {
        let body = fs::read(out.join(f["name"].as_str().unwrap())).unwrap();
        assert_eq!(f["sha256"].as_str().unwrap(), format!("{:x}", Sha256::digest(&body)));
        assert_eq!(f["bytes"].as_u64().unwrap() as usize, body.len());
    }
    assert_eq!(m["config"]["tau"].as_f64(), Some(0.3));
    assert_eq!(m["config"]["d_ph"].as_u64(), Some(2));
    assert!(m["cumulative_discarded_weight"].as_f64().unwrap() >= 0.0);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &GROUND.replace("omega = 0.0", "omega = 1.2"));
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for out in [&a, &b] {
        let res = sim(&["run", "--config", cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
        assert!(res.status.success());
    }
    for name in ["timeseries.csv", "entropy.csv", "photon_dist.csv"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn non_integral_delay_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "setup = \"two_atoms\"\ntau = 5.0\ndt = 0.3\nomega1 = 1.0\nphi = 0.0\n");
    let (res, _) = run_in(tmp.path(), "run", &cfg, &[]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("tau/dt not integral"));
}

#[test]
fn unknown_key_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("{GROUND}gama_L = 0.5\n"));
    let (res, _) = run_in(tmp.path(), "run", &cfg, &[]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("gama_L"));
}

#[test]
fn missing_config_file_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let (res, _) = run_in(tmp.path(), "run", &tmp.path().join("nope.toml"), &[]);
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn truncation_budget_abort_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let body = "setup = \"mirror\"\ntau = 0.5\ndt = 0.1\nomega = 1.5\nphi = 0.0\nd_max = 1\ntrunc_budget = 1e-12\nt_max = 3.0\n";
    let cfg = write_config(tmp.path(), body);
    let (res, _) = run_in(tmp.path(), "run", &cfg, &[]);
    assert_eq!(res.status.code(), Some(2), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(String::from_utf8_lossy(&res.stderr).contains("d_max"));
}

const MARKOV_MIRROR: &str = r#"
setup = "mirror"
tau = 0.01
dt = 0.01
omega = 1.5
phi = 0.0
t_max = 20.0
record_stride = 50
"#;

#[test]
fn compare_mirror_single_bin_delay_agrees_with_effective_bloch() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), MARKOV_MIRROR);
    let (res, out) = run_in(tmp.path(), "compare", &cfg, &[]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(String::from_utf8_lossy(&res.stdout).contains("max deviation"));
    let dev = manifest(&out)["notes"]["max_deviation"].as_f64().unwrap();
    assert!(dev < 0.02, "deviation {dev}");
}

#[test]
fn compare_above_tolerance_exits_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), MARKOV_MIRROR);
    let (res, _) = run_in(tmp.path(), "compare", &cfg, &["--tolerance", "1e-9"]);
    assert_eq!(res.status.code(), Some(3));
}

#[test]
fn compare_two_atoms_against_master_equation() {
    let tmp = tempfile::tempdir().unwrap();
    let body = "setup = \"two_atoms\"\ntau = 0.01\ndt = 0.01\nomega1 = 1.5\nomega2_phase = -1.5708\nphi = 1.5708\nt_max = 3.0\nrecord_stride = 20\n";
    let cfg = write_config(tmp.path(), body);
    let (res, out) = run_in(tmp.path(), "compare", &cfg, &[]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(manifest(&out)["notes"]["max_deviation"].as_f64().unwrap() < 0.02);
}

#[test]
fn spectrum_writes_spectrum_and_g2() {
    let tmp = tempfile::tempdir().unwrap();
    let body = "setup = \"mirror\"\ntau = 0.5\ndt = 0.1\nomega = 1.0\nphi = 1.0\nt_max = 6.0\nrecord_stride = 5\n\n[spectrum]\nnu_min = -2.0\nnu_max = 2.0\nn_nu = 9\n\n[g2]\np_max = 5\n";
    let cfg = write_config(tmp.path(), body);
    let (res, out) = run_in(tmp.path(), "spectrum", &cfg, &[]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let spec = fs::read_to_string(out.join("spectrum.csv")).unwrap();
    assert_eq!(column(&spec, "nu").len(), 9);
    assert!(column(&spec, "S_nu").iter().all(|s| s.parse::<f64>().unwrap().is_finite()));
    let g2 = fs::read_to_string(out.join("g2.csv")).unwrap();
    assert_eq!(column(&g2, "tprime").len(), 6);
    assert!(manifest(&out)["notes"]["spectrum_convention"].as_str().unwrap().contains("exp(i nu p dt)"));
}

#[test]
fn sweep_grid_is_independent_of_worker_count() {
    let tmp = tempfile::tempdir().unwrap();
    let body = "setup = \"mirror\"\ntau = 0.2\ndt = 0.1\nomega = 1.0\nphi = 0.0\nd_ph = 1\nt_max = 3.0\nrecord_stride = 2\n";
    let cfg = write_config(tmp.path(), body);
    let flags = ["--phi-steps", "3", "--taus", "0.2,0.4"];
    let (one, out1) = run_in(tmp.path(), "sweep", &cfg, &[&flags[..], &["--workers", "1"]].concat());
    let (two, out2) = run_in(tmp.path(), "sweep", &cfg, &[&flags[..], &["--workers", "2"]].concat());
    assert!(one.status.success() && two.status.success(), "{}", String::from_utf8_lossy(&one.stderr));
    let a = fs::read_to_string(out1.join("sweep.csv")).unwrap();
    assert_eq!(a, fs::read_to_string(out2.join("sweep.csv")).unwrap());
    assert!(a.starts_with("phi,gamma_tau,pe_ss,flux_ss,S_circuit_ss\n"));
    let phis = column(&a, "phi");
    assert_eq!(phis.len(), 6);
    assert_eq!(column(&a, "gamma_tau").iter().filter(|g| g.starts_with("2.0")).count(), 3);
    assert!(column(&a, "pe_ss").iter().all(|p| (0.0..=1.0).contains(&p.parse::<f64>().unwrap())));
}
