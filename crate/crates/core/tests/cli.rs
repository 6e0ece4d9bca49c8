use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::Command;

use decaylab::cli::run::sha256_hex;
use decaylab::cli::{parse_config, run, Command as Sub, RunStatus};

const BIN: &str = env!("CARGO_BIN_EXE_decaylab");

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("exp.conf");
    fs::write(&path, text).unwrap();
    path
}

fn decaylab(args: &[&str]) -> i32 {
    Command::new(BIN).args(args).output().unwrap().status.code().unwrap()
}

const DISK_COS3: &str = "domain = disk 1.0\nh = 0.02\ndata = cos 3\nd_grid = 0 0.6 13\n";

#[test]
fn disk_cos3_decay_matches_energy() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), DISK_COS3);
    let out = tmp.path().join("out");
    assert_eq!(decaylab(&["decay", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--quiet"]), 0);
    let csv = fs::read_to_string(out.join("decay_01_cos3.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "d,D,H,E,T,N,F,K,K1");
    let row: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(row[0], 0.0);
    assert!((row[1] - 3.0 * PI).abs() / (3.0 * PI) < 0.03, "D(0) = {}", row[1]);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let config = parse_config("domain = ellipse 1.5 1\nh = 0.06\nA = linear_ramp 0.3 0.5\ndata = cos 2, sin 1\nd_grid = 0 0.2 6\n").unwrap();
    let mut quiet = |_: &str| {};
    let (a, _) = run(&config, Sub::Decay, &tmp.path().join("a"), &mut quiet).unwrap();
    let (b, _) = run(&config, Sub::Decay, &tmp.path().join("b"), &mut quiet).unwrap();
    let digests = |m: &decaylab::cli::RunManifest| m.outputs.iter().map(|o| (o.file.clone(), o.sha256.clone())).collect::<Vec<_>>();
    assert_eq!(digests(&a), digests(&b));
    for o in &a.outputs {
        let bytes_a = fs::read(tmp.path().join("a").join(&o.file)).unwrap();
        let bytes_b = fs::read(tmp.path().join("b").join(&o.file)).unwrap();
        assert_eq!(bytes_a, bytes_b);
        assert_eq!(sha256_hex(&bytes_a), o.sha256);
    }
}

#[test]
fn csv_values_reparse_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    let config = parse_config("domain = disk 1\nh = 0.05\ndata = cos 2\nd_grid = 0 0.4 5\n").unwrap();
    let out = tmp.path().join("out");
    run(&config, Sub::Decay, &out, &mut |_| {}).unwrap();
    let csv = fs::read_to_string(out.join("decay_01_cos2.csv")).unwrap();
    for line in csv.lines().skip(1) {
        for field in line.split(',') {
            let v: f64 = field.parse().unwrap();
            assert_eq!(format!("{v:.16e}"), field);
        }
    }
}

#[test]
fn sample_configs_round_trip() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let text = fs::read_to_string(entry.unwrap().path()).unwrap();
        let config = parse_config(&text).unwrap();
        assert_eq!(parse_config(&config.to_text()).unwrap(), config);
        seen += 1;
    }
    assert!(seen >= 2);
}

#[test]
fn n_max_not_above_n_fails_before_solving() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "domain = disk 1\nh = 0.05\npenetration_n = 4\nn_max = 4\n");
    let out = tmp.path().join("out");
    assert_eq!(decaylab(&["penetration", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--quiet"]), 1);
    assert!(!out.exists());
}

#[test]
fn failed_run_leaves_no_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    // the oracle has no closed form for a Steklov datum; the decay CSVs are not written either
    let config = parse_config("domain = disk 1\nh = 0.05\ndata = cos 1, steklov 2\n").unwrap();
    let out = tmp.path().join("out");
    assert!(run(&config, Sub::Oracle, &out, &mut |_| {}).is_err());
    assert!(!out.exists());
}

#[test]
fn verify_disk_sweep_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "domain = disk 1\nh = 0.04\ndata = cos 1, cos 2, cos 3\nd_grid = 0 0.6 16\n");
    let out = tmp.path().join("out");
    assert_eq!(decaylab(&["verify", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--quiet"]), 0);
    let csv = fs::read_to_string(out.join("verify.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(out.join("manifest.json").exists());
}

#[test]
fn oracle_csv_has_decay_schema() {
    let tmp = tempfile::tempdir().unwrap();
    let config = parse_config("domain = disk 1\nh = 0.05\ndata = cos 3\nd_grid = 0 0.5 6\n").unwrap();
    let out = tmp.path().join("out");
    let (manifest, status) = run(&config, Sub::Oracle, &out, &mut |_| {}).unwrap();
    assert_eq!(status, RunStatus::Success);
    assert_eq!(manifest.outputs.len(), 1);
    let csv = fs::read_to_string(out.join("oracle_01_cos3.csv")).unwrap();
    let last: Vec<f64> = csv.lines().last().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(last[0], 0.5);
    assert!((last[1] - 3.0 * PI / 64.0).abs() < 1e-12);
}

#[test]
fn plot_writes_self_contained_svg() {
    let tmp = tempfile::tempdir().unwrap();
    let config = parse_config("domain = disk 1\nh = 0.05\ndata = cos 2\nd_grid = 0 0.5 11\n").unwrap();
    let out = tmp.path().join("out");
    run(&config, Sub::Plot, &out, &mut |_| {}).unwrap();
    let svg = fs::read_to_string(out.join("decay_01_cos2.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains(r#"viewBox="0 0 800 600""#));
    assert!(!svg.contains("href"));
}

#[test]
fn bad_config_exits_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "domain = disk 1\nh = -0.1\n");
    let output = Command::new(BIN).args(["mesh", "--config", cfg.to_str().unwrap()]).output().unwrap();
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stderr).contains("line 2: h must be in (0, d0)"));
}
