use std::fs;
use std::path::Path;
use std::process::Command;

use qhd_cli::main_with_args;
use qhd_cli::output::sha256_hex;
use qhd_core::io::{read_hydro, read_wave_state, SERIES_HEADER};
use tempfile::TempDir;

fn run(dir: &Path, extra: &[&str]) -> i32 {
    let out = dir.to_str().unwrap();
    let mut args = vec!["qhd", "--output", out];
    args.extend_from_slice(extra);
    main_with_args(args)
}

fn manifest(dir: &Path) -> String {
    fs::read_to_string(dir.join("manifest.txt")).unwrap()
}

fn assert_manifest_complete(dir: &Path) {
    let text = manifest(dir);
    let listed: Vec<(&str, &str)> = text
        .lines()
        .filter_map(|l| l.strip_prefix("file "))
        .map(|l| l.split_once(' ').unwrap())
        .collect();
    let mut on_disk = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != "manifest.txt" {
                on_disk.push(p.strip_prefix(dir).unwrap().to_string_lossy().replace('\\', "/"));
            }
        }
    }
    on_disk.sort();
    let names: Vec<&str> = listed.iter().map(|(_, n)| *n).collect();
    assert_eq!(names, on_disk);
    for (hash, name) in listed {
        assert_eq!(hash, sha256_hex(&fs::read(dir.join(name)).unwrap()), "{name}");
    }
}

#[test]
fn run_mode_writes_series_and_dumps() {
    let tmp = TempDir::new().unwrap();
    let code = run(tmp.path(), &["--mode", "run", "--t-final", "0.2", "--snapshot-stride", "50"]);
    assert_eq!(code, 0);
    let series = fs::read_to_string(tmp.path().join("series.csv")).unwrap();
    let mut lines = series.lines();
    assert_eq!(lines.next(), Some(SERIES_HEADER));
    assert_eq!(lines.count(), 5);
    let end = read_wave_state(&mut fs::File::open(tmp.path().join("final.qhdf")).unwrap()).unwrap();
    assert!((end.time - 0.2).abs() < 1e-12);
    assert_eq!(end.grid().n(), 32);
    let (_, blocks) = read_hydro(&mut fs::File::open(tmp.path().join("final_hydro.qhdf")).unwrap()).unwrap();
    assert_eq!(blocks.len(), 6);
    assert!(manifest(tmp.path()).contains("status = ok"));
    assert_manifest_complete(tmp.path());
}

#[test]
fn outputs_are_deterministic() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let args = ["--mode", "verify", "--t-final", "0.5", "--seed", "9"];
    assert_eq!(run(a.path(), &args), 0);
    assert_eq!(run(b.path(), &args), 0);
    for f in ["series.csv", "residuals.csv"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let residuals = fs::read_to_string(a.path().join("residuals.csv")).unwrap();
    // 6 plain pairs + 6 x 4 mollified entries
    assert_eq!(residuals.lines().count(), 1 + 12 + 24);
    assert_manifest_complete(a.path());
}

#[test]
fn scalar_basket_drops_vector_functions() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(run(tmp.path(), &["--mode", "verify", "--t-final", "0.5", "--basket", "scalar"]), 0);
    let residuals = fs::read_to_string(tmp.path().join("residuals.csv")).unwrap();
    assert_eq!(residuals.lines().count(), 1 + 8 + 16);
    assert!(!residuals.contains("vec_"));
}

#[test]
fn sweep_writes_one_directory_per_rung() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(run(tmp.path(), &["--mode", "sweep", "--t-final", "0.2", "--snapshot-stride", "20"]), 0);
    let csv = fs::read_to_string(tmp.path().join("continuation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
    let rungs: Vec<_> = fs::read_dir(tmp.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .collect();
    assert_eq!(rungs.len(), 5);
    assert!(tmp.path().join("rung_4_delta_0.0125/series.csv").exists());
    assert_manifest_complete(tmp.path());
}

#[test]
fn identities_mode_reports_every_suite() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(run(tmp.path(), &["--mode", "identities", "--t-final", "0.2", "--samples", "20000"]), 0);
    let csv = fs::read_to_string(tmp.path().join("identities.csv")).unwrap();
    for suite in ["quadratic", "bohm", "entropy", "haraux", "lipschitz"] {
        assert!(csv.lines().any(|l| l.starts_with(&format!("{suite},"))), "{suite}");
    }
    let haraux = csv.lines().find(|l| l.starts_with("haraux,violations")).unwrap();
    assert!(haraux.ends_with(",true"));
}

#[test]
fn blowup_exits_two_with_step() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(run(tmp.path(), &["--amplitude", "2e6"]), 2);
    let m = manifest(tmp.path());
    assert!(m.contains("status = aborted"));
    assert!(m.contains("abort_step = 1"));
    assert_manifest_complete(tmp.path());
}

#[test]
fn config_file_with_flag_override() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("cfg.txt");
    fs::write(&cfg, "mode = sweep\ndelta_ladder = 0.2,0.1,0.05\nt_final = 0.1\nsnapshot_stride = 10\n").unwrap();
    let out = tmp.path().join("out");
    let code = main_with_args(["qhd", "--config", cfg.to_str().unwrap(), "--output", out.to_str().unwrap(), "--n", "16"]);
    assert_eq!(code, 0);
    let written = fs::read_to_string(out.join("config.txt")).unwrap();
    assert!(written.contains("delta_ladder = 0.2,0.1,0.05\n"));
    assert!(written.contains("n = 16\n"));
    assert_eq!(fs::read_to_string(out.join("continuation.csv")).unwrap().lines().count(), 4);
    let parsed: qhd_cli::RunConfig = written.parse().unwrap();
    assert_eq!(parsed.to_text(), written);

    fs::write(&cfg, "delta_ladder = 0.1,0.2\nn = 33\nunknown = 1\n").unwrap();
    assert_eq!(main_with_args(["qhd", "--config", cfg.to_str().unwrap()]), 1);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_qhd");
    let status = Command::new(bin).args(["--n", "33"]).status().unwrap();
    assert_eq!(status.code(), Some(1));
    let out = Command::new(bin).arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("[default: 32]"));
    let status = Command::new(bin).env("QHD_THREADS", "zero").arg("--help").status().unwrap();
    assert_eq!(status.code(), Some(1));
    let tmp = TempDir::new().unwrap();
    let status = Command::new(bin)
        .env("QHD_THREADS", "2")
        .args(["--t-final", "0.05", "--output", tmp.path().to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(manifest(tmp.path()).contains("threads = 2"));
}
