use std::fs;
use std::process::Command;

use clifford_ym::cli::{family_grid, EXIT_CONFIG, EXIT_OK};
use clifford_ym::report::{load_report, read_sweep, save_report, VERDICT_FIELDS};
use clifford_ym::yang_mills::{classify, ClassifyConfig};
use clifford_ym::{CliffordSystem, Error};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_clifford-ym"))
}

#[test]
fn classify_m3_reports_nym_evidence() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m3.json");
    let status = bin()
        .args(["classify", "--m", "3", "--k", "2", "--seed", "7", "--sequential", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(EXIT_OK));
    let r = load_report(&out).unwrap();
    assert!(r.verdicts.is_nym_evidence);
    assert!(r.verdicts.is_tym_evidence);
    assert_eq!(r.samples.len(), 64);
    assert_eq!(r.recomputed_verdicts(), r.verdicts);
}

#[test]
fn report_round_trip_is_lossless() {
    let s = CliffordSystem::new(4, 3, &[1, 1, -1]).unwrap();
    let mut cfg = ClassifyConfig::new(&s, 5, 2);
    cfg.fd_crosscheck = true;
    let r = classify(&s, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    save_report(&r, &path).unwrap();
    let back = load_report(&path).unwrap();
    assert_eq!(back.samples, r.samples);
    assert_eq!(back.stats, r.stats);
    assert_eq!(back.fd_check, r.fd_check);
    assert_eq!(back.verdicts, r.verdicts);
    assert_eq!(back.config.thresholds, r.config.thresholds);
}

#[test]
fn truncated_report_is_a_schema_error() {
    let s = CliffordSystem::new(2, 2, &[]).unwrap();
    let r = classify(&s, &ClassifyConfig::new(&s, 3, 0)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    save_report(&r, &path).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    fs::write(&path, &text[..text.len() / 2]).unwrap();
    assert!(matches!(load_report(&path), Err(Error::Schema(_))));

    let status = bin()
        .args(["export", "--in"])
        .arg(&path)
        .arg("--out")
        .arg(dir.path().join("r.csv"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(EXIT_CONFIG));
}

#[test]
fn wrong_schema_version_is_rejected() {
    let s = CliffordSystem::new(1, 3, &[]).unwrap();
    let r = classify(&s, &ClassifyConfig::new(&s, 2, 0)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    save_report(&r, &path).unwrap();
    let text = fs::read_to_string(&path).unwrap().replacen("\"schema_version\": 1", "\"schema_version\": 99", 1);
    fs::write(&path, text).unwrap();
    assert!(matches!(load_report(&path), Err(Error::Schema(_))));
}

#[test]
fn scan_writes_one_row_per_family_and_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("scan.csv");
    let status = bin()
        .args(["scan", "--max-l", "6", "--samples", "4", "--sequential", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(EXIT_OK));
    let rows = read_sweep(&out).unwrap();
    assert_eq!(rows.len(), family_grid(6, 9).len() * VERDICT_FIELDS.len());

    let json = dir.path().join("scan.json");
    let status = bin().arg("export").arg("--in").arg(&out).arg("--out").arg(&json).status().unwrap();
    assert_eq!(status.code(), Some(EXIT_OK));
    let back: Vec<serde_json::Value> = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(back.len(), rows.len());
}

#[test]
fn build_then_classify_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let sys = dir.path().join("sys.json");
    let status = bin()
        .args(["build", "--m", "4", "--k", "2", "--signs", "+,-", "--out"])
        .arg(&sys)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(EXIT_OK));
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for out in [&a, &b] {
        let status = bin()
            .args(["classify", "--samples", "6", "--sequential", "--in"])
            .arg(&sys)
            .arg("--out")
            .arg(out)
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(EXIT_OK));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn configuration_errors_exit_two() {
    for args in [
        vec!["classify", "--m", "4", "--k", "2", "--signs", "+,x"],
        vec!["classify", "--m", "1", "--k", "1"],
        vec!["classify", "--m", "2", "--k", "2", "--fd-step", "1.0"],
        vec!["classify", "--m", "2", "--k", "2", "--samples", "0"],
        vec!["build", "--m", "10", "--k", "1"],
    ] {
        assert_eq!(bin().args(&args).status().unwrap().code(), Some(EXIT_CONFIG), "{args:?}");
    }
}

#[test]
fn thread_count_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p.json");
    let status = bin()
        .env("CLIFFORD_YM_THREADS", "2")
        .args(["classify", "--m", "2", "--k", "3", "--samples", "8", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(EXIT_OK));
    let status = bin()
        .env("CLIFFORD_YM_THREADS", "zero")
        .args(["classify", "--m", "2", "--k", "3", "--samples", "8"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(EXIT_CONFIG));
}
