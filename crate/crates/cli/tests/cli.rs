use std::fs;
use std::path::Path;
use std::process::Command;

use kkh::emit::{load_report, to_csv, to_json, CSV_COLUMNS};
use kkh::{emit, run_suite, Format, SuiteConfig};
use serde_json::{json, Value};

fn suite(cases: Value) -> SuiteConfig {
    let text = json!({ "version": 1, "seed": 7, "cases": cases }).to_string();
    SuiteConfig::from_json(&text).expect("valid config")
}

fn hopf_case() -> Value {
    json!({
        "id": "hopf-g20",
        "kind": "residual",
        "expect": { "verdict": "harmonic map" },
        "manifold": { "kind": "round_sphere", "n": 3 },
        "metric": { "source": "g_mr", "m": 2.0, "r": 0.0 },
        "field": { "kind": "killing_rotation", "thetas": [1.0, 1.0] },
        "samples": 40
    })
}

fn sasaki_defect_case() -> Value {
    json!({
        "id": "conformal-sasaki",
        "kind": "defect",
        "expect": { "verdict": "obstructed", "value": 1.0, "value_tol": 1e-12 },
        "manifold": { "kind": "round_sphere", "n": 2 },
        "a": [0.0, 0.0, 1.0],
        "metrics": [{ "source": "sasaki" }],
        "samples": 10
    })
}

fn kkh() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kkh"))
}

fn write_config(dir: &Path, cases: Value) -> std::path::PathBuf {
    let path = dir.join("suite.json");
    let cfg = json!({
        "version": 1,
        "seed": 11,
        "output": { "dir": dir.join("out"), "formats": ["json", "csv"] },
        "cases": cases
    });
    fs::write(&path, cfg.to_string()).unwrap();
    path
}

#[test]
fn hopf_field_is_a_harmonic_map_under_g20() {
    let report = run_suite(&suite(json!([hopf_case()])));
    let c = &report.cases[0];
    assert_eq!(c.verdict, "harmonic map", "{c:?}");
    assert!(c.matched);
    assert!(c.value.unwrap() < 1e-10);
    assert!(c.residual.unwrap() < 1e-10);
}

#[test]
fn conformal_field_is_obstructed_under_sasaki() {
    let report = run_suite(&suite(json!([sasaki_defect_case()])));
    let c = &report.cases[0];
    assert_eq!(c.verdict, "obstructed", "{c:?}");
    assert!((c.value.unwrap() - 1.0).abs() < 1e-12);
    assert!(c.matched);
}

#[test]
fn wrong_expectation_is_a_mismatch() {
    let mut case = hopf_case();
    case["expect"] = json!({ "verdict": "not harmonic" });
    let report = run_suite(&suite(json!([case])));
    assert!(!report.all_matched());
    assert_eq!(report.summary.mismatched, 1);
}

#[test]
fn empty_suite_gives_an_empty_report() {
    let report = run_suite(&SuiteConfig::empty());
    assert!(report.cases.is_empty());
    assert!(report.all_matched());
    assert_eq!(report.summary.cases, 0);
    let csv = to_csv(&report).unwrap();
    assert_eq!(csv.trim_end(), CSV_COLUMNS.join(","));
}

#[test]
fn reports_are_deterministic() {
    let cases = json!([sasaki_defect_case(), hopf_case()]);
    let a = run_suite(&suite(cases.clone()));
    let b = run_suite(&suite(cases));
    assert_eq!(to_json(&a).unwrap(), to_json(&b).unwrap());
    assert_eq!(to_csv(&a).unwrap(), to_csv(&b).unwrap());
}

#[test]
fn seed_changes_only_the_seeds_not_the_order() {
    let mut cfg = suite(json!([hopf_case(), sasaki_defect_case()]));
    let a = run_suite(&cfg);
    cfg.seed += 1;
    let b = run_suite(&cfg);
    let ids = |r: &kkh::Report| r.cases.iter().map(|c| c.id.clone()).collect::<Vec<_>>();
    assert_eq!(ids(&a), ids(&b));
    assert_eq!(ids(&a), ["conformal-sasaki", "hopf-g20"]);
    assert_ne!(a.cases[0].seed, b.cases[0].seed);
}

#[test]
fn emitted_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_suite(&suite(json!([hopf_case()])));
    let written = emit(&report, dir.path(), &[Format::Json, Format::Csv]).unwrap();
    assert_eq!(written.len(), 2);

    let json: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(json["cases"].as_array().unwrap().len(), 1);
    assert_eq!(json["cases"][0]["verdict"], "harmonic map");
    assert_eq!(to_json(&load_report(dir.path()).unwrap()).unwrap(), to_json(&report).unwrap());

    let csv = fs::read_to_string(dir.path().join("report.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), CSV_COLUMNS.join(","));
    assert!(lines.next().unwrap().starts_with("hopf-g20,residual,"));
    assert!(lines.next().is_none());
}

#[test]
fn binary_runs_a_suite_and_rerenders() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), json!([sasaki_defect_case()]));
    let out = kkh().arg("verify").arg(&config).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report_dir = dir.path().join("out");
    let csv = fs::read_to_string(report_dir.join("report.csv")).unwrap();

    fs::remove_file(report_dir.join("report.csv")).unwrap();
    let out = kkh().args(["report", "--format", "csv"]).arg(&report_dir).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(report_dir.join("report.csv")).unwrap(), csv);
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();

    let empty = write_config(dir.path(), json!([]));
    assert_eq!(kkh().arg("verify").arg(&empty).status().unwrap().code(), Some(0));

    let mut case = sasaki_defect_case();
    case["expect"]["verdict"] = json!("unobstructed");
    let failing = write_config(dir.path(), json!([case]));
    assert_eq!(kkh().arg("verify").arg(&failing).status().unwrap().code(), Some(1));

    let mut case = hopf_case();
    case["resolutin"] = json!(4);
    let bad = write_config(dir.path(), json!([case]));
    let out = kkh().arg("verify").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("cases[0]") && stderr.contains("resolutin"), "{stderr}");

    let missing = dir.path().join("absent.json");
    assert_ne!(kkh().arg("verify").arg(&missing).status().unwrap().code(), Some(0));
}

#[test]
fn scan_subcommand_keeps_only_sweeps() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), json!([hopf_case()]));
    let out = kkh().arg("scan").arg(&config).arg("--out").arg(dir.path().join("scan")).output().unwrap();
    assert!(out.status.success());
    let report = load_report(&dir.path().join("scan")).unwrap();
    assert!(report.cases.is_empty());
}

#[test]
fn default_config_covers_every_criterion() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.json");
    let cfg = SuiteConfig::load(&path).unwrap();
    for n in 1..=12 {
        let prefix = format!("c{n:02}-");
        assert!(cfg.cases.iter().any(|c| c.id.starts_with(&prefix)), "no case for {prefix}");
    }
    assert!(cfg.cases.iter().all(|c| c.expect.is_some()));
}
