use std::process::Command;

use bracketlab::harness::Report;

fn bracketlab(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_bracketlab")).args(args).output().unwrap()
}

#[test]
fn list_names_every_system() {
    let out = bracketlab(&["list"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for s in bracketlab::harness::catalog::SYSTEMS {
        assert!(text.contains(s), "{s} missing from list");
    }
}

#[test]
fn verify_writes_a_report_and_sets_the_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("toy.json");
    let out = bracketlab(&["verify", "toy", "--seed", "3", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let report = Report::from_json(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(report.system, "toy");
    assert_eq!(report.seeds, vec![3]);
    assert!(report.passed());

    let out = bracketlab(&["verify", "toy", "--tol", "1e-40"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn config_file_supplies_system_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    let report = dir.path().join("report.json");
    std::fs::write(
        &cfg,
        format!(
            r#"{{"system": "vorticity", "grid": [8], "seeds": [1, 2], "output": {{"report": {:?}}}}}"#,
            report.to_str().unwrap()
        ),
    )
    .unwrap();
    let out = bracketlab(&["verify", "--config", cfg.to_str().unwrap(), "--seed", "5"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let r = Report::from_json(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!((r.grid.clone(), r.seeds.clone()), (vec![8, 8, 8], vec![5]));

    std::fs::write(&cfg, r#"{"system": "toy", "bogus": 1}"#).unwrap();
    assert_eq!(bracketlab(&["verify", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(bracketlab(&["verify", "nope"]).status.code(), Some(2));
    assert_eq!(bracketlab(&["verify", "vorticity", "--grid", "8,8"]).status.code(), Some(2));
    assert_eq!(bracketlab(&["simulate", "toy", "--dt", "-1", "--steps", "3"]).status.code(), Some(2));
    let out = bracketlab(&["dispersion", "--d", "inv_lap", "--k", "0,0,0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: "));
}

#[test]
fn simulate_writes_monitor_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("toy.csv");
    let out = bracketlab(&["simulate", "toy", "--dt", "0.01", "--steps", "20", "--csv", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,energy");
    assert_eq!(lines.count(), 21);

    let out = bracketlab(&["simulate", "toy", "--dt", "0.01", "--steps", "2", "--monitors", "nothing"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn dispersion_reports_the_measured_frequency() {
    let out = bracketlab(&["dispersion", "--d", "inv_sqrt_neg_lap", "--k", "0,2,0", "--grid", "8"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("frequency 1.99999"));
}
