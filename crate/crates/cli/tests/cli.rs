use std::process::{Command, Output};

use cartan_cli::report::{CheckRecord, Comparison, Metadata, Provenance, ReportBundle};
use cartan_cli::{run_job, JobConfig, JobKind};

fn cartan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cartan")).args(args).output().expect("run cartan")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn kasner_curvature_csv_row() {
    let o = cartan(&["curvature", "--fixture", "kasner:2/3,2/3,-1/3", "--point", "t=2", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    let row = rows
        .records()
        .map(|r| r.unwrap())
        .find(|r| r[0].starts_with("kasner_two_form[1,2]@t=2"))
        .expect("two-form row");
    let value: f64 = row[1].parse().unwrap();
    let reference: f64 = row[2].parse().unwrap();
    assert!((value - 1.0 / 9.0).abs() < 1e-12);
    assert!((reference - 1.0 / 9.0).abs() < 1e-15);
    assert_eq!(&row[5], "true");
}

#[test]
fn json_report_carries_metadata() {
    let o = cartan(&["curvature", "--fixture", "schwarzschild(1)", "--point", "0,4,1.2,0.3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let b = ReportBundle::from_json(&stdout(&o)).unwrap();
    assert_eq!(b.metadata.job, "curvature");
    assert_eq!(b.metadata.fixture, "schwarzschild(1)");
    assert!(b.metadata.conventions.contains_key("orientation"));
    assert!(b.metadata.versions.contains_key("cartan-core"));
    assert!(b.checks.iter().any(|c| c.name.starts_with("spin[t,r;t]")));
    assert!(b.all_pass());
}

#[test]
fn malformed_fixture_names_the_field() {
    let o = cartan(&["curvature", "--fixture", "kasner(1,2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("fixture"), "{}", stderr(&o));
    let o = cartan(&["curvature", "--fixture", "kasner(1,2)"]);
    assert_ne!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("arguments"), "{}", stderr(&o));
}

#[test]
fn bad_config_reports_line_and_field() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("job.json");
    std::fs::write(&p, "{\n  \"kind\": \"curvature\",\n  \"fixturr\": \"kasner(2/3,2/3,-1/3)\"\n}\n").unwrap();
    let o = cartan(&["curvature", "--input", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("fixturr") && err.contains("line 3"), "{err}");
}

#[test]
fn nonpositive_tolerance_is_rejected() {
    let o = cartan(&["curvature", "--tol", "ricci=0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("tolerances.ricci"), "{}", stderr(&o));
    let o = cartan(&["curvature", "--tol=-1e-3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("tolerances.default"));
}

#[test]
fn unreachable_tolerance_fails_with_exit_one() {
    let o = cartan(&["curvature", "--point", "t=2", "--tol", "formula=1e-30", "--tol", "riemann=1e-30"]);
    assert_eq!(o.status.code(), Some(1));
    let b = ReportBundle::from_json(&stdout(&o)).unwrap();
    assert!(b.failures().count() > 0);
}

#[test]
fn config_file_and_output_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("job.json");
    let out = dir.path().join("report.csv");
    let json = format!(
        "{{\"kind\": \"reduce\", \"fixture\": \"kasner(2/3,2/3,-1/3)\", \"points\": [\"t=1.5,x=0.2,y=-0.1\"], \"format\": \"csv\", \"out\": {:?}}}",
        out.to_str().unwrap()
    );
    std::fs::write(&cfg, json).unwrap();
    let o = cartan(&["reduce", "--input", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("name,value,reference,tolerance,comparison,pass,provenance,error"));
    assert!(text.contains("wave_map@"));
}

#[test]
fn reports_are_deterministic() {
    let run = || {
        let o = Command::new(env!("CARGO_BIN_EXE_cartan"))
            .args(["constraints", "--fixture", "kasner(2/3,2/3,-1/3)", "--grid", "16", "--format", "csv"])
            .env("CARTAN_THREADS", "3")
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        o.stdout
    };
    assert_eq!(run(), run());
    let a = cartan(&["curvature", "--fixture", "schwarzschild(1)"]);
    let b = Command::new(env!("CARGO_BIN_EXE_cartan")).args(["curvature", "--fixture", "schwarzschild(1)"]).env("CARTAN_THREADS", "1").output().unwrap();
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn twist_rejects_nonclosed_data() {
    let o = cartan(&["reduce", "--fixture", "nonclosed", "--point", "t=0.1,x=0.2,y=0.3", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("twist_rejects_nonclosed@nonclosed"));
}

#[test]
fn weyl_job_on_tilted_data() {
    let cfg = JobConfig { fixture: Some("tilted_kasner(2/3,2/3,-1/3,0.3,0.1)".into()), grid: Some(16), ..JobConfig::new(JobKind::Weyl) };
    let b = run_job(&cfg).unwrap();
    assert!(b.checks.iter().any(|c| c.name.starts_with("weyl_magnetic_vs_4d")));
    assert!(b.all_pass(), "{:?}", b.failures().collect::<Vec<_>>());
}

#[test]
fn empty_bundle_round_trips() {
    let b = ReportBundle::new(Metadata::new("suite", "none"), Vec::new());
    assert_eq!(b.exit_code(), 0);
    assert_eq!(ReportBundle::from_json(&b.to_json()).unwrap(), b);
    assert_eq!(b.to_csv().lines().count(), 1);
}

#[test]
fn failing_check_sets_exit_code() {
    let checks = vec![
        CheckRecord::within("good", 1.0, 1.0 + 1e-12, 1e-10, Provenance::Formula),
        CheckRecord::new("bad", 2.0, 1.0, 0.5, Comparison::AtMost, Provenance::Oracle),
        CheckRecord::errored("broken", 1e-3, Comparison::AtMost, "singular"),
    ];
    let b = ReportBundle::new(Metadata::new("curvature", "x"), checks);
    assert_eq!(b.exit_code(), 1);
    let names: Vec<&str> = b.failures().map(|c| c.name.as_str()).collect();
    assert_eq!(names, ["bad", "broken"]);
    let back = ReportBundle::from_json(&b.to_json()).unwrap();
    assert_eq!(back, b);
    assert!(b.to_csv().contains("broken,,0e0,1e-3,at_most,false,invariant,singular"));
}

#[test]
fn nan_values_never_pass() {
    let c = CheckRecord::bound("nan", f64::NAN, 1.0);
    assert!(!c.pass && c.value.is_none());
}

#[test]
fn quick_suite_exits_zero() {
    let o = cartan(&["suite", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).lines().skip(1).all(|l| l.starts_with("c") || l.starts_with('"')));
}

#[test]
fn full_suite_exits_zero() {
    let o = cartan(&["suite", "--all", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    for k in 1..=11 {
        assert!(text.lines().any(|l| l.trim_start_matches('"').starts_with(&format!("c{k}."))), "criterion {k} missing");
    }
}
