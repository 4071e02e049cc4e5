use std::path::Path;
use std::process::{Command, Output};

fn platecont(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_platecont")).args(args).arg("--out").arg(out).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let src = include_str!("../scenarios/flat-biharmonic.toml").replace("mesh = 129", "mesch = 129");
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, src).unwrap();
    let o = platecont(&["flatten", "--scenario", path.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("mesch"), "{}", stderr(&o));
}

#[test]
fn bad_radii_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = platecont(&["three-spheres", "--radii", "0.05,0.1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = platecont(&["three-spheres", "--radii", "0.1,0.05,0.4"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_all_flat_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = platecont(&["verify-all", "--scenario", "flat-biharmonic"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("flat-biharmonic/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["pass"], true);
    assert_eq!(summary["tool"], "platecont");
    let stages = summary["report"]["stages"].as_array().unwrap();
    assert_eq!(stages.len(), 7);
}

#[test]
fn carleman_csv_has_a_row_per_tau() {
    let dir = tempfile::tempdir().unwrap();
    let o = platecont(&["carleman", "--tau-min", "3", "--tau-max", "12"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let mut rd = csv::Reader::from_path(dir.path().join("flat-biharmonic/carleman.csv")).unwrap();
    assert_eq!(rd.headers().unwrap().get(0), Some("tau"));
    let taus: Vec<f64> = rd.records().map(|r| r.unwrap()[0].parse().unwrap()).collect();
    assert_eq!(taus.len(), 19);
    assert_eq!(taus[0], 3.0);
    assert_eq!(taus[18], 12.0);
}

#[test]
fn three_spheres_reports_theta() {
    let dir = tempfile::tempdir().unwrap();
    let o = platecont(&["three-spheres", "--radii", "0.05,0.1,0.4"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("flat-biharmonic/three-spheres.json")).unwrap()).unwrap();
    let r = &v["report"]["reports"][0];
    assert!((r["theta_tilde"].as_f64().unwrap() - 0.25).abs() < 1e-12);
    assert!(r["c_emp"].as_f64().unwrap() <= r["ceiling"].as_f64().unwrap());
}

#[test]
fn reports_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = platecont(&["sucp", "--seed", "7"], d.path());
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    for f in ["sucp.json", "summary.json", "scenario.toml", "sigma-profile.csv"] {
        let x = std::fs::read(a.path().join("flat-biharmonic").join(f)).unwrap();
        let y = std::fs::read(b.path().join("flat-biharmonic").join(f)).unwrap();
        assert_eq!(x, y, "{f} differs between runs");
    }
}

#[test]
fn written_scenario_reloads() {
    let dir = tempfile::tempdir().unwrap();
    let o = platecont(&["flatten", "--mesh", "65"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let written = dir.path().join("flat-biharmonic/scenario.toml");
    assert!(std::fs::read_to_string(&written).unwrap().contains("mesh = 65"));
    let again = tempfile::tempdir().unwrap();
    let o = platecont(&["flatten", "--scenario", written.to_str().unwrap()], again.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(std::fs::read(written).unwrap(), std::fs::read(again.path().join("flat-biharmonic/scenario.toml")).unwrap());
}
