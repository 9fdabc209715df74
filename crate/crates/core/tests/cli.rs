use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use bernoulli_lab::io::{read_grid, read_polylines};
use serde_json::Value;

fn bernoulli(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bernoulli"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn half_plane_boundary_is_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let o = bernoulli(dir.path(), &["boundary", "--family", "HalfPlane", "--out", "o"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let fb = read_polylines(&dir.path().join("o/boundary.csv")).unwrap();
    assert_eq!(fb.components.len(), 1);
    assert!(fb.components[0].points.iter().all(|p| p.x.abs() < 1e-15));
}

#[test]
fn figure_datasets_match_printed_geometry() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("h.json"), r#"{"figure": "hairpin"}"#).unwrap();
    assert_eq!(code(&bernoulli(dir.path(), &["boundary", "--config", "h.json", "--out", "h"])), 0);
    let sets = json(&dir.path().join("h/boundary.json"));
    let quarter = &sets[0];
    assert_eq!(quarter["file"], "hairpin_a0.25.csv");
    // Neck separation (2 + pi) a.
    let neck = quarter["neck_separation"].as_f64().unwrap();
    assert!((neck - (2.0 + PI) / 4.0).abs() < 1e-4, "{neck}");
    for f in ["hairpin_a0.25.csv", "hairpin_a1.csv", "hairpin_a2.csv"] {
        assert_eq!(read_polylines(&dir.path().join("h").join(f)).unwrap().components.len(), 2);
    }

    fs::write(dir.path().join("s.json"), r#"{"figure": "scherk"}"#).unwrap();
    assert_eq!(code(&bernoulli(dir.path(), &["boundary", "--config", "s.json", "--out", "s"])), 0);
    let sets = json(&dir.path().join("s/boundary.json"));
    let half = sets[1]["loop_half_width"].as_f64().unwrap();
    assert!((half - 0.75 * 3f64.ln()).abs() < 1e-4, "{half}");
    let loops = read_polylines(&dir.path().join("s/scherk_s0.5.csv")).unwrap();
    assert!(loops.components.len() >= 2);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["boundary", "--family", "Scherk", "--param", "s=0.5", "--param", "a=1", "--resolution", "16"];
    let mut a = args.to_vec();
    a.extend(["--out", "a"]);
    let mut b = args.to_vec();
    b.extend(["--out", "b"]);
    assert_eq!(code(&bernoulli(dir.path(), &a)), 0);
    assert_eq!(code(&bernoulli(dir.path(), &b)), 0);
    for f in ["boundary.csv", "boundary.json"] {
        assert_eq!(fs::read(dir.path().join("a").join(f)).unwrap(), fs::read(dir.path().join("b").join(f)).unwrap());
    }
    let text = fs::read_to_string(dir.path().join("a/boundary.csv")).unwrap();
    let row = text.lines().nth(1).unwrap();
    // 17 significant digits: one leading digit and sixteen after the point.
    let x = row.split(',').nth(2).unwrap();
    let mantissa = x.trim_start_matches('-').split('e').next().unwrap();
    assert_eq!(mantissa.len(), 18, "{x}");
}

#[test]
fn verify_passes_for_hairpin_and_flags_wrong_slope() {
    let dir = tempfile::tempdir().unwrap();
    let o = bernoulli(dir.path(), &["verify", "--family", "Hairpin", "--param", "a=1", "--out", "v"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(json(&dir.path().join("v/verify.json"))["all_pass"], true);

    let o = bernoulli(dir.path(), &["verify", "--family", "OneSidedPlane", "--param", "slope=0.5", "--out", "w"]);
    assert_eq!(code(&o), 1);
    let report = json(&dir.path().join("w/verify.json"));
    let residual = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "variational_residual")
        .unwrap();
    assert_eq!(residual["pass"], false);
}

#[test]
fn verify_on_empty_window_fails_the_check() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("c.json"),
        r#"{"window": {"x_min": 0.0, "x_max": 0.0, "y_min": -1.0, "y_max": 1.0}}"#,
    )
    .unwrap();
    let o = bernoulli(dir.path(), &["verify", "--config", "c.json", "--family", "HalfPlane", "--out", "v"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn minimize_zero_data_gives_zero_field() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("z.json"), r#"{"boundary": {"kind": "zero"}, "resolution": 16}"#).unwrap();
    let o = bernoulli(dir.path(), &["minimize", "--config", "z.json", "--out", "z"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let f = read_grid(&dir.path().join("z/field.csv")).unwrap();
    assert!(f.values().iter().all(|&v| v == 0.0));
    assert!(read_polylines(&dir.path().join("z/boundary.csv")).unwrap().is_empty());
}

#[test]
fn minimize_reads_grid_data_and_rejects_a_mismatched_header() {
    let dir = tempfile::tempdir().unwrap();
    let o = bernoulli(dir.path(), &["minimize", "--family", "HalfPlane", "--resolution", "16", "--out", "m"]);
    assert_eq!(code(&o), 0);
    let summary = json(&dir.path().join("m/minimize.json"));
    assert_eq!(summary["monotone"], true);
    assert!(summary["boundary_distance"].as_f64().unwrap() <= 2.0 / 16.0);

    fs::write(dir.path().join("g.json"), r#"{"boundary": {"kind": "grid", "path": "m/field.csv"}}"#).unwrap();
    let same = bernoulli(dir.path(), &["minimize", "--config", "g.json", "--resolution", "16", "--out", "g"]);
    assert_eq!(code(&same), 0);
    let other = bernoulli(dir.path(), &["minimize", "--config", "g.json", "--resolution", "32", "--out", "x"]);
    assert_eq!(code(&other), 2);
}

#[test]
fn minimize_non_convergence_still_writes_the_iterate() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.json"), r#"{"max_iters": 1, "resolution": 32}"#).unwrap();
    let o = bernoulli(dir.path(), &["minimize", "--config", "c.json", "--family", "HalfPlane", "--out", "n"]);
    assert_eq!(code(&o), 1);
    assert!(dir.path().join("n/field.csv").exists());
    assert_eq!(json(&dir.path().join("n/minimize.json"))["converged"], false);
}

#[test]
fn traizet_writes_catenoid_obj() {
    let dir = tempfile::tempdir().unwrap();
    let o = bernoulli(
        dir.path(),
        &["traizet", "--family", "DiskComplement", "--param", "R=1", "--resolution", "32", "--tol", "1e-2", "--out", "t"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let obj = fs::read_to_string(dir.path().join("t/mesh.obj")).unwrap();
    assert!(obj.lines().all(|l| l.starts_with("v ") || l.starts_with("f ")));
    let summary = json(&dir.path().join("t/traizet.json"));
    assert!(summary["catenoid"]["max_error"].as_f64().unwrap() < 1e-9);
    let curv = fs::read_to_string(dir.path().join("t/curvature.csv")).unwrap();
    assert_eq!(curv.lines().next(), Some("vertex,H,is_boundary"));
}

#[test]
fn classify_cases_and_preconditions() {
    let dir = tempfile::tempdir().unwrap();
    let o = bernoulli(
        dir.path(),
        &["classify", "--family", "TwoPlane", "--param", "a=0.1", "--param", "shift_x=0.05", "--out", "c"],
    );
    assert_eq!(code(&o), 0);
    assert_eq!(json(&dir.path().join("c/classify.json"))["report"]["case"], "B");

    let far = bernoulli(dir.path(), &["classify", "--family", "DiskComplement", "--param", "R=1", "--out", "d"]);
    assert_eq!(code(&far), 1);

    fs::write(dir.path().join("a.json"), r#"{"mode": "annulus"}"#).unwrap();
    let o = bernoulli(dir.path(), &["classify", "--config", "a.json", "--family", "Wedge", "--param", "s=1", "--out", "w"]);
    assert_eq!(code(&o), 0);
    let rep = json(&dir.path().join("w/classify.json"));
    assert_eq!(rep["pass"], true);
}

#[test]
fn config_and_io_failures_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.json"), "{ not json").unwrap();
    assert_eq!(code(&bernoulli(dir.path(), &["verify", "--config", "bad.json"])), 2);
    assert_eq!(code(&bernoulli(dir.path(), &["verify", "--config", "missing.json"])), 2);
    assert_eq!(code(&bernoulli(dir.path(), &["verify", "--family", "HalfPlane", "--resolution", "4"])), 2);
    assert_eq!(code(&bernoulli(dir.path(), &["verify", "--family", "Nope"])), 2);
    assert_eq!(code(&bernoulli(dir.path(), &["verify", "--family", "Hairpin"])), 2);
    assert_eq!(code(&bernoulli(dir.path(), &["verify", "--frobnicate"])), 2);
    fs::write(dir.path().join("file"), "").unwrap();
    assert_eq!(code(&bernoulli(dir.path(), &["boundary", "--family", "HalfPlane", "--out", "file/sub"])), 2);
    assert_eq!(code(&bernoulli(dir.path(), &["--help"])), 0);
}
