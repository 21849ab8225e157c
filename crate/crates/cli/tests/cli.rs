use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn spec(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../specs").join(name)
}

fn revlab(out: &Path, surfaces: &[&str], args: &[&str]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_revlab"));
    for s in surfaces {
        cmd.arg("--surface").arg(spec(s));
    }
    cmd.arg("--out").arg(out).args(args).output().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(p).unwrap()).unwrap()
}

#[test]
fn lemmas_on_the_smoothed_cone() {
    let d = tempfile::tempdir().unwrap();
    let o = revlab(d.path(), &["smoothed_cone.toml"], &["lemmas"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let j = read_json(&d.path().join("lemmas.json"));
    let l = j["constants"]["lambda0"].as_f64().unwrap();
    assert!((l - std::f64::consts::FRAC_PI_6).abs() < 1e-9);
    assert_eq!(j["config"]["command"], "lemmas");
    assert!(j["config"]["overrides"]["tol"]["tct"].is_number());
}

#[test]
fn vanishing_warp_is_an_input_error() {
    let d = tempfile::tempdir().unwrap();
    let o = revlab(d.path(), &["sphere_cap.toml"], &["surface"]);
    assert_eq!(o.status.code(), Some(3));
    let e = read_json(&d.path().join("error.json"));
    assert_eq!(e["error"], "WarpVanishes");
    assert!(e["file"].as_str().unwrap().ends_with("sphere_cap.toml"));
    assert!(e["message"].as_str().unwrap().contains("3.14159"));
}

#[test]
fn gates_exit_with_two() {
    let d = tempfile::tempdir().unwrap();
    let o = revlab(d.path(), &["plane.toml"], &["lemmas"]);
    assert_eq!(o.status.code(), Some(2));
    let o = revlab(
        d.path(),
        &["hyperbolic.toml", "plane.toml"],
        &["--samples", "triangles=4", "verify-tct"],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(!d.path().join("verify-tct.json").exists());
}

#[test]
fn input_errors_name_the_field() {
    let d = tempfile::tempdir().unwrap();
    let o = revlab(d.path(), &["plane.toml"], &["--tol", "bogus=1", "surface"]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(read_json(&d.path().join("error.json"))["field"], "--tol");

    let bad = d.path().join("bad.toml");
    std::fs::write(&bad, "[surface]\nkind = \"smoothed_cone\"\na = 1.5\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_revlab"))
        .arg("--surface")
        .arg(&bad)
        .arg("--out")
        .arg(d.path())
        .arg("surface")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
    let e = read_json(&d.path().join("error.json"));
    assert_eq!(e["field"], "a");
    assert!(e["file"].as_str().unwrap().ends_with("bad.toml"));

    let o = revlab(d.path(), &["plane.toml"], &["verify-tct"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn verify_tct_plane_against_hyperbolic() {
    let d = tempfile::tempdir().unwrap();
    let o = revlab(
        d.path(),
        &["plane.toml", "hyperbolic.toml"],
        &["--samples", "triangles=12", "--samples", "sector_fan=64", "verify-tct"],
    );
    assert_eq!(o.status.code(), Some(0));
    let j = read_json(&d.path().join("verify-tct.json"));
    assert_eq!(j["violations"], 0);
    assert_eq!(j["n"], 12);
    for k in ["min", "p50", "p95"] {
        assert!(j["margins"][k].as_f64().unwrap() > -1e-4);
    }
    let csv = std::fs::read_to_string(d.path().join("verify-tct.csv")).unwrap();
    assert_eq!(csv.lines().count(), 13);
}

#[test]
fn geometry_commands_write_their_artifacts() {
    let d = tempfile::tempdir().unwrap();
    let o = revlab(
        d.path(),
        &["paraboloid.toml"],
        &["geodesic", "--t0", "2", "--phi0", "-2.5", "--length", "12"],
    );
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(d.path().join("path.csv")).unwrap();
    assert!(csv.starts_with("s,t,theta,dtds,dthetads\n"));
    assert!(std::fs::read_to_string(d.path().join("geodesic.svg")).unwrap().contains("Euclidean polar coordinates"));

    let o = revlab(d.path(), &["paraboloid.toml"], &["--samples", "fan=64", "cutlocus", "--t0", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let j = read_json(&d.path().join("cutlocus.json"));
    assert_eq!(j["cut_locus"]["structure"], "opposite_meridian_subray");
    assert!(d.path().join("cutlocus.svg").exists());

    let o = revlab(d.path(), &["hyperbolic.toml"], &["distance", "--x", "1,0", "--y", "2,-1"]);
    assert_eq!(o.status.code(), Some(0));
    let dist = read_json(&d.path().join("distance.json"))["distance"]["d"].as_f64().unwrap();
    let exact = (1f64.cosh() * 2f64.cosh() - 1f64.sinh() * 2f64.sinh() * 1f64.cos()).acosh();
    assert!((dist - exact).abs() < 1e-9);

    let o = revlab(d.path(), &["tabulated.toml"], &["surface"]);
    assert_eq!(o.status.code(), Some(0));
    let j = read_json(&d.path().join("surface.json"));
    assert_eq!(j["surface"]["kind"], "tabulated");
}

#[test]
fn busemann_on_the_plane_is_the_projection() {
    let d = tempfile::tempdir().unwrap();
    let plane = d.path().join("plane.toml");
    std::fs::write(&plane, "[surface]\nkind = \"plane\"\nt_max = 1e6\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_revlab"))
        .arg("--surface")
        .arg(&plane)
        .arg("--out")
        .arg(d.path())
        .args(["busemann", "--x", "3,1", "--x", "2,-2.5"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let j = read_json(&d.path().join("busemann.json"));
    for (v, (t, th)) in j["values"].as_array().unwrap().iter().zip([(3.0f64, 1.0f64), (2.0, -2.5)]) {
        let est = &v["estimate"];
        let f = est["value"].as_f64().unwrap();
        assert!((f - t * th.cos()).abs() < est["eps"].as_f64().unwrap() + 1e-6);
    }
}
