use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;
use tempfile::TempDir;

const ONE: &str = r#"{"num": [[1, 0]], "den": [[1, 0]]}"#;

fn metric(dir: &TempDir, name: &str, factors: &[&str], b1: &str, a: &[&str]) -> PathBuf {
    let f = vec![ONE; a.len()];
    let text = format!(
        r#"{{"factors": [{}], "b1": {b1}, "a": [{}], "f": [{}]}}"#,
        factors.iter().map(|s| format!("\"{s}\"")).collect::<Vec<_>>().join(","),
        a.join(","),
        f.join(",")
    );
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn flat(dir: &TempDir, first: &str) -> PathBuf {
    metric(dir, &format!("{first}.json"), &[first, "plane"], ONE, &[ONE])
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_warpgeo")).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn complex(v: &Value) -> (f64, f64) {
    (v[0].as_f64().unwrap(), v[1].as_f64().unwrap())
}

#[test]
fn trace_flat_completes_at_five() {
    let dir = TempDir::new().unwrap();
    let m = flat(&dir, "plane");
    let csv = dir.path().join("rec.csv");
    let (code, out, _) = run(&[
        "trace", "--config", p(&m), "--start", "0,0", "--velocity", "1,0", "--path", "5", "--csv", p(&csv),
    ]);
    assert_eq!(code, 0);
    let rec: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(rec["status"]["kind"], "completed");
    let last = rec["samples"].as_array().unwrap().last().unwrap();
    let u1 = complex(&last["u"][0]);
    assert!((u1.0 - 5.0).abs() < 1e-9 && u1.1.abs() < 1e-9);
    assert_eq!(complex(&last["u"][1]), (0.0, 0.0));
    let csv = std::fs::read_to_string(csv).unwrap();
    assert!(csv.starts_with("z_re,z_im,u1_re,u1_im"));
}

#[test]
fn trace_disc_exits_near_boundary() {
    let dir = TempDir::new().unwrap();
    let m = flat(&dir, "disc");
    let (code, out, _) = run(&["trace", "--config", p(&m), "--start", "0,0", "--velocity", "1,0", "--path", "2"]);
    assert_eq!(code, 2);
    let rec: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(rec["status"]["kind"], "domain_exit");
    let z = complex(&rec["status"]["z"]);
    assert!((z.0 - 1.0).abs() < 1e-6 && z.1.abs() < 1e-6);
}

#[test]
fn usage_errors_exit_one() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{").unwrap();
    let (code, _, err) = run(&["trace", "--config", p(&bad), "--start", "0", "--velocity", "1", "--path", "1"]);
    assert_eq!(code, 1);
    assert!(err.contains("malformed JSON"));
    let (code, _, _) = run(&["trace", "--config", p(&bad)]);
    assert_eq!(code, 1);
    let (code, _, _) = run(&["nonsense"]);
    assert_eq!(code, 1);
    let m = flat(&dir, "plane");
    let (code, _, err) = run(&["trace", "--config", p(&m), "--start", "0", "--velocity", "1", "--path", "1"]);
    assert_eq!(code, 1);
    assert!(err.contains("2 components"));
    let (code, _, _) = run(&[
        "trace", "--config", p(&m), "--start", "0,0", "--velocity", "1,0", "--path", "1", "--tol", "0.5",
    ]);
    assert_eq!(code, 1);
}

#[test]
fn classify_synthetic_cases() {
    let (code, out, _) = run(&["classify", "--synthetic", "log"]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["kind"], "logarithmic");
    let (_, out, _) = run(&["classify", "--synthetic", "riccati"]);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["kind"], "pole");
    assert_eq!(v["order_estimate"], 1);
    let (_, out, _) = run(&["classify", "--synthetic", "riccati", "--path=-1"]);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["kind"], "regular");
}

#[test]
fn classify_without_obstruction_is_regular() {
    let dir = TempDir::new().unwrap();
    let m = flat(&dir, "plane");
    let (code, out, _) = run(&["classify", "--config", p(&m), "--start", "0,0", "--velocity", "1,0", "--path", "3"]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["kind"], "regular");
}

#[test]
fn probe_exit_codes() {
    let dir = TempDir::new().unwrap();
    let plane = flat(&dir, "plane");
    let args = |m: &Path| {
        vec![
            "probe".to_string(),
            "--config".into(),
            p(m).into(),
            "--start".into(),
            "0,0".into(),
            "--velocity".into(),
            "1,0".into(),
        ]
    };
    let svg = dir.path().join("grid.svg");
    let mut a = args(&plane);
    a.extend(["--svg".to_string(), p(&svg).into()]);
    let (code, out, _) = run(&a.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["summary"]["verdict"], "looks_complete");
    let svg = std::fs::read_to_string(svg).unwrap();
    assert!(svg.starts_with("<svg") && !svg.contains("<script"));

    let disc = flat(&dir, "disc");
    let a = args(&disc);
    let (code, _, _) = run(&a.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(code, 2);

    // b1 = 1/eta^4: u = 1/(1 - z) from u = v = 1, a pole on the positive ray.
    let quartic = r#"{"num": [[1, 0]], "den": [[0, 0], [0, 0], [0, 0], [0, 0], [1, 0]]}"#;
    let m = metric(&dir, "quartic.json", &["plane"], quartic, &[]);
    let base = ["probe", "--config", p(&m), "--start", "1", "--velocity", "1", "--budget"];
    let (code, _, _) = run(&[&base[..], &["0"]].concat());
    assert_eq!(code, 3);
    let (code, _, _) = run(&[&base[..], &["6"]].concat());
    assert_eq!(code, 0);
}

#[test]
fn coercivity_exit_codes_and_determinism() {
    let dir = TempDir::new().unwrap();
    let q = r#"{"num": [[1, 0]], "den": [[-1, 0], [0, 0], [1, 0]]}"#;
    let fam = metric(&dir, "family.json", &["plane", "plane"], ONE, &[q]);
    let (code, first, _) = run(&["coercivity", "--config", p(&fam), "--seed", "7"]);
    assert_eq!(code, 0);
    let (_, second, _) = run(&["coercivity", "--config", p(&fam), "--seed", "7"]);
    assert_eq!(first, second);
    let v: Value = serde_json::from_str(&first).unwrap();
    assert_eq!(v["overall"], "coercive");
    assert_eq!(v["seed"], 7);

    let disc = flat(&dir, "disc");
    let (code, out, _) = run(&["coercivity", "--config", p(&disc), "--tuples", "4"]);
    assert_eq!(code, 2);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["components"][0]["verdict"]["kind"], "not_coercive");
    let (code, _, _) = run(&["coercivity", "--config", p(&disc), "--tuples", "0"]);
    assert_eq!(code, 1);
}
