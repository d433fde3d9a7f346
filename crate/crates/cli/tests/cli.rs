use std::path::Path;
use std::process::{Command, Output};

fn periprop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_periprop")).args(args).output().unwrap()
}

const COARSE: [&str; 8] = ["--radius", "4", "--size-body", "0.15", "--size-far", "0.5", "--nsteps", "16"];

fn run_in(dir: &Path, cmd: &str, extra: &[&str]) -> Output {
    let out = dir.to_str().unwrap();
    let mut args = vec![cmd];
    args.extend_from_slice(extra);
    args.extend_from_slice(&COARSE);
    args.extend_from_slice(&["--out", out]);
    periprop(&args)
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn missing_shape_is_a_usage_error() {
    let o = periprop(&["resistance", "--radius", "8"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn invalid_values_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), "linear", &["--shape", "drop", "--h", "-1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run_in(dir.path(), "linear", &["--shape", "cube"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run_in(dir.path(), "sweep", &["--shape", "drop", "--h-list", ""]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn drop_and_flipped_drop_have_equal_resistance() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(run_in(a.path(), "resistance", &["--shape", "drop"]).status.success());
    assert!(run_in(b.path(), "resistance", &["--shape", "flipped-drop"]).status.success());
    let ka = json(&a.path().join("resistance.json"))["K"].as_f64().unwrap();
    let kb = json(&b.path().join("resistance.json"))["K"].as_f64().unwrap();
    assert!((ka - kb).abs() <= 0.005 * ka, "{ka} vs {kb}");
    assert!(a.path().join("mesh.txt").exists());
    let m = json(&a.path().join("manifest.json"));
    assert_eq!(m["mesh_hash"].as_str().unwrap().len(), 64);
    assert_eq!(m["outputs"].as_array().unwrap().len(), 2);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[problem]\nshape = \"drop\"\nh = 5.0\nforce = \"y3\"\n[time]\nn_steps = 40\n").unwrap();
    let out = dir.path().join("out");
    let o = periprop(&[
        "mesh",
        "--config",
        cfg.to_str().unwrap(),
        "--radius",
        "4",
        "--size-body",
        "0.2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = json(&out.join("manifest.json"));
    assert_eq!(m["config"]["problem"]["h"], 5.0);
    assert_eq!(m["config"]["problem"]["force"], "y3");
    assert_eq!(m["config"]["domain"]["radius"], 4.0);
    assert_eq!(m["config"]["domain"]["size_body"], 0.2);
    assert_eq!(m["config"]["time"]["n_steps"], 40);
    let o = periprop(&["mesh", "--shape", "drop", "--inspect", out.join("mesh.txt").to_str().unwrap()]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains(m["mesh_hash"].as_str().unwrap()), "{text}");
}

#[test]
fn linear_command_writes_summary_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), "linear", &["--shape", "drop", "--force", "y2", "--h", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = json(&dir.path().join("summary.json"));
    for key in ["shape", "force", "h", "G_z", "K", "gamma0_bar", "display", "manifest"] {
        assert!(s.get(key).is_some(), "{key}");
    }
    let g = s["G_z"].as_f64().unwrap();
    let k = s["K"].as_f64().unwrap();
    assert_eq!(s["gamma0_bar"].as_f64().unwrap(), g / k);
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(trace.starts_with("cycle,step,t,gamma,drag,subiters\n"));
}

fn numeric_columns(text: &str) -> Vec<String> {
    text.lines().map(|l| l.to_string()).collect()
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [a.path(), b.path()] {
        let o = run_in(d, "nonlinear", &["--shape", "drop", "--force", "y1", "--h", "1", "--periods-max", "2"]);
        assert!(matches!(o.status.code(), Some(0) | Some(4)), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["summary.json", "periods.csv", "trajectory.csv"] {
        let x = std::fs::read_to_string(a.path().join(f)).unwrap();
        let y = std::fs::read_to_string(b.path().join(f)).unwrap();
        assert_eq!(numeric_columns(&x), numeric_columns(&y), "{f}");
    }
}

#[test]
fn sweep_merges_items_in_h_order() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), "sweep", &["--shape", "flipped-drop", "--force", "y2", "--h-list", "2,1", "--jobs", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "h,value");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("1.0000000000000000e0,"));
    assert!(lines[2].starts_with("2.0000000000000000e0,"));
    assert!(dir.path().join("h_1").join("summary.json").exists());

    let report = dir.path().join("t2.md");
    let o = periprop(&["report", "--target", "table2", "--runs", dir.path().to_str().unwrap(), "--out", report.to_str().unwrap()]);
    assert_ne!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(report.with_extension("csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| l.contains("MISSING")).count(), 7);
}
