use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn divtree() -> Command {
    Command::new(env!("CARGO_BIN_EXE_divtree"))
}

fn domains() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../domains")
}

fn run(sub: &str, domain: &Path, out: &Path, extra: &[&str]) -> Output {
    divtree()
        .arg(sub)
        .arg("--domain")
        .arg(domain)
        .arg("--out")
        .arg(out)
        .args(extra)
        .env("DIVTREE_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    path
}

const CHAIN: &str = r#"{
  "domain": {
    "family": "custom_tree",
    "overlap": 2,
    "nodes": [
      { "omega": { "box": { "lo": [0.0], "hi": [2.0] } } },
      { "omega": { "box": { "lo": [1.0], "hi": [3.0] } }, "connector": { "box": { "lo": [1.0], "hi": [2.0] } }, "parent": 0 },
      { "omega": { "box": { "lo": [2.5], "hi": [4.0] } }, "connector": { "box": { "lo": [2.5], "hi": [3.0] } }, "parent": 1 }
    ]
  },
  "h": 0.0625,
  "seed": 3
  DATA
}"#;

fn chain(data: &str) -> String {
    CHAIN.replace("  DATA\n", &if data.is_empty() { String::new() } else { format!("  ,\"data\": {data}\n") })
}

#[test]
fn chain_subcommands_write_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let domain = domains().join("chain.json");
    for (sub, files) in [
        ("decompose", &["decomposition.csv", "report.json"][..]),
        ("solve", &["u.csv", "residual.csv", "report.json"][..]),
        ("verify", &["verify.csv", "verify.json"][..]),
        ("report", &["nodes.csv", "weights.csv", "summary.json"][..]),
    ] {
        let out = dir.path().join(sub);
        let o = run(sub, &domain, &out, &[]);
        assert_eq!(o.status.code(), Some(0), "{sub}: {}", String::from_utf8_lossy(&o.stderr));
        for f in files {
            let text = fs::read_to_string(out.join(f)).unwrap();
            assert!(!text.is_empty(), "{sub}/{f} empty");
        }
    }
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("solve/report.json")).unwrap()).unwrap();
    assert_eq!(report["estimate_passed"], true);
    assert!(report["residual"].as_f64().unwrap() < 1e-6);
    let nodes = fs::read_to_string(dir.path().join("report/nodes.csv")).unwrap();
    assert_eq!(nodes.lines().count(), 4);
}

#[test]
fn solve_report_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let domain = domains().join("holder_hump.json");
    let a = run("solve", &domain, &dir.path().join("a"), &["--seed", "11"]);
    let b = run("solve", &domain, &dir.path().join("b"), &["--seed", "11"]);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(b.status.code(), Some(0));
    let ra = fs::read(dir.path().join("a/report.json")).unwrap();
    let rb = fs::read(dir.path().join("b/report.json")).unwrap();
    assert_eq!(ra, rb);
    let c = run("solve", &domain, &dir.path().join("c"), &["--seed", "12"]);
    assert_eq!(c.status.code(), Some(0));
    assert_ne!(ra, fs::read(dir.path().join("c/report.json")).unwrap());
}

#[test]
fn flags_override_file_values() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("decompose", &domains().join("chain.json"), dir.path(), &["--h", "0.03125", "--p", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["h"], 0.03125);
    assert_eq!(report["config"]["p"], 3.0);
    assert_eq!(report["grid"]["shape"][0], 128);
}

#[test]
fn p_at_most_one_is_a_spec_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("solve", &domains().join("chain.json"), dir.path(), &["--p", "1"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("p > 1"));
}

#[test]
fn negative_kappa_is_a_spec_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("solve", &domains().join("chain.json"), dir.path(), &["--kappa=-1"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn unknown_field_reports_location() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "{\n  \"domain\": { \"family\": \"holder\", \"profile\": { \"kind\": \"power_hump\", \"alpha\": 0.5, \"c\": 0.4, \"l\": 0.25 } },\n  \"hh\": 0.1\n}");
    let o = run("verify", &path, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn misdeclared_cusp_constant_is_a_spec_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(
        dir.path(),
        r#"{ "domain": { "family": "cusp", "profile": { "kind": "power", "gamma": 2.0, "a": 1.0, "k1": 0.5 } }, "h": 0.015625 }"#,
    );
    let o = run("verify", &path, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn missing_domain_file_is_a_spec_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("solve", &dir.path().join("absent.json"), &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn nonzero_mean_data_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), &chain(r#"{ "kind": "constant", "value": 1.0 }"#));
    let o = run("solve", &path, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(5), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn unresolvable_grid_is_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("verify", &domains().join("lshape.json"), dir.path(), &["--h", "0.015625"]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn connector_below_cell_size_is_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("decompose", &domains().join("chain.json"), dir.path(), &["--h", "1"]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn bad_thread_count_is_a_spec_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = divtree()
        .args(["verify", "--domain"])
        .arg(domains().join("chain.json"))
        .arg("--out")
        .arg(dir.path())
        .env("DIVTREE_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn usage_errors_exit_with_spec_code() {
    let o = divtree().arg("solve").output().unwrap();
    assert_eq!(o.status.code(), Some(3));
    let o = divtree().arg("--help").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn file_data_feeds_solve() {
    let dir = tempfile::tempdir().unwrap();
    let cells = 64;
    let mut csv = String::from("cell,x0,value\n");
    for i in 0..cells {
        let x = (i as f64 + 0.5) * 0.0625;
        let v = if x < 2.0 { 1.0 } else { -1.0 };
        csv.push_str(&format!("{i},{x},{v}\n"));
    }
    fs::write(dir.path().join("f.csv"), csv).unwrap();
    let path = write_config(dir.path(), &chain(r#"{ "kind": "file", "path": "f.csv" }"#));
    let o = run("solve", &path, &dir.path().join("b"), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}
