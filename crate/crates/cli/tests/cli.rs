use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn simulate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_simulate"))
        .args(args)
        .output()
        .expect("spawn simulate")
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.json"))
}

fn json(bytes: &[u8]) -> serde_json::Value {
    serde_json::from_slice(bytes).expect("JSON on stdout")
}

#[test]
fn run_writes_outputs_and_reuses_the_oracle_cache() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("rc");
    let sc = scenario("rc_smoke");
    let args = [
        "run",
        sc.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--seedless",
    ];

    let first = simulate(&args);
    assert!(
        first.status.success(),
        "{}",
        String::from_utf8_lossy(&first.stderr)
    );
    for f in [
        "es.csv",
        "fe_100ns.csv",
        "be_10ns.csv",
        "oracle.csv",
        "trace.csv",
        "wall_time.csv",
        "summary.json",
    ] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let summary = json(&first.stdout);
    assert_eq!(summary["scenario"], "rc_smoke");
    let es_err = summary["relative_error"]["es"]["v_c"].as_f64().unwrap();
    assert!(es_err < 1e-4, "ES error {es_err}");
    // v_c = 10 (1 - exp(-t / 1 ms)) averages to 10 (1 - (1 - e^-2) / 2) over 2 ms.
    let mean = summary["mean"]["es"]["v_c"].as_f64().unwrap();
    let exact = 10.0 * (1.0 - (1.0 - (-2f64).exp()) / 2.0);
    assert!((mean - exact).abs() < 1e-4, "mean {mean} vs {exact}");

    let cached: Vec<_> = std::fs::read_dir(out.join("cache")).unwrap().collect();
    assert_eq!(cached.len(), 2, "oracle CSV and its sidecar");
    let second = simulate(&args);
    assert!(second.status.success());
    assert_eq!(json(&second.stdout), summary);
}

#[test]
fn oracle_and_compare_subcommands() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = scenario("rc_smoke");
    let dir = tmp.path().to_str().unwrap();
    for h in ["1e-8", "2e-8"] {
        let o = simulate(&[
            "oracle",
            sc.to_str().unwrap(),
            "--h",
            h,
            "--out",
            dir,
            "--record-every",
            "10",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = tmp.path().join("oracle_20ns.csv");
    let b = tmp.path().join("oracle_10ns.csv");
    assert!(a.is_file() && b.is_file());

    let cmp = simulate(&[
        "compare",
        a.to_str().unwrap(),
        b.to_str().unwrap(),
        "--signal",
        "v_c",
    ]);
    assert!(cmp.status.success(), "{}", String::from_utf8_lossy(&cmp.stderr));
    let v = json(&cmp.stdout);
    let err = v["relative_error"]["v_c"].as_f64().unwrap();
    // Trapezoid error at these steps is far below 1e-6 of the signal.
    assert!(err > 0.0 && err < 1e-6, "{err}");

    let same = simulate(&[
        "compare",
        b.to_str().unwrap(),
        b.to_str().unwrap(),
        "--window",
        "1e-4",
        "1e-3",
    ]);
    let v = json(&same.stdout);
    assert_eq!(v["relative_error"]["v_c"].as_f64().unwrap(), 0.0);
    assert_eq!(v["window"], serde_json::json!([1e-4, 1e-3]));
}

#[test]
fn errors_exit_nonzero_with_a_message() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, r#"{"id": "x", "netlist": {"nodes": ["gnd"], "elements": []}, "duration": -1, "control": {"period": 25e-6}}"#).unwrap();
    let o = simulate(&[
        "run",
        bad.to_str().unwrap(),
        "--out",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    let msg = String::from_utf8_lossy(&o.stderr);
    assert!(msg.starts_with("error: "), "{msg}");

    let missing = simulate(&["compare", "/nonexistent/a.csv", "/nonexistent/b.csv"]);
    assert!(!missing.status.success());
    assert!(String::from_utf8_lossy(&missing.stderr).contains("cannot open"));
}
