use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn geodp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geodp")).args(args).output().unwrap()
}

fn ok_json(args: &[&str]) -> Value {
    let out = geodp(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

/// The error object is the last line of stderr; warnings may precede it.
fn error_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.lines().last().unwrap()).unwrap()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_owned()
}

#[test]
fn generate_then_fit_recovers_noiseless_data() {
    let dir = tempfile::tempdir().unwrap();
    for (manifold, file) in [("sphere", "s.csv"), ("spd", "p.json"), ("kendall", "k.csv")] {
        let data = path(dir.path(), file);
        let out = geodp(&["gen-data", "--manifold", manifold, "--landmarks", "6", "--n", "30", "--noise", "0", "--seed", "7", "--out", &data]);
        assert!(out.status.success());
        let report = ok_json(&["fit", "--data", &data]);
        assert!(report["energy"].as_f64().unwrap() <= 1e-12, "{manifold}");
        assert_eq!(report["converged"], Value::Bool(true));
    }
}

#[test]
fn fit_with_noise_and_model_output() {
    let dir = tempfile::tempdir().unwrap();
    let data = path(dir.path(), "d.json");
    let model = path(dir.path(), "m.json");
    assert!(geodp(&["gen-data", "--n", "50", "--delta", "0.001", "--seed", "7", "--out", &data]).status.success());
    let report = ok_json(&["fit", "--data", &data, "--out", &model]);
    assert!(report["converged"].as_bool().unwrap());
    let saved: Value = serde_json::from_str(&std::fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(saved["p"], report["model"]["p"]);
    let fd = ok_json(&["fit", "--data", &data, "--finite-differences"]);
    assert!((fd["energy"].as_f64().unwrap() - report["energy"].as_f64().unwrap()).abs() < 1e-10);
}

#[test]
fn privatize_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let data = path(dir.path(), "d.csv");
    assert!(geodp(&["gen-data", "--n", "30", "--noise", "0.001", "--seed", "3", "--out", &data]).status.success());
    let args = ["privatize", "--data", &data, "--eps-p", "0.3", "--eps-v", "0.3", "--seed", "11", "--chain-length", "300", "--burn-in", "100"];
    let a = geodp(&args);
    let b = geodp(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert!(String::from_utf8_lossy(&a.stderr).contains("does not satisfy differential privacy"));
    let release: Value = serde_json::from_slice(&a.stdout).unwrap();
    assert!((release["budget"]["total"].as_f64().unwrap() - 0.6).abs() < 1e-12);
    assert_eq!(release["tau_policy"]["policy"], "empirical");

    let public = geodp(&["privatize", "--data", &data, "--eps-p", "0.3", "--eps-v", "0.3", "--seed", "11", "--tau", "0.2", "--chain-length", "300", "--burn-in", "100"]);
    assert!(public.status.success());
    assert!(!String::from_utf8_lossy(&public.stderr).contains("does not satisfy"));
}

#[test]
fn experiment_writes_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let grid = path(dir.path(), "grid.csv");
    let long = path(dir.path(), "long.csv");
    let args = [
        "experiment", "--seed", "1", "--n", "20", "--m", "2", "--eps", "0.2:2:10", "--chain-length", "200", "--burn-in", "50",
        "--out", &grid, "--long-out", &long,
    ];
    let out = geodp(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(&grid).unwrap().lines().count(), 11);
    let long_text = std::fs::read_to_string(&long).unwrap();
    assert_eq!(long_text.lines().next().unwrap(), "eps_p,eps_v,ln_mse,baseline,n,seed");
    assert_eq!(long_text.lines().count(), 11);

    // the thread count never changes results
    let renamed = |name: &str| args.map(|a| if a == grid { path(dir.path(), name) } else { a.to_owned() });
    let single = Command::new(env!("CARGO_BIN_EXE_geodp")).args(renamed("one.csv")).output().unwrap();
    assert!(single.status.success());
    let threaded = Command::new(env!("CARGO_BIN_EXE_geodp"))
        .env("GEODP_THREADS", "1")
        .args(renamed("two.csv"))
        .output()
        .unwrap();
    assert!(threaded.status.success());
    let one = std::fs::read(path(dir.path(), "one.csv")).unwrap();
    assert_eq!(one, std::fs::read(path(dir.path(), "two.csv")).unwrap());
    assert_eq!(one, std::fs::read(&grid).unwrap());
}

#[test]
fn experiment_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = path(dir.path(), "cfg.json");
    let grid = path(dir.path(), "grid.csv");
    std::fs::write(
        &cfg,
        r#"{"generator": {"manifold": "spd", "sigma": 0.01}, "n": 20, "mode": "unequal",
            "eps": {"lo": 0.02, "hi": 2.0, "steps": 3}, "m": 2,
            "chain": {"chain_length": 200, "burn_in": 50}, "tau": {"policy": "public", "tau": 0.1, "tau_m": 0.5}}"#,
    )
    .unwrap();
    let out = geodp(&["experiment", "--config", &cfg, "--seed", "2", "--out", &grid]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&grid).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.lines().nth(1).unwrap().starts_with("spd,unequal,20,2,0.02,2"));

    std::fs::write(&cfg, r#"{"n": 20, "colour": 3}"#).unwrap();
    assert_eq!(geodp(&["experiment", "--config", &cfg, "--seed", "2"]).status.code(), Some(1));
}

#[test]
fn validate_sensitivity_reports_ratios() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = path(dir.path(), "ratios.csv");
    let out = geodp(&["validate-sensitivity", "--n", "20", "--trials", "3", "--noise", "0.001", "--seed", "1", "--out", &out_path]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(&out_path).unwrap().lines().count(), 4);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // usage errors
    assert_eq!(geodp(&["fit"]).status.code(), Some(1));
    assert_eq!(geodp(&["privatize", "--eps-p", "0.3"]).status.code(), Some(1));
    assert_eq!(geodp(&["frobnicate"]).status.code(), Some(1));
    let data = path(dir.path(), "d.json");
    assert!(geodp(&["gen-data", "--n", "20", "--noise", "0.001", "--seed", "1", "--out", &data]).status.success());
    let zero = geodp(&["privatize", "--data", &data, "--eps-p", "0", "--eps-v", "1", "--seed", "1"]);
    assert_eq!(zero.status.code(), Some(1));
    let err = error_json(&zero);
    assert_eq!(err["exit_code"], 1);

    // data errors
    assert_eq!(geodp(&["fit", "--data", &path(dir.path(), "missing.json")]).status.code(), Some(2));
    let bad = path(dir.path(), "bad.csv");
    std::fs::write(&bad, "# manifold=sphere dims=3 n=2\nx,c0,c1,c2\n0,1,0,0\n1,0,1\n").unwrap();
    assert_eq!(geodp(&["fit", "--data", &bad]).status.code(), Some(2));
    let off = path(dir.path(), "off.csv");
    std::fs::write(&off, "# manifold=sphere dims=3 n=2\nx,c0,c1,c2\n0,1,0,0\n1,0,2,0\n").unwrap();
    assert_eq!(geodp(&["fit", "--data", &off]).status.code(), Some(2));

    // numeric failures
    let anti = path(dir.path(), "anti.json");
    std::fs::write(&anti, r#"{"manifold":{"kind":"sphere"},"dims":3,"n":2,"rows":[{"x":0,"y":[1,0,0]},{"x":1,"y":[-1,0,0]}]}"#).unwrap();
    let out = geodp(&["fit", "--data", &anti]);
    assert_eq!(out.status.code(), Some(3));
    let err = error_json(&out);
    assert_eq!(err["error"], "cut_locus");
}

#[test]
fn landmark_ingest() {
    let dir = tempfile::tempdir().unwrap();
    let csv = path(dir.path(), "shapes.csv");
    let mut text = String::from("age,x1,y1,x2,y2,x3,y3,x4,y4\n");
    for i in 0..12 {
        let t = i as f64;
        text.push_str(&format!("{},0,0,{},0,{},1,0,{}\n", 60.0 + t, 1.0 + 0.02 * t, 1.0 - 0.01 * t, 1.0 + 0.03 * t));
    }
    std::fs::write(&csv, text).unwrap();
    let report = ok_json(&["fit", "--landmarks-csv", &csv]);
    assert_eq!(report["model"]["p"]["manifold"]["landmarks"], 4);
    assert!(report["energy"].as_f64().unwrap() < 1e-3);
}
