use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_torus-pressure"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 7] = [
        &["entropy", "--system", "cat"],
        &["entropy", "--system", "cat", "--seed", "1", "--set", "colour=red"],
        &["entropy", "--system", "torus", "--seed", "1"],
        &["entropy", "--system", "cat", "--seed", "1", "--delta", "-0.1"],
        &["pressure", "--system", "cat", "--seed", "1", "--potential", "cos(x3)"],
        &["gap", "--system", "mane", "--mode", "eigen-oracle", "--seed", "1"],
        &["entropy", "--system", "cat", "--seed", "1", "--n-min", "5", "--n-max", "5"],
    ];
    for args in cases {
        let o = run(dir.path(), args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    assert!(!dir.path().join("error.json").exists());
}

#[test]
fn numerical_failure_exits_with_three_and_writes_error_record() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["glue", "--system", "product", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(3));
    let e = read_json(&dir.path().join("error.json"));
    assert_eq!(e["schema"], "torus-pressure/error");
    assert_eq!(e["command"], "glue");
    assert_eq!(e["error"]["kind"], "NoGoodSegments");
}

#[test]
fn config_file_with_linked_system_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["example-mane", "--strength", "0.15"]);
    assert!(o.status.success());
    let conf = dir.path().join("run.conf");
    fs::write(
        &conf,
        "# pitchfork run\nsystem_config = mane.conf\npotential = 0.5*cos(x1) + 0.2\nseed = 3\nn_min = 2\nn_max = 3\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = run(&out, &["u-pressure", "--config", conf.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = read_json(&out.join("u-pressure.json"));
    assert_eq!(v["schema"], "torus-pressure/u-pressure");
    assert_eq!(v["version"], 1);
    assert_eq!(v["system"], "custom");
    assert_eq!(v["seed"], 3);
    assert_eq!(v["potential"], "0.5*cos(x1) + 0.2");
    assert!(v["system_config"].as_str().unwrap().contains("0.15"));
    assert_eq!(v["estimate"]["n_min"], 2);

    // A command-line key overrides the file.
    let o = run(&out, &["u-pressure", "--config", conf.to_str().unwrap(), "--seed", "8"]);
    assert!(o.status.success());
    assert_eq!(read_json(&out.join("u-pressure.json"))["seed"], 8);
}

#[test]
fn inline_matrix_system() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    fs::write(&conf, "kind = linear\nmatrix = 2 1; 1 1\nseed = 1\n").unwrap();
    let o = run(dir.path(), &["entropy", "--config", conf.to_str().unwrap(), "--mode", "eigen-oracle"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = read_json(&dir.path().join("entropy.json"));
    let value = v["estimate"]["value"].as_f64().unwrap();
    assert!((value - ((3.0 + 5f64.sqrt()) / 2.0).ln()).abs() < 1e-12);

    fs::write(&conf, "kind = linear\nmatrix = 2 1; 1 1\nsystem = cat\nseed = 1\n").unwrap();
    let o = run(dir.path(), &["entropy", "--config", conf.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn per_n_tables_have_fixed_headers() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["gap", "--system", "endomorphism", "--n-min", "3", "--n-max", "5", "--seed", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["gap_unstable_per_n.csv", "gap_stable_per_n.csv"] {
        let text = fs::read_to_string(dir.path().join(name)).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("n,count,logLambda,slope_so_far"));
        let rows: Vec<_> = lines.collect();
        assert_eq!(rows.len(), 3);
        let cols: Vec<&str> = rows[0].split(',').collect();
        assert_eq!(cols[0], "3");
        assert!(cols[2].contains('e'), "float in exponent form: {}", cols[2]);
    }
    let v = read_json(&dir.path().join("gap.json"));
    let g = v["gap"].as_f64().unwrap();
    let u = v["unstable_pressure"].as_f64().unwrap();
    let s = v["stable_pressure"].as_f64().unwrap();
    assert_eq!(g, u - s);
}

#[test]
fn decompose_and_scan_tables() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &["decompose", "--system", "center-linear", "--set", "segments=100", "--set", "r_values=0.01 0.05", "--seed", "1"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("r_scan.csv")).unwrap();
    assert!(text.starts_with("r,fraction_good,bad_pressure,full_pressure,gap\n"));
    assert_eq!(text.lines().count(), 3);

    let o = run(dir.path(), &["scan", "--system", "center-linear", "--mode", "eigen-oracle", "--set", "draws=5", "--seed", "1"]);
    assert!(o.status.success());
    let text = fs::read_to_string(dir.path().join("scan.csv")).unwrap();
    assert!(text.starts_with(
        "draw,strength,matrix_jitter,potential_coord,potential_amplitude,gap,gap_lower,gap_upper,shape_intact,sign_preserved\n"
    ));
    assert_eq!(text.lines().count(), 6);
}

#[test]
fn scale_relation_warning_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &["certify", "--system", "center-linear", "--delta", "1e-3", "--eps", "0.5", "--set", "probes=8", "--seed", "1"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
    let v = read_json(&dir.path().join("certificate.json"));
    assert_eq!(v["warnings"].as_array().unwrap().len(), 1);
    assert_eq!(v["checks"].as_array().unwrap().len(), 5);
    assert!(v["disclaimer"].as_str().unwrap().contains("numerical evidence"));
}

#[test]
fn glue_trace_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["glue", "--system", "center-linear", "--set", "trace=true", "--seed", "5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = read_json(&dir.path().join("glue.json"));
    assert_eq!(v["within_bound"], true);
    let trace = fs::read_to_string(dir.path().join("glue_trace.txt")).unwrap();
    let h = torus_pressure::inverse_limit::OrbitHistory::from_columnar(&trace).unwrap();
    assert!(h.is_consistent(&torus_pressure::systems::bundled::center_linear()));
    let head: Vec<f64> = v["glued_head"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(head, h.head().coords());
}

#[test]
fn thread_count_does_not_change_artifacts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["entropy", "--system", "endomorphism", "--n-min", "2", "--n-max", "4", "--delta", "0.1", "--seed", "6"];
    assert!(run(a.path(), &[&args[..], &["--threads", "1"]].concat()).status.success());
    assert!(run(b.path(), &[&args[..], &["--threads", "3"]].concat()).status.success());
    assert_eq!(fs::read(a.path().join("entropy.json")).unwrap(), fs::read(b.path().join("entropy.json")).unwrap());
    assert_eq!(run(a.path(), &[&args[..], &["--threads", "0"]].concat()).status.code(), Some(2));
}
