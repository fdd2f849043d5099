use std::path::Path;
use std::process::{Command, Output};

fn packspec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_packspec"))
        .args(args)
        .env_remove("PACKSPEC_THREADS")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid json")
}

fn gen_circle(dir: &Path, n: &str) -> String {
    let path = dir.join("c.json");
    let p = path.to_str().unwrap().to_string();
    let out = packspec(&["gen", "circle", "--L", "6.2831853", "--n", n, "--out", &p]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    p
}

#[test]
fn gen_round_trip_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let path = gen_circle(dir.path(), "128");
    let text = std::fs::read_to_string(&path).unwrap();
    let space = packspec::MetricMeasureSpace::load(Path::new(&path)).unwrap();
    assert_eq!(space.n(), 128);
    let again = space.to_json().unwrap() + "\n";
    assert_eq!(again, text);
    assert!(dir.path().read_dir().unwrap().count() == 1, "temporary file left behind");
}

#[test]
fn pack_circle_quarter() {
    let dir = tempfile::tempdir().unwrap();
    let path = gen_circle(dir.path(), "128");
    let v = json(&packspec(&["pack", "--space", &path, "--k", "3", "--mode", "exact"]));
    let r = v["result"]["radius"].as_f64().unwrap();
    assert!((r - 6.2831853 / 8.0).abs() < 1e-9, "{r}");
    assert_eq!(v["result"]["k_plus_1"], 4);
    assert_eq!(v["result"]["certificate"]["kind"], "exact");
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["config"]["mode"], "exact");
}

#[test]
fn sweep_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let path = gen_circle(dir.path(), "64");
    let args = ["sweep", "--space", &path, "--k", "1", "--p", "8,16,32,64", "--seed", "7"];
    let a = packspec(&args);
    let b = packspec(&[&args[..], &["--threads", "3"]].concat());
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    assert_eq!(v["config"]["seed"], 7);
    let rows = v["result"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    let roots: Vec<f64> = rows.iter().map(|r| r["lambda_bar_root"].as_f64().unwrap()).collect();
    assert!(roots.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn sweep_csv_columns() {
    let out = packspec(&[
        "sweep", "--space", "circle:L=6.2831853,n=32", "--k", "1", "--p", "4,8", "--format", "csv",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "schema_version,p,lambda_bar_root,lambda_under_root,p_times_root,bound_root,target,rel_err"
    );
    assert_eq!(lines.count(), 2);
}

#[test]
fn validation_errors_exit_one() {
    let out = packspec(&["pack", "--space", "circle:L=1,n=8", "--k", "1", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"vertices\": 3, \"edges\": [[0, 1, 1.0]]").unwrap();
    let out = packspec(&["pack", "--space", bad.to_str().unwrap(), "--k", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
    let out = packspec(&["eig", "--space", "circle:L=1,n=8", "--support", "1,2", "--p", "0.5"]);
    assert_eq!(out.status.code(), Some(1));
    let out = packspec(&["pack", "--space", "circle:L=1,n=8", "--k", "20"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn strict_flags_non_convergence() {
    let args = [
        "eig", "--space", "interval:L=1,n=40", "--support", "1,2,3,4,5,6,7,8,9,10", "--p", "8", "--max-iter", "1",
    ];
    let lax = packspec(&args);
    assert_eq!(lax.status.code(), Some(0));
    let strict = packspec(&[&args[..], &["--strict"]].concat());
    assert_eq!(strict.status.code(), Some(2));
    assert_eq!(lax.stdout, strict.stdout);
}

#[test]
fn eig_interval_matches_closed_form() {
    let v = json(&packspec(&[
        "eig", "--space", "interval:L=1,n=101", "--support", &(1..100).map(|i| i.to_string()).collect::<Vec<_>>().join(","),
        "--p", "2",
    ]));
    let lambda = v["result"]["lambda"].as_f64().unwrap();
    let pi2 = std::f64::consts::PI.powi(2);
    assert!((lambda - pi2).abs() / pi2 < 1e-3, "{lambda}");
}

#[test]
fn morrey_constants_and_check() {
    let v = json(&packspec(&["morrey", "--cd", "2", "--cp", "1", "--p", "4"]));
    assert_eq!(v["result"]["s"], 1.0);
    let v = json(&packspec(&[
        "morrey", "check", "--space", "interval:L=1,n=6", "--f", "0,0.2,0.4,0.6,0.8,1", "--p", "4",
    ]));
    assert_eq!(v["result"]["holder"]["pass"], true);
}
