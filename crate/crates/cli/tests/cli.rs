use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const M1: &str = r#"{"states":["o"],"m":[1],"Q":[[0]],"beta":[1],"a":[0],"b":[0.5],"jumps":[[]]}"#;
const M2: &str = r#"{"states":["A","B"],"m":[1,1],"Q":[[-1,1],[1,-1]],
"beta":[1,1],"a":[0,0],"b":[1,1],"jumps":[[],[]]}"#;

fn spcrit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spcrit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn field(csv: &str, row: usize, col: &str) -> f64 {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == col).unwrap();
    lines.nth(row).unwrap().split(',').nth(idx).unwrap().parse().unwrap()
}

#[test]
fn spectral_reports_critical_pair() {
    let dir = tempfile::tempdir().unwrap();
    let m2 = write(dir.path(), "m2.json", M2);
    let o = spcrit(&["spectral", m2.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let csv = stdout(&o);
    assert!(field(&csv, 0, "lambda0").abs() < 1e-12);
    assert!((field(&csv, 0, "nu") - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-10);
    assert!((field(&csv, 1, "gamma") - 2.0).abs() < 1e-10);
    // 17 significant digits
    assert!(csv.contains("7.0710678118654757e-1"));
}

#[test]
fn validation_failures_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", &M2.replace("\"m\":[1,1]", "\"m\":[0,1]"));
    let o = spcrit(&["validate", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("m[0]"));

    let garbage = write(dir.path(), "garbage.json", "{not json");
    assert_eq!(spcrit(&["validate", garbage.to_str().unwrap()]).status.code(), Some(2));

    let sup = write(dir.path(), "sup.json", &M2.replace("\"a\":[0,0]", "\"a\":[0.5,0.5]"));
    assert_eq!(spcrit(&["validate", sup.to_str().unwrap()]).status.code(), Some(0));
    assert_eq!(spcrit(&["spectral", sup.to_str().unwrap()]).status.code(), Some(2));

    let m2 = write(dir.path(), "m2.json", M2);
    let o = spcrit(&["moments", m2.to_str().unwrap(), "--f", "1", "--t", "1", "--mu", "1,0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_model_is_a_runtime_error() {
    assert_eq!(spcrit(&["spectral", "/nonexistent/model.json"]).status.code(), Some(1));
}

#[test]
fn validate_warns_without_grey_domination() {
    let dir = tempfile::tempdir().unwrap();
    let m3 = write(
        dir.path(),
        "m3.json",
        r#"{"states":["o"],"m":[1],"Q":[[0]],"beta":[1],"a":[0],"b":[0],"jumps":[[{"y":1,"w":1}]]}"#,
    );
    let o = spcrit(&["validate", m3.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("grey_certified,false"));
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
}

#[test]
fn kolmogorov_yaglom_and_moments() {
    let dir = tempfile::tempdir().unwrap();
    let m1 = write(dir.path(), "m1.json", M1);
    let m1 = m1.to_str().unwrap();
    let out = dir.path().join("k.csv");
    let o = spcrit(&["kolmogorov", m1, "--mu", "1", "--t-grid", "1:100:3", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().count(), 4);
    let s = field(&csv, 2, "survival");
    assert!((s - (1.0 - (-0.02f64).exp())).abs() < 1e-8);

    let o = spcrit(&["yaglom", m1, "--f", "1", "--lambda", "1", "--t", "1000"]);
    let csv = stdout(&o);
    assert!((field(&csv, 0, "value") - 2.0 / 3.0).abs() < 2.0 / 3.0 * 5e-3);

    let m2 = write(dir.path(), "m2.json", M2);
    let o = spcrit(&["moments", m2.to_str().unwrap(), "--f", "1,-1", "--t", "1", "--mu", "1,0"]);
    let csv = stdout(&o);
    let exact = (1.0 - (-4f64).exp()) / 2.0;
    assert!((field(&csv, 0, "variance") - exact).abs() < 1e-8);
}

#[test]
fn vectors_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let m2 = write(dir.path(), "m2.json", M2);
    let mu = write(dir.path(), "mu.csv", "mu\n1\n0\n");
    let o = spcrit(&["moments", m2.to_str().unwrap(), "--f", "1,1", "--t", "2", "--mu", mu.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!((field(&stdout(&o), 0, "mean") - 1.0).abs() < 1e-12);
}

#[test]
fn simulate_output_shape() {
    let dir = tempfile::tempdir().unwrap();
    let m2 = write(dir.path(), "m2.json", M2);
    let m2 = m2.to_str().unwrap();
    let o = spcrit(&["simulate", m2, "--mu", "1,0", "--t", "1", "--paths", "50", "--f", "1,-1"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = stdout(&o);
    assert_eq!(csv.lines().next().unwrap(), "path_id,survived,mass_A,mass_B,V,Z");
    assert_eq!(csv.lines().count(), 51);
    for line in csv.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        let total: f64 = cells[2..4].iter().map(|c| c.parse::<f64>().unwrap()).sum();
        assert_eq!(cells[1] == "1", total > 0.0);
    }
    // dt (|Q| + K) = 0.5 * 3 > 0.2
    let o = spcrit(&["simulate", m2, "--mu", "1,0", "--t", "1", "--dt", "0.5", "--paths", "5", "--f", "1,-1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = spcrit(&["simulate", m2, "--mu", "0,0", "--t", "1", "--paths", "5", "--f", "1,-1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_fast_passes() {
    let dir = tempfile::tempdir().unwrap();
    let m1 = write(dir.path(), "m1.json", M1);
    let o = spcrit(&["verify", m1.to_str().unwrap(), "--fast"]);
    let out = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{out}");
    assert_eq!(out.lines().filter(|l| l.starts_with("[PASS]")).count(), 9);
}
