use std::path::Path;
use std::process::{Command, Output};

use blab_core::io::{sha256_hex, RunManifest};

fn blab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blab")).current_dir(dir).args(args).output().expect("blab runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn baselines_print_n_and_n_squared() {
    let dir = tempfile::tempdir().unwrap();
    let o = blab(dir.path(), &["baselines", "--n", "5"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "5 25");
    assert!(dir.path().join("blab-out/manifest.json").exists());
}

#[test]
fn freq_of_pure_degree_three() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("p.json"), r#"{"d": 3, "r_ref": 1.0, "terms": [[3, 0, 1.0], [3, 4, -0.25]]}"#).unwrap();
    let o = blab(dir.path(), &["freq", "--expansion", "p.json", "--r", "1.0"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).trim(), "3.000000");
    let o = blab(dir.path(), &["doubling", "--expansion", "p.json", "--r", "0.4"]);
    assert_eq!(stdout(&o).trim(), "3.000000");
}

#[test]
fn verify_quick_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = blab(dir.path(), &["verify", "--quick", "--out", "v"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(!stdout(&o).contains("FAIL"));
}

#[test]
fn sweep_is_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &'static str, threads: &'static str| {
        vec!["sweep", "--lambda", "25,100", "--r-grid", "0.01:0.2:5", "--seed", "42", "--threads", threads, "--out", out]
    };
    let a = blab(dir.path(), &args("one", "1"));
    let b = blab(dir.path(), &args("eight", "8"));
    assert!(a.status.success() && b.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let ca = std::fs::read(dir.path().join("one/sweep.csv")).unwrap();
    let cb = std::fs::read(dir.path().join("eight/sweep.csv")).unwrap();
    assert_eq!(ca, cb);
    let m = RunManifest::read(&dir.path().join("one/manifest.json")).unwrap();
    assert_eq!(m.seed, Some(42));
    let entry = m.outputs.iter().find(|o| o.path == "sweep.csv").unwrap();
    assert_eq!(entry.sha256, sha256_hex(&ca));
    assert!(m.stale_outputs(&dir.path().join("one")).unwrap().is_empty());
}

#[test]
fn thread_count_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_blab"))
        .current_dir(dir.path())
        .env("BLAB_THREADS", "0")
        .args(["baselines", "--n", "2"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(blab(dir.path(), &["baselines", "--bogus"]).status.code(), Some(2));
    assert_eq!(blab(dir.path(), &["freq", "--expansion", "missing.json", "--r", "1"]).status.code(), Some(3));
    assert_eq!(blab(dir.path(), &["bernstein", "--manifold", "torus:2", "--lambda", "3", "--r", "0.1"]).status.code(), Some(2));
    std::fs::write(
        dir.path().join("bad.csv"),
        "# domain=torus:2\n# band=wavenumber:1\nx0,x1,value\n0.1,0.2,0.5\n0.3,0.4,NaN\n",
    )
    .unwrap();
    let o = blab(dir.path(), &["ingest-check", "bad.csv"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("row 2") && err.contains("line 5"), "{err}");
}

#[test]
fn ingest_check_reports_interpolated_sup() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("# domain=torus:2\n# band=wavenumber:3\n# provenance=cos(3x)\nx0,x1,value,g0,g1\n");
    let n = 16;
    for i in 0..n {
        for j in 0..n {
            let (x, y) = (i as f64 * std::f64::consts::TAU / n as f64, j as f64 * std::f64::consts::TAU / n as f64);
            csv.push_str(&format!("{x},{y},{},{},0\n", (3.0 * x).cos(), -3.0 * (3.0 * x).sin()));
        }
    }
    std::fs::write(dir.path().join("f.csv"), csv).unwrap();
    let o = blab(dir.path(), &["ingest-check", "f.csv", "--r", "0.5", "--center", "0.2,1.0"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = stdout(&o);
    assert!(s.contains("256 points on torus:2 (with gradients)"), "{s}");
    let sup: f64 = s.lines().find_map(|l| l.strip_prefix("interpolated sup ")).unwrap().parse().unwrap();
    assert!((sup - 1.0).abs() < 1e-6, "{sup}");
}

#[test]
fn eigen_spec_files_drive_bernstein() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("e.json"),
        r#"{"manifold": "torus", "d_or_n": 2, "modes_or_coefficients": {"modes": [{"m": [3, 0], "cos": 0.0, "sin": 1.0}]}}"#,
    )
    .unwrap();
    let o = blab(dir.path(), &["bernstein", "--eigen", "e.json", "--r", "1.5707963267948966"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let ratio: f64 = stdout(&o).split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!((ratio - 3.0).abs() < 1e-6);
}
