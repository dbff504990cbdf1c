use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fraccd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fraccd")).args(args).output().expect("spawn fraccd")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Trace rows as (t, coord, eta, F), dropping the wall-clock column.
fn trace_rows(path: &Path) -> Vec<(u64, i64, f64, f64)> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,coord,eta,F,elapsed_s"));
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            assert_eq!(f.len(), 5, "{l}");
            (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].parse().unwrap(), f[3].parse().unwrap())
        })
        .collect()
}

#[test]
fn solve_sparse_pcd_writes_monotone_trace_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("pcd.csv");
    let out = fraccd(&[
        "solve", "--problem", "sparse", "--method", "pcd", "--synth", "50,100,10", "--gamma", "0.002", "--k", "10",
        "--max-iters", "20000", "--trace", trace.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("final F:") && text.contains("status:"), "{text}");
    let rows = trace_rows(&trace);
    assert!(rows.len() > 1000);
    for w in rows.windows(2) {
        assert!(w[1].3 <= w[0].3 * (1.0 + 1e-12), "F rose at t={}: {} -> {}", w[1].0, w[0].3, w[1].3);
    }
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("pcd.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["rng_algorithm"], "rand_chacha::ChaCha8Rng/seed_from_u64");
    assert_eq!(manifest["instances"][0]["k"], 10);
    assert_eq!(manifest["configs"][0]["cd"]["theta"], 1e-6);
}

#[test]
fn paper_defaults_apply_when_flags_are_omitted() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("l4.csv");
    let out = fraccd(&[
        "solve", "--problem", "eigl4", "--method", "fcd", "--synth", "20,10", "--max-iters", "50", "--trace",
        trace.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("l4.manifest.json")).unwrap()).unwrap();
    let cfg = &manifest["configs"][0]["cd"];
    assert_eq!(cfg["theta"], 1e-6);
    assert_eq!(cfg["eps"], 1e-10);
    assert_eq!(cfg["window"], 500);
    assert_eq!(cfg["max_time_s"], 100.0);
}

#[test]
fn sparse_bench_defaults_follow_the_paper() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("t1.csv");
    let out = fraccd(&[
        "bench", "--problem", "sparse", "--synth", "20,150,5", "--repeats", "1", "--max-iters", "5", "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(&out_path).unwrap();
    assert_eq!(table.lines().next(), Some("instance,DPA,PGSA,QTPA,PCD"));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("t1.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["instances"][0]["k"], 100);
    assert_eq!(manifest["instances"][0]["gamma"], 0.1 / 20.0);
}

#[test]
fn unknown_method_exits_2() {
    let out = fraccd(&["solve", "--problem", "sparse", "--method", "newton", "--synth", "5,5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_configuration_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("x.csv");
    let t = trace.to_str().unwrap();
    for extra in [
        &["--method", "pcd", "--theta", "0"][..],
        &["--method", "fcd"][..],
        &["--method", "pcd", "--k", "99"][..],
    ] {
        let mut args = vec!["solve", "--problem", "sparse", "--synth", "5,8", "--trace", t];
        args.extend_from_slice(extra);
        let out = fraccd(&args);
        assert_eq!(out.status.code(), Some(2), "{extra:?}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    }
    let missing = fraccd(&["solve", "--problem", "eigl4", "--method", "fcd", "--input", "/nonexistent.svm", "--trace", t]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn bench_counts_runs_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out_path = dir.path().join(name);
        let out = fraccd(&[
            "bench", "--problem", "eigl4", "--synth", "30,20", "--synth", "25,15", "--methods", "power,fcd", "--repeats",
            "3", "--seed", "7", "--max-iters", "400", "--jobs", "3", "--out", out_path.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(stdout(&out).contains("12 runs"), "{}", stdout(&out));
        fs::read_to_string(&out_path).unwrap()
    };
    let a = run("a.csv");
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0], "instance,Power Method,FCD");
    for row in &lines[1..] {
        let cells: Vec<&str> = row.split(',').collect();
        assert_eq!(cells.len(), 3);
        assert!(cells[1..].iter().all(|c| c.contains(" ± ")), "{row}");
    }
    assert_eq!(a, run("b.csv"));
    let long = fs::read_to_string(dir.path().join("a.long.csv")).unwrap();
    assert_eq!(long.lines().next(), Some("instance,method,mean,std"));
    assert_eq!(long.lines().count(), 1 + 4);
    assert!(dir.path().join("a.manifest.json").exists());
}

#[test]
fn rerun_from_manifest_reproduces_the_trace() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first.csv");
    let second = dir.path().join("second.csv");
    let out = fraccd(&[
        "solve", "--problem", "sparse", "--method", "pcd", "--synth", "30,60,5", "--k", "5", "--rule", "random",
        "--seed", "3", "--max-iters", "3000", "--trace", first.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = dir.path().join("first.manifest.json");
    let out = fraccd(&["rerun", manifest.to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (a, b) = (trace_rows(&first), trace_rows(&second));
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!((x.0, x.1), (y.0, y.1));
        assert_eq!(x.2.to_bits(), y.2.to_bits());
        assert_eq!(x.3.to_bits(), y.3.to_bits());
    }
}

#[test]
fn rerun_rejects_a_foreign_rng() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("r.csv");
    let out = fraccd(&[
        "solve", "--problem", "eigl4", "--method", "pgsa", "--synth", "10,5", "--max-iters", "10", "--trace",
        trace.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let path = dir.path().join("r.manifest.json");
    let text = fs::read_to_string(&path).unwrap().replace("ChaCha8Rng", "Pcg64");
    fs::write(&path, text).unwrap();
    assert_eq!(fraccd(&["rerun", path.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn verify_module_filter() {
    let out = fraccd(&["verify", "--only", "data"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let text = stdout(&out);
    assert!(text.lines().filter(|l| l.starts_with("PASS data/")).count() >= 1, "{text}");
    assert!(!text.contains("FAIL"));
    assert_eq!(fraccd(&["verify", "--only", "nosuch"]).status.code(), Some(2));
}
