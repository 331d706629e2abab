use std::fs;
use std::path::Path;
use std::process::Command;

fn pkrr(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_pkrr")).args(args).output().unwrap()
}

fn run_ok(args: &[&str]) -> String {
    let out = pkrr(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn read(p: impl AsRef<Path>) -> String {
    fs::read_to_string(p).unwrap()
}

#[test]
fn run_writes_reports_and_best_matches_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    run_ok(&[
        "run", "--synthetic", "400,3,4,0.1", "--strategy", "DC,BK2,BK3", "--p", "4",
        "--lambda-grid", "1e-4,1e-2", "--sigma-grid", "0.5,1,2", "--out", out.to_str().unwrap(),
    ]);
    for f in ["grid_DC-KRR.csv", "grid_BKRR2.csv", "grid_BKRR3.csv", "summary.csv", "runstats.csv", "curves.csv", "timings.csv"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let grid = read(out.join("grid_BKRR2.csv"));
    let mut lines = grid.lines();
    assert_eq!(lines.next().unwrap(), "strategy,p,lambda,sigma,mse,iter_seconds,flops,messages,bytes,failed");
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), 6);
    let min = rows
        .iter()
        .filter(|r| r[9] == "0")
        .min_by(|a, b| a[4].parse::<f64>().unwrap().total_cmp(&b[4].parse().unwrap()))
        .unwrap();
    let summary = read(out.join("summary.csv"));
    let bk2 = summary.lines().find(|l| l.starts_with("BKRR2,")).unwrap();
    let cols: Vec<&str> = bk2.split(',').collect();
    assert_eq!((cols[4], cols[5], cols[6]), (min[2].as_str(), min[3].as_str(), min[4].as_str()));
    assert_eq!(summary.lines().count(), 4);
}

#[test]
fn reruns_are_byte_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let outs: Vec<_> = ["1", "1", "3"]
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let out = dir.path().join(format!("o{i}"));
            run_ok(&[
                "run", "--synthetic", "300,2,3,0.2", "--strategy", "all", "--p", "3",
                "--lambda-grid", "1e-3,1e-1", "--workers", w, "--seed", "5", "--out", out.to_str().unwrap(),
            ]);
            out
        })
        .collect();
    let mut names: Vec<_> = fs::read_dir(&outs[0]).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 12);
    for name in names {
        if name == "timings.csv" {
            continue;
        }
        for other in &outs[1..] {
            assert_eq!(fs::read(outs[0].join(&name)).unwrap(), fs::read(other.join(&name)).unwrap(), "{name:?}");
        }
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.cfg");
    let out = dir.path().join("o");
    fs::write(
        &cfg,
        format!(
            "# small run\nsynthetic = 200,2,2,0.1\nstrategy = Exact\nlambda_grid = 1e-3\nsigma_grid = 1\nout = {}\n",
            out.display()
        ),
    )
    .unwrap();
    run_ok(&["run", "--config", cfg.to_str().unwrap(), "--strategy", "KK2", "--p", "2"]);
    assert!(out.join("grid_KKRR2.csv").is_file());
    assert!(!out.join("grid_DKRR.csv").exists());
}

#[test]
fn weak_scaling_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    run_ok(&[
        "weak-scaling", "--strategy", "BKRR2,Exact", "--ps", "1,2,4,8", "--m", "32", "--n-test", "32",
        "--out", out,
    ]);
    for (name, want) in [("BKRR2", ["1.0", "1.0", "1.0", "1.0"]), ("DKRR", ["1.0", "0.25", "0.0625", "0.015625"])] {
        let text = read(dir.path().join(format!("weak_scaling_{name}.csv")));
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "p,n,modeled_seconds,measured_seconds,efficiency");
        let eff: Vec<String> = lines.map(|l| l.rsplit(',').next().unwrap().to_string()).collect();
        assert_eq!(eff, want, "{name}");
    }
}

#[test]
fn cluster_stats_reports_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = run_ok(&[
        "cluster-stats", "--synthetic", "1000,3,5,0.1", "--k", "4", "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(stdout.contains("kmeans") && stdout.contains("kbalance"));
    let csv = read(dir.path().join("cluster_stats.csv"));
    let sizes: Vec<usize> = csv
        .lines()
        .filter(|l| l.starts_with("kbalance,"))
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(sizes, vec![250; 4]);
    assert!(dir.path().join("clustering_kmeans.txt").is_file());
}

#[test]
fn prepare_then_run_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let prep = dir.path().join("prep");
    run_ok(&["prepare", "--synthetic", "150,3,2,0.1", "--out", prep.to_str().unwrap()]);
    let out = dir.path().join("o");
    run_ok(&[
        "run", "--dataset", prep.join("train.svm").to_str().unwrap(), "--test-dataset",
        prep.join("test.svm").to_str().unwrap(), "--strategy", "Exact", "--lambda-grid", "1e-2",
        "--sigma-grid", "1", "--no-standardize", "--out", out.to_str().unwrap(),
    ]);
    let summary = read(out.join("summary.csv"));
    assert!(summary.lines().nth(1).unwrap().starts_with("DKRR,1,120,30,"));
}

#[test]
fn speedup_command() {
    let s = run_ok(&["speedup", "--n", "8192", "--p", "64"]);
    assert!(s.contains("4096x") && s.contains("512x"), "{s}");
}

#[test]
fn exit_codes() {
    assert_eq!(pkrr(&[]).status.code(), Some(1));
    assert_eq!(pkrr(&["run", "--bogus"]).status.code(), Some(1));
    assert_eq!(pkrr(&["run"]).status.code(), Some(1));
    assert_eq!(pkrr(&["run", "--dataset", "/no/such/file"]).status.code(), Some(1));
    assert_eq!(pkrr(&["run", "--synthetic", "50,2,2,0.1", "--p", "0"]).status.code(), Some(1));
    assert_eq!(pkrr(&["--help"]).status.code(), Some(0));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.svm");
    fs::write(&bad, "1.0 1:2 oops\n").unwrap();
    let out = pkrr(&["run", "--dataset", bad.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.svm:1:"));

    // Sigmoid systems may be indefinite: failed cells are recorded, the run
    // still succeeds.
    let out = dir.path().join("sig");
    run_ok(&[
        "run", "--synthetic", "120,2,2,0.1", "--strategy", "Exact", "--kernel", "sigmoid",
        "--lambda-grid", "1e-9,1", "--sigma-grid", "1", "--out", out.to_str().unwrap(),
    ]);
    assert!(out.join("grid_DKRR.csv").is_file());
}
