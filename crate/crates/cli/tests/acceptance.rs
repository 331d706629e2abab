//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits nonzero if any hard criterion fails.
//!
//! Benchmark files are read from `$PKRR_DATA_DIR` when set; otherwise the
//! generated stand-ins are used.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use pkrr::benchmarks::{load_benchmark, Benchmark};
use pkrr::clustering::{kbalance, KBalanceParams};
use pkrr::data::{shuffle_split, standardize, synth_clustered, Dataset, SplitSpec};
use pkrr::kernel::KernelSpec;
use pkrr::linalg::{norm2, Matrix};
use pkrr::runtime::{
    theoretical_speedup, weak_scaling_report, CostModel, Runtime, ScalingModel, SpeedupVariant,
};
use pkrr::solver::{cholesky, relative_residual, solve_spd};
use pkrr::strategies::{
    default_lambda_grid, default_sigma_grid, grid_search_family, median_pairwise_distance, partition,
    predict_set, train_partitions, GridConfig, GridResult, StrategyKind,
};
use pkrr_cli::commands::{cmd_run, cmd_weak_scaling, WeakScalingConfig};
use pkrr_cli::config::{DataSource, ExperimentConfig, SigmaGrid, SyntheticSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Pinned tolerances.
const DEGENERATE_ABS_TOL: f64 = 1e-10;
const ORACLE_REL_TOL: f64 = 1e-9;
const RESIDUAL_REL_TOL: f64 = 1e-8;
const SPD_SYSTEMS: usize = 100;
const SPD_MAX_ORDER: usize = 64;
const KBALANCE_MAX_SPREAD: usize = 1;
const SPEEDUP_P64: f64 = 4096.0;
const SPEEDUP_P64_DOUBLED: f64 = 512.0;
const DKRR_EFFICIENCIES: [f64; 4] = [1.0, 0.25, 0.0625, 0.015625];
const MEASURED_WALL_RATIO_MAX: f64 = 1.5;
const FLOP_RATIO_MAX: f64 = 1.1;

// Workload sizes.
const CADATA_TRAIN_CAP: usize = 4096;
const SEEDS: [u64; 3] = [1, 2, 3];
const PS: [usize; 3] = [2, 4, 8];

#[derive(Default)]
struct Report {
    /// `(criterion, line)`, printed in criterion order at the end.
    lines: Vec<(usize, String)>,
    hard_failures: usize,
    /// Largest relative residual seen in any end-to-end grid cell.
    worst_residual: f64,
    cells_checked: usize,
}

impl Report {
    fn line(&mut self, n: usize, pass: bool, detail: String) {
        let verdict = if pass { "PASS" } else { "FAIL" };
        self.lines.push((n, format!("criterion {n}: {verdict} - {detail}")));
        if !pass {
            self.hard_failures += 1;
        }
    }

    fn absorb(&mut self, results: &[GridResult]) {
        for r in results {
            for c in &r.trace {
                self.worst_residual = self.worst_residual.max(c.max_relative_residual);
                self.cells_checked += 1;
            }
        }
    }
}

fn data_dir() -> Option<PathBuf> {
    std::env::var_os("PKRR_DATA_DIR").map(PathBuf::from)
}

/// Train/test for one dataset and seed, standardized with train statistics.
fn dataset(name: &str, seed: u64) -> (Dataset, Dataset) {
    let (mut train, test) = match name {
        "synthetic" => {
            let full = synth_clustered(2500, 6, 6, 0.1, seed).unwrap();
            shuffle_split(&full, SplitSpec { seed, test_fraction: 0.2 }).unwrap()
        }
        b => {
            let b: Benchmark = b.parse().unwrap();
            let data = load_benchmark(b, data_dir().as_deref(), seed).unwrap();
            (data.train, data.test)
        }
    };
    if name == "cadata" && train.n() > CADATA_TRAIN_CAP {
        train = train.subset(&(0..CADATA_TRAIN_CAP).collect::<Vec<_>>());
    }
    let (a, b, _) = standardize(&train, &test).unwrap();
    (a, b)
}

fn reduced_grid(train: &Dataset, seed: u64) -> GridConfig {
    let g = median_pairwise_distance(train, 512, seed);
    GridConfig::new(vec![1e-6, 1e-4, 1e-2], (-2..=2).map(|e| g * 2f64.powi(e)).collect())
}

fn criterion_1(rep: &mut Report, rt: &Runtime) {
    let mut runs = 0;
    let mut violations = Vec::new();
    for name in ["MG", "space-ga", "cadata", "synthetic"] {
        for seed in SEEDS {
            let (train, test) = dataset(name, seed);
            let grid = reduced_grid(&train, seed);
            for p in PS {
                for fam in [[StrategyKind::KK2, StrategyKind::KK3], [StrategyKind::BK2, StrategyKind::BK3]] {
                    let r = grid_search_family(&fam, &train, &test, p, &grid, seed, rt).unwrap();
                    rep.absorb(&r);
                    let (two, three) = (r[0].best.unwrap().mse, r[1].best.unwrap().mse);
                    runs += 1;
                    if !(three <= two) {
                        violations.push(format!("{name} seed={seed} p={p} {}: {three} > {two}", fam[1]));
                    }
                }
            }
        }
    }
    rep.line(
        1,
        violations.is_empty(),
        format!("oracle best MSE <= nearest best MSE in {}/{runs} runs {violations:?}", runs - violations.len()),
    );
}

fn criterion_2(rep: &mut Report, rt: &Runtime) {
    let (train, test) = dataset("MG", 1);
    let g = median_pairwise_distance(&train, 512, 1);
    let mut worst: f64 = 0.0;
    for lambda in [1e-6, 1e-4, 1e-2] {
        for sigma in [g / 2.0, g, 2.0 * g] {
            let spec = KernelSpec::gaussian(sigma);
            let exact = partition(StrategyKind::Exact, &train, 1, 1, KBalanceParams::default()).unwrap();
            let exact = train_partitions(&exact, &train, spec, lambda, rt).unwrap();
            let reference = predict_set(StrategyKind::Exact, &exact.models, &test).unwrap();
            for kind in [StrategyKind::DC, StrategyKind::KK2, StrategyKind::BK2, StrategyKind::KK3, StrategyKind::BK3] {
                let ps = partition(kind, &train, 1, 1, KBalanceParams::default()).unwrap();
                let tp = train_partitions(&ps, &train, spec, lambda, rt).unwrap();
                let pred = predict_set(kind, &tp.models, &test).unwrap();
                for (a, b) in pred.iter().zip(&reference) {
                    worst = worst.max((a - b).abs());
                }
            }
        }
    }
    rep.line(
        2,
        worst <= DEGENERATE_ABS_TOL,
        format!("p=1 max |prediction - exact| = {worst:.3e} (tol {DEGENERATE_ABS_TOL:e}) on MG"),
    );
}

fn gauss_solve(a: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = a.rows();
    let mut m: Vec<Vec<f64>> = (0..n).map(|i| a.row(i).to_vec()).collect();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs())).unwrap();
        m.swap(col, piv);
        rhs.swap(col, piv);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            for c in col..n {
                m[r][c] -= f * m[col][c];
            }
            rhs[r] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| m[i][j] * x[j]).sum();
        x[i] = (rhs[i] - s) / m[i][i];
    }
    x
}

fn criterion_3(rep: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..SPD_SYSTEMS {
        let m = rng.gen_range(1..=SPD_MAX_ORDER);
        let b = Matrix::from_vec(m, m, (0..m * m).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let bbt = b.matmul(&b.transpose());
        let data = (0..m * m)
            .map(|k| bbt.as_slice()[k] + if k / m == k % m { m as f64 } else { 0.0 })
            .collect();
        let a = Matrix::from_vec(m, m, data);
        let y: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = solve_spd(&cholesky(&a).unwrap(), &y).unwrap();
        let oracle = gauss_solve(&a, &y);
        let diff: Vec<f64> = x.iter().zip(&oracle).map(|(p, q)| p - q).collect();
        worst = worst.max(norm2(&diff) / norm2(&oracle));
        worst = worst.max(relative_residual(&a, &x, &y) * ORACLE_REL_TOL / RESIDUAL_REL_TOL);
    }
    let pass = worst <= ORACLE_REL_TOL && rep.worst_residual <= RESIDUAL_REL_TOL && rep.cells_checked > 0;
    rep.line(
        3,
        pass,
        format!(
            "{SPD_SYSTEMS} SPD systems vs elimination: max rel diff {worst:.3e} (tol {ORACLE_REL_TOL:e}); \
             max residual over {} grid cells {:.3e} (tol {RESIDUAL_REL_TOL:e})",
            rep.cells_checked, rep.worst_residual
        ),
    );
}

fn criterion_4(rep: &mut Report) {
    let mut worst_spread = 0;
    let mut tested = 0;
    for (n, k, d, c) in [(100, 3, 2, 2), (1001, 7, 4, 3), (2560, 8, 6, 5), (999, 10, 3, 4), (64, 64, 2, 2)] {
        let ds = synth_clustered(n, d, c, 0.1, 1).unwrap();
        let cl = kbalance(&ds, k, 1, KBalanceParams::default()).unwrap();
        worst_spread = worst_spread.max(cl.sizes.iter().max().unwrap() - cl.sizes.iter().min().unwrap());
        tested += 1;
    }
    let big = synth_clustered(16000, 8, 8, 0.1, 1).unwrap();
    let cl = kbalance(&big, 8, 1, KBalanceParams::default()).unwrap();
    let exact = cl.sizes.iter().all(|&s| s == 2000);
    rep.line(
        4,
        worst_spread <= KBALANCE_MAX_SPREAD && exact,
        format!("max size spread {worst_spread} over {tested} (n,k); n=16000 k=8 sizes {:?}", cl.sizes),
    );
}

fn criterion_5(rep: &mut Report, out: &Path) {
    let s = theoretical_speedup(65536, 64, SpeedupVariant::Bk2VsDkrr).unwrap();
    let s2 = theoretical_speedup(65536, 64, SpeedupVariant::Bk2DoubledVsDkrr).unwrap();
    let cost = CostModel::default();
    let dk: Vec<f64> = weak_scaling_report(&cost, ScalingModel::DistributedExact, 1, 256, 3)
        .unwrap()
        .iter()
        .map(|r| r.efficiency)
        .collect();
    let bk: Vec<f64> = weak_scaling_report(&cost, ScalingModel::Partitioned, 1, 256, 3)
        .unwrap()
        .iter()
        .map(|r| r.efficiency)
        .collect();
    // The same laws through the weak-scaling command.
    let cfg = WeakScalingConfig {
        strategies: vec![StrategyKind::Exact, StrategyKind::BK2],
        ps: vec![1, 2, 4, 8],
        m: 32,
        d: 8,
        noise: 0.1,
        n_test: 32,
        lambda: 1e-4,
        sigma: None,
        seed: 1,
        workers: Some(1),
        out: out.join("c5"),
    };
    let cmd = cmd_weak_scaling(&cfg).unwrap();
    let cmd_dk: Vec<f64> = cmd[0].rows.iter().map(|r| r.efficiency).collect();
    let cmd_bk: Vec<f64> = cmd[1].rows.iter().map(|r| r.efficiency).collect();
    let pass = s == SPEEDUP_P64
        && s2 == SPEEDUP_P64_DOUBLED
        && dk == DKRR_EFFICIENCIES
        && cmd_dk == DKRR_EFFICIENCIES
        && bk.iter().chain(&cmd_bk).all(|e| *e == 1.0);
    rep.line(
        5,
        pass,
        format!("speedup(p=64) = {s}, doubled = {s2}; DKRR efficiencies {dk:?}; BKRR2 {bk:?}"),
    );
}

fn criterion_6(rep: &mut Report, out: &Path) {
    let cfg = WeakScalingConfig {
        strategies: vec![StrategyKind::BK2],
        ps: vec![1, 2, 4, 8],
        m: 256,
        d: 8,
        noise: 0.1,
        n_test: 256,
        lambda: 1e-4,
        sigma: None,
        seed: 1,
        workers: Some(8),
        out: out.join("c6"),
    };
    let o = &cmd_weak_scaling(&cfg).unwrap()[0];
    let flops: Vec<f64> = o.critical_training_flops.iter().map(|f| *f as f64).collect();
    let flop_ratio = flops.iter().cloned().fold(0.0, f64::max) / flops.iter().cloned().fold(f64::INFINITY, f64::min);
    let wall = &o.measured_seconds;
    let wall_ratio = wall.iter().cloned().fold(0.0, f64::max) / wall.iter().cloned().fold(f64::INFINITY, f64::min);
    if wall_ratio > MEASURED_WALL_RATIO_MAX {
        println!(
            "warning: criterion 6 (soft): measured BKRR2 iteration wall-time max/min = {wall_ratio:.3} > \
             {MEASURED_WALL_RATIO_MAX} with {} available cores; times {wall:?}",
            std::thread::available_parallelism().map_or(1, |n| n.get())
        );
    }
    rep.line(
        6,
        flop_ratio <= FLOP_RATIO_MAX,
        format!(
            "BKRR2 m=256 p=1..8 critical-path training flops max/min = {flop_ratio:.4} (tol {FLOP_RATIO_MAX}); \
             measured wall max/min = {wall_ratio:.3} (soft, tol {MEASURED_WALL_RATIO_MAX})"
        ),
    );
}

fn criterion_7(rep: &mut Report, rt: &Runtime) {
    let full = synth_clustered(4096, 8, 8, 0.1, 1).unwrap();
    let (train, test) = shuffle_split(&full, SplitSpec { seed: 1, test_fraction: 0.2 }).unwrap();
    let (train, test, _) = standardize(&train, &test).unwrap();
    let grid = GridConfig::new(default_lambda_grid(), default_sigma_grid(&train, 1));
    let mut best = std::collections::HashMap::new();
    for fam in [vec![StrategyKind::DC], vec![StrategyKind::KK2], vec![StrategyKind::BK3]] {
        let r = grid_search_family(&fam, &train, &test, 8, &grid, 1, rt).unwrap();
        rep.absorb(&r);
        best.insert(fam[0], r[0].best.unwrap().mse);
    }
    let (dc, kk2, bk3) = (best[&StrategyKind::DC], best[&StrategyKind::KK2], best[&StrategyKind::BK3]);
    rep.line(
        7,
        kk2 < dc && bk3 < dc,
        format!("synthetic n=4096 p=8 best MSE: DC-KRR {dc:.4e}, KKRR2 {kk2:.4e}, BKRR3 {bk3:.4e}"),
    );
}

fn criterion_8(rep: &mut Report, out: &Path) {
    let config = |workers: usize, dir: &str| ExperimentConfig {
        source: DataSource::Synthetic(SyntheticSpec { n: 800, d: 4, c: 4, noise: 0.1 }),
        test_fraction: 0.2,
        max_train: None,
        strategies: StrategyKind::ALL.to_vec(),
        p: 4,
        lambdas: vec![1e-5, 1e-3, 1e-1],
        sigmas: SigmaGrid::Auto,
        kernel: KernelSpec::gaussian(1.0),
        seed: 7,
        workers,
        out: out.join(dir),
        standardize: true,
    };
    let runs = [config(1, "r1"), config(1, "r2"), config(4, "r3")];
    for cfg in &runs {
        let o = cmd_run(cfg).unwrap();
        rep.absorb(&o.results);
    }
    let mut compared = 0;
    let mut mismatched = Vec::new();
    let mut names: Vec<_> = fs::read_dir(&runs[0].out).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    for name in names {
        if name == "timings.csv" {
            continue;
        }
        let base = fs::read(runs[0].out.join(&name)).unwrap();
        for other in &runs[1..] {
            compared += 1;
            if fs::read(other.out.join(&name)).ok() != Some(base.clone()) {
                mismatched.push(format!("{name:?} vs {}", other.out.display()));
            }
        }
    }
    rep.line(
        8,
        mismatched.is_empty() && compared > 0,
        format!("{compared} CSV comparisons (reruns and workers 1 vs 4), mismatches {mismatched:?}"),
    );
}

fn main() {
    let start = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let rt = Runtime::new(1).unwrap();
    let mut rep = Report::default();
    match data_dir() {
        Some(d) => println!("benchmark data directory: {}", d.display()),
        None => println!("PKRR_DATA_DIR not set: benchmarks use generated stand-ins"),
    }
    let timed = |n: usize, f: &mut dyn FnMut()| {
        let t = Instant::now();
        f();
        println!("[criterion {n} evaluated in {:.1}s]", t.elapsed().as_secs_f64());
    };
    // End-to-end runs first: criterion 3 checks the residuals they record.
    timed(1, &mut || criterion_1(&mut rep, &rt));
    timed(2, &mut || criterion_2(&mut rep, &rt));
    timed(7, &mut || criterion_7(&mut rep, &rt));
    timed(8, &mut || criterion_8(&mut rep, tmp.path()));
    timed(3, &mut || criterion_3(&mut rep));
    timed(4, &mut || criterion_4(&mut rep));
    timed(5, &mut || criterion_5(&mut rep, tmp.path()));
    timed(6, &mut || criterion_6(&mut rep, tmp.path()));
    rep.lines.sort_by_key(|(n, _)| *n);
    for (_, line) in &rep.lines {
        println!("{line}");
    }
    println!("acceptance finished in {:.1}s", start.elapsed().as_secs_f64());
    if rep.hard_failures > 0 {
        println!("{} hard criteria failed", rep.hard_failures);
        std::process::exit(1);
    }
}
