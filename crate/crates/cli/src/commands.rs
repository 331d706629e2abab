use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use pkrr::benchmarks::load_benchmark;
use pkrr::clustering::{kbalance, kmeans, Clustering, KBalanceParams};
use pkrr::data::{load_libsvm, shuffle_split, standardize, synth_clustered, Dataset, SplitSpec, Standardizer};
use pkrr::kernel::KernelSpec;
use pkrr::runtime::{training_flops, weak_scaling_rows, CostModel, Runtime, WeakScalingRow, WeakScalingStep};
use pkrr::strategies::{
    default_sigma_grid, grid_search_family, median_pairwise_distance, GridConfig, GridResult, StrategyKind,
};

use crate::config::{DataSource, ExperimentConfig, SigmaGrid, SyntheticSpec};
use crate::CliError;

pub const WEAK_SCALING_HEADER: &str = "p,n,modeled_seconds,measured_seconds,efficiency";
pub const SUMMARY_HEADER: &str =
    "strategy,p,n_train,n_test,best_lambda,best_sigma,best_mse,cells,failed_cells,modeled_total_seconds";

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", path.display())))
}

fn io(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Train/test data after loading, splitting, truncation and scaling.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub train: Dataset,
    pub test: Dataset,
    pub description: String,
}

pub fn prepare_data(cfg: &ExperimentConfig) -> Result<PreparedData, CliError> {
    let split = SplitSpec {
        seed: cfg.seed,
        test_fraction: cfg.test_fraction,
    };
    let (mut train, test, description) = match &cfg.source {
        DataSource::File { train, test } => {
            let tr = load_libsvm(train)?;
            match test {
                Some(t) => {
                    let te = load_libsvm(t)?;
                    let d = tr.dim().max(te.dim());
                    (tr.with_dim(d)?, te.with_dim(d)?, train.display().to_string())
                }
                None => {
                    let (a, b) = shuffle_split(&tr, split)?;
                    (a, b, train.display().to_string())
                }
            }
        }
        DataSource::Benchmark { which, data_dir } => {
            let data = load_benchmark(*which, data_dir.as_deref(), cfg.seed)?;
            let desc = match &data.source {
                pkrr::benchmarks::Source::File(p) => format!("{which} ({})", p.display()),
                pkrr::benchmarks::Source::StandIn => format!("{which} (generated stand-in)"),
            };
            (data.train, data.test, desc)
        }
        DataSource::Synthetic(SyntheticSpec { n, d, c, noise }) => {
            let full = synth_clustered(*n, *d, *c, *noise, cfg.seed)?;
            let (a, b) = shuffle_split(&full, split)?;
            (a, b, format!("synthetic n={n} d={d} c={c} noise={noise}"))
        }
    };
    if let Some(max) = cfg.max_train {
        if max == 0 {
            return Err(CliError::Usage("max-train must be >= 1".into()));
        }
        if train.n() > max {
            train = train.subset(&(0..max).collect::<Vec<_>>());
        }
    }
    let (train, test) = if cfg.standardize {
        let (a, b, _) = standardize(&train, &test)?;
        (a, b)
    } else {
        (train, test)
    };
    Ok(PreparedData {
        train,
        test,
        description,
    })
}

/// Groups strategies by partitioner, keeping first-appearance order.
fn families(kinds: &[StrategyKind]) -> Vec<Vec<StrategyKind>> {
    let mut out: Vec<Vec<StrategyKind>> = Vec::new();
    for &k in kinds {
        match out.iter_mut().find(|f| f[0].partitioner() == k.partitioner()) {
            Some(f) => f.push(k),
            None => out.push(vec![k]),
        }
    }
    out
}

pub fn grid_config(cfg: &ExperimentConfig, train: &Dataset) -> GridConfig {
    let sigmas = match &cfg.sigmas {
        SigmaGrid::Auto => default_sigma_grid(train, cfg.seed),
        SigmaGrid::List(v) => v.clone(),
    };
    GridConfig {
        kernel: cfg.kernel,
        ..GridConfig::new(cfg.lambdas.clone(), sigmas)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub data: PreparedData,
    pub results: Vec<GridResult>,
    pub artifacts: Vec<PathBuf>,
}

/// Runs the configured grid searches and writes the CSV artifacts into
/// `cfg.out`. Every artifact except `timings.csv` is a deterministic
/// function of the configuration.
pub fn cmd_run(cfg: &ExperimentConfig) -> Result<RunOutcome, CliError> {
    let data = prepare_data(cfg)?;
    if cfg.p > data.train.n() {
        return Err(CliError::Usage(format!(
            "p = {} exceeds the {} training samples",
            cfg.p,
            data.train.n()
        )));
    }
    let grid = grid_config(cfg, &data.train);
    let rt = Runtime::new(cfg.workers)?;
    let mut results = Vec::new();
    for fam in families(&cfg.strategies) {
        results.extend(grid_search_family(&fam, &data.train, &data.test, cfg.p, &grid, cfg.seed, &rt)?);
    }
    results.sort_by_key(|r| cfg.strategies.iter().position(|k| *k == r.kind));

    fs::create_dir_all(&cfg.out).map_err(io)?;
    let mut artifacts = Vec::new();
    for r in &results {
        let path = cfg.out.join(format!("grid_{}.csv", r.kind));
        let mut w = create(&path)?;
        r.write_csv(&mut w, true)?;
        w.flush().map_err(io)?;
        artifacts.push(path);
    }
    artifacts.push(write_summary(&cfg.out, &results, &data)?);
    artifacts.push(write_runstats(&cfg.out, &results)?);
    artifacts.push(write_curves(&cfg.out, &results)?);
    artifacts.push(write_timings(&cfg.out, &results)?);
    Ok(RunOutcome {
        data,
        results,
        artifacts,
    })
}

fn write_summary(out: &Path, results: &[GridResult], data: &PreparedData) -> Result<PathBuf, CliError> {
    let path = out.join("summary.csv");
    let mut w = create(&path)?;
    writeln!(w, "{SUMMARY_HEADER}").map_err(io)?;
    for r in results {
        let (bl, bs, bm) = match r.best {
            Some(b) => (format!("{:?}", b.lambda), format!("{:?}", b.sigma), format!("{:?}", b.mse)),
            None => Default::default(),
        };
        writeln!(
            w,
            "{},{},{},{},{bl},{bs},{bm},{},{},{:?}",
            r.kind,
            r.p,
            data.train.n(),
            data.test.n(),
            r.trace.len() + r.failed.len(),
            r.failed.len(),
            r.total_modeled_seconds()
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)?;
    Ok(path)
}

fn write_runstats(out: &Path, results: &[GridResult]) -> Result<PathBuf, CliError> {
    let path = out.join("runstats.csv");
    let mut w = create(&path)?;
    writeln!(w, "strategy,lambda,sigma,partition,size,flops,messages,bytes,modeled_seconds").map_err(io)?;
    for r in results {
        for c in &r.trace {
            for (t, pc) in c.partitions.iter().enumerate() {
                writeln!(
                    w,
                    "{},{:?},{:?},{t},{},{},{},{},{:?}",
                    r.kind, c.lambda, c.sigma, pc.size, pc.counters.flops, pc.counters.messages,
                    pc.counters.bytes, pc.modeled_seconds
                )
                .map_err(io)?;
            }
        }
    }
    w.flush().map_err(io)?;
    Ok(path)
}

/// Long-format cumulative modeled time against MSE, one row per cell.
fn write_curves(out: &Path, results: &[GridResult]) -> Result<PathBuf, CliError> {
    let path = out.join("curves.csv");
    let mut w = create(&path)?;
    writeln!(w, "strategy,p,cell,lambda,sigma,mse,best_mse_so_far,cumulative_modeled_seconds").map_err(io)?;
    for r in results {
        let mut elapsed = 0.0;
        let mut best = f64::INFINITY;
        for c in &r.trace {
            elapsed += c.modeled_seconds;
            best = best.min(c.mse);
            writeln!(
                w,
                "{},{},{},{:?},{:?},{:?},{:?},{:?}",
                r.kind, r.p, c.position, c.lambda, c.sigma, c.mse, best, elapsed
            )
            .map_err(io)?;
        }
    }
    w.flush().map_err(io)?;
    Ok(path)
}

/// Wall-clock measurements; the only artifact that varies between runs.
fn write_timings(out: &Path, results: &[GridResult]) -> Result<PathBuf, CliError> {
    let path = out.join("timings.csv");
    let mut w = create(&path)?;
    writeln!(w, "strategy,lambda,sigma,partition,measured_seconds").map_err(io)?;
    for r in results {
        for c in &r.trace {
            for (t, pc) in c.partitions.iter().enumerate() {
                writeln!(w, "{},{:?},{:?},{t},{:?}", r.kind, c.lambda, c.sigma, pc.measured_seconds).map_err(io)?;
            }
        }
    }
    w.flush().map_err(io)?;
    Ok(path)
}

pub fn print_summary(outcome: &RunOutcome) {
    println!(
        "data: {} ({} train / {} test, d = {})",
        outcome.data.description,
        outcome.data.train.n(),
        outcome.data.test.n(),
        outcome.data.train.dim()
    );
    println!(
        "{:<8} {:>4} {:>12} {:>12} {:>14} {:>7} {:>14} {:>14}",
        "strategy", "p", "lambda", "sigma", "best_mse", "failed", "modeled_s", "measured_s"
    );
    for r in &outcome.results {
        match r.best {
            Some(b) => println!(
                "{:<8} {:>4} {:>12.3e} {:>12.4} {:>14.6e} {:>7} {:>14.4e} {:>14.4}",
                r.kind.name(),
                r.p,
                b.lambda,
                b.sigma,
                b.mse,
                r.failed.len(),
                r.total_modeled_seconds(),
                r.total_measured_seconds()
            ),
            None => println!("{:<8} {:>4} all cells failed", r.kind.name(), r.p),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeakScalingConfig {
    pub strategies: Vec<StrategyKind>,
    pub ps: Vec<usize>,
    /// Training samples per partition.
    pub m: usize,
    pub d: usize,
    pub noise: f64,
    pub n_test: usize,
    pub lambda: f64,
    /// Gaussian bandwidth; the median pairwise distance when absent.
    pub sigma: Option<f64>,
    pub seed: u64,
    pub workers: Option<usize>,
    pub out: PathBuf,
}

#[derive(Debug, Clone)]
pub struct WeakScalingOutcome {
    pub strategy: StrategyKind,
    pub rows: Vec<WeakScalingRow>,
    pub measured_seconds: Vec<f64>,
    /// Training flops of the largest partition at each step.
    pub critical_training_flops: Vec<u64>,
}

/// Holds `n/p = m` fixed while `p` sweeps `ps`, running one grid cell per
/// step on generated clustered data with `p` clusters.
pub fn cmd_weak_scaling(cfg: &WeakScalingConfig) -> Result<Vec<WeakScalingOutcome>, CliError> {
    if cfg.ps.is_empty() || cfg.ps.contains(&0) || cfg.m == 0 || cfg.n_test == 0 {
        return Err(CliError::Usage("weak scaling needs p >= 1, m >= 1 and a nonempty test set".into()));
    }
    let workers = cfg.workers.unwrap_or_else(|| *cfg.ps.iter().max().unwrap());
    let rt = Runtime::new(workers)?;
    let cost = CostModel::default();
    let mut out: Vec<WeakScalingOutcome> = cfg
        .strategies
        .iter()
        .map(|&s| WeakScalingOutcome {
            strategy: s,
            rows: Vec::new(),
            measured_seconds: Vec::new(),
            critical_training_flops: Vec::new(),
        })
        .collect();
    let mut steps: Vec<Vec<WeakScalingStep>> = vec![Vec::new(); cfg.strategies.len()];
    for &p in &cfg.ps {
        let n = cfg.m * p;
        let full = synth_clustered(n + cfg.n_test, cfg.d, p, cfg.noise, cfg.seed)?;
        let train = full.subset(&(0..n).collect::<Vec<_>>());
        let test = full.subset(&(n..n + cfg.n_test).collect::<Vec<_>>());
        let stats = Standardizer::fit(&train)?;
        let (train, test) = (stats.transform(&train)?, stats.transform(&test)?);
        let sigma = cfg.sigma.unwrap_or_else(|| median_pairwise_distance(&train, 512, cfg.seed));
        let grid = GridConfig::new(vec![cfg.lambda], vec![sigma]);
        for fam in families(&cfg.strategies) {
            for r in grid_search_family(&fam, &train, &test, p, &grid, cfg.seed, &rt)? {
                let i = cfg.strategies.iter().position(|k| *k == r.kind).unwrap();
                let largest = *r.partition_sizes.iter().max().unwrap();
                steps[i].push(WeakScalingStep {
                    p,
                    n,
                    largest_part: largest,
                });
                let cell = r.trace.first();
                out[i].measured_seconds.push(cell.map_or(f64::NAN, |c| c.measured_seconds));
                out[i]
                    .critical_training_flops
                    .push(training_flops(&KernelSpec::gaussian(sigma), largest, cfg.d));
            }
        }
    }
    fs::create_dir_all(&cfg.out).map_err(io)?;
    for (o, st) in out.iter_mut().zip(&steps) {
        o.rows = weak_scaling_rows(&cost, o.strategy.scaling_model(), st);
        let path = cfg.out.join(format!("weak_scaling_{}.csv", o.strategy));
        let mut w = create(&path)?;
        writeln!(w, "{WEAK_SCALING_HEADER}").map_err(io)?;
        for (row, measured) in o.rows.iter().zip(&o.measured_seconds) {
            writeln!(
                w,
                "{},{},{:?},{:?},{:?}",
                row.p, row.n, row.modeled_seconds, measured, row.efficiency
            )
            .map_err(io)?;
        }
        w.flush().map_err(io)?;
    }
    Ok(out)
}

pub fn print_weak_scaling(outcomes: &[WeakScalingOutcome]) {
    for o in outcomes {
        println!("{}", o.strategy);
        println!("{:>6} {:>8} {:>14} {:>14} {:>11} {:>16}", "p", "n", "modeled_s", "measured_s", "efficiency", "critical_flops");
        for ((row, m), f) in o.rows.iter().zip(&o.measured_seconds).zip(&o.critical_training_flops) {
            println!(
                "{:>6} {:>8} {:>14.4e} {:>14.4} {:>11.6} {:>16}",
                row.p, row.n, row.modeled_seconds, m, row.efficiency, f
            );
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClusterMethod {
    KMeans,
    KBalance,
}

impl ClusterMethod {
    pub fn name(self) -> &'static str {
        match self {
            ClusterMethod::KMeans => "kmeans",
            ClusterMethod::KBalance => "kbalance",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClusterReport {
    pub method: ClusterMethod,
    pub clustering: Clustering,
}

impl ClusterReport {
    pub fn max_min_ratio(&self) -> f64 {
        let max = *self.clustering.sizes.iter().max().unwrap_or(&0);
        let min = *self.clustering.sizes.iter().min().unwrap_or(&0);
        max as f64 / min as f64
    }
}

/// Clusters the full dataset (the training file, the benchmark's training
/// split, or every generated sample) with each requested method.
pub fn cmd_cluster_stats(
    source: &DataSource,
    k: usize,
    methods: &[ClusterMethod],
    seed: u64,
    standardize_features: bool,
    out: Option<&Path>,
) -> Result<Vec<ClusterReport>, CliError> {
    let data = match source {
        DataSource::File { train, .. } => load_libsvm(train)?,
        DataSource::Benchmark { which, data_dir } => load_benchmark(*which, data_dir.as_deref(), seed)?.train,
        DataSource::Synthetic(SyntheticSpec { n, d, c, noise }) => synth_clustered(*n, *d, *c, *noise, seed)?,
    };
    let data = if standardize_features {
        Standardizer::fit(&data)?.transform(&data)?
    } else {
        data
    };
    if k == 0 || k > data.n() {
        return Err(CliError::Usage(format!("k = {k} outside [1, {}]", data.n())));
    }
    let params = KBalanceParams::default();
    let mut reports = Vec::new();
    for &method in methods {
        let clustering = match method {
            ClusterMethod::KMeans => kmeans(&data, k, seed, params.kmeans)?,
            ClusterMethod::KBalance => kbalance(&data, k, seed, params)?,
        };
        reports.push(ClusterReport { method, clustering });
    }
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(io)?;
        let mut w = create(&dir.join("cluster_stats.csv"))?;
        writeln!(w, "method,cluster,size").map_err(io)?;
        for r in &reports {
            for (j, s) in r.clustering.sizes.iter().enumerate() {
                writeln!(w, "{},{j},{s}", r.method.name()).map_err(io)?;
            }
            let mut a = create(&dir.join(format!("clustering_{}.txt", r.method.name())))?;
            r.clustering.write_text(&mut a)?;
            a.flush().map_err(io)?;
        }
        w.flush().map_err(io)?;
    }
    Ok(reports)
}

pub fn print_cluster_stats(reports: &[ClusterReport]) {
    for r in reports {
        let sizes: Vec<String> = r.clustering.sizes.iter().map(usize::to_string).collect();
        println!(
            "{:<9} sizes [{}]  max/min = {:.3}",
            r.method.name(),
            sizes.join(", "),
            r.max_min_ratio()
        );
    }
}

/// Writes the prepared (split, optionally standardized) data in the sparse
/// text format as `train.svm` and `test.svm`.
pub fn cmd_prepare(cfg: &ExperimentConfig) -> Result<(PathBuf, PathBuf), CliError> {
    let data = prepare_data(cfg)?;
    fs::create_dir_all(&cfg.out).map_err(io)?;
    let train = cfg.out.join("train.svm");
    let test = cfg.out.join("test.svm");
    pkrr::data::save_libsvm(&data.train, &train)?;
    pkrr::data::save_libsvm(&data.test, &test)?;
    Ok((train, test))
}
