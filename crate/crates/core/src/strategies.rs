//! The eight partitioned KRR strategies and their grid search.
//!
//! | strategy | partitioner | predictor |
//! |----------|-------------|-----------|
//! | DKRR     | whole set   | whole     |
//! | DC-KRR   | random      | average   |
//! | KKRR     | K-means     | average   |
//! | KKRR2    | K-means     | nearest   |
//! | KKRR3    | K-means     | oracle    |
//! | BKRR     | K-balance   | average   |
//! | BKRR2    | K-balance   | nearest   |
//! | BKRR3    | K-balance   | oracle    |
//!
//! DKRR is solved as one exact system; its distributed cost is charged
//! through the cost model.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::{index::sample, SliceRandom};

use crate::clustering::{kbalance, kmeans, nearest_center, KBalanceParams};
use crate::data::{Dataset, SparseRow};
use crate::error::{KrrError, Result};
use crate::kernel::{gram, gram_symmetric, KernelSpec};
use crate::rng::{rng_for, Stream};
use crate::runtime::{
    dkrr_comm, predict_flops, training_flops, CostModel, Counters, Runtime, ScalingModel,
};
use crate::solver::{solve_regularized, KrrModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StrategyKind {
    Exact,
    DC,
    KK,
    KK2,
    KK3,
    BK,
    BK2,
    BK3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Partitioner {
    Whole,
    Random,
    KMeans,
    KBalance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Predictor {
    Whole,
    Average,
    Nearest,
    Oracle,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 8] = [
        StrategyKind::Exact,
        StrategyKind::DC,
        StrategyKind::KK,
        StrategyKind::KK2,
        StrategyKind::KK3,
        StrategyKind::BK,
        StrategyKind::BK2,
        StrategyKind::BK3,
    ];

    pub fn partitioner(self) -> Partitioner {
        match self {
            StrategyKind::Exact => Partitioner::Whole,
            StrategyKind::DC => Partitioner::Random,
            StrategyKind::KK | StrategyKind::KK2 | StrategyKind::KK3 => Partitioner::KMeans,
            StrategyKind::BK | StrategyKind::BK2 | StrategyKind::BK3 => Partitioner::KBalance,
        }
    }

    pub fn predictor(self) -> Predictor {
        match self {
            StrategyKind::Exact => Predictor::Whole,
            StrategyKind::DC | StrategyKind::KK | StrategyKind::BK => Predictor::Average,
            StrategyKind::KK2 | StrategyKind::BK2 => Predictor::Nearest,
            StrategyKind::KK3 | StrategyKind::BK3 => Predictor::Oracle,
        }
    }

    pub fn scaling_model(self) -> ScalingModel {
        match self {
            StrategyKind::Exact => ScalingModel::DistributedExact,
            _ => ScalingModel::Partitioned,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Exact => "DKRR",
            StrategyKind::DC => "DC-KRR",
            StrategyKind::KK => "KKRR",
            StrategyKind::KK2 => "KKRR2",
            StrategyKind::KK3 => "KKRR3",
            StrategyKind::BK => "BKRR",
            StrategyKind::BK2 => "BKRR2",
            StrategyKind::BK3 => "BKRR3",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = KrrError;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        Ok(match key.as_str() {
            "exact" | "dkrr" | "krr" => StrategyKind::Exact,
            "dc" | "dckrr" => StrategyKind::DC,
            "kk" | "kkrr" => StrategyKind::KK,
            "kk2" | "kkrr2" => StrategyKind::KK2,
            "kk3" | "kkrr3" => StrategyKind::KK3,
            "bk" | "bkrr" => StrategyKind::BK,
            "bk2" | "bkrr2" => StrategyKind::BK2,
            "bk3" | "bkrr3" => StrategyKind::BK3,
            _ => return Err(KrrError::InvalidArgument(format!("unknown strategy {s:?}"))),
        })
    }
}

/// Disjoint index sets covering the training samples, one per machine.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionSet {
    pub partitioner: Partitioner,
    pub parts: Vec<Vec<usize>>,
    /// Cluster centers for K-means and K-balance partitions.
    pub centers: Option<Vec<Vec<f64>>>,
}

impl PartitionSet {
    pub fn p(&self) -> usize {
        self.parts.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.parts.iter().map(Vec::len).collect()
    }

    /// Reorders the partitions (and their centers) by `order`.
    pub fn permuted(&self, order: &[usize]) -> PartitionSet {
        PartitionSet {
            partitioner: self.partitioner,
            parts: order.iter().map(|&i| self.parts[i].clone()).collect(),
            centers: self
                .centers
                .as_ref()
                .map(|c| order.iter().map(|&i| c[i].clone()).collect()),
        }
    }
}

/// Splits `train` into `p` parts according to the strategy's partitioner.
/// Random partitions are contiguous blocks of a seeded shuffle with sizes
/// within one of `n/p`; DKRR ignores `p` and keeps one part.
pub fn partition(
    kind: StrategyKind,
    train: &Dataset,
    p: usize,
    seed: u64,
    params: KBalanceParams,
) -> Result<PartitionSet> {
    let n = train.n();
    if p == 0 || p > n {
        return Err(KrrError::InvalidArgument(format!(
            "partition count {p} outside [1, {n}]"
        )));
    }
    let partitioner = kind.partitioner();
    Ok(match partitioner {
        Partitioner::Whole => PartitionSet {
            partitioner,
            parts: vec![(0..n).collect()],
            centers: None,
        },
        Partitioner::Random => {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng_for(seed, Stream::Partition));
            let (base, extra) = (n / p, n % p);
            let mut parts = Vec::with_capacity(p);
            let mut start = 0;
            for t in 0..p {
                let len = base + usize::from(t < extra);
                parts.push(perm[start..start + len].to_vec());
                start += len;
            }
            PartitionSet {
                partitioner,
                parts,
                centers: None,
            }
        }
        Partitioner::KMeans => {
            let c = kmeans(train, p, seed, params.kmeans)?;
            PartitionSet {
                partitioner,
                parts: c.parts(),
                centers: Some(c.centers),
            }
        }
        Partitioner::KBalance => {
            let c = kbalance(train, p, seed, params)?;
            PartitionSet {
                partitioner,
                parts: c.parts(),
                centers: Some(c.centers),
            }
        }
    })
}

#[derive(Debug, Clone)]
pub struct TrainedPartitions {
    pub models: Vec<KrrModel>,
    /// Training counters per partition, in partition order.
    pub counters: Vec<Counters>,
    pub wall_seconds: Vec<f64>,
}

/// Trains one independent model per partition on the runtime's workers.
pub fn train_partitions(
    ps: &PartitionSet,
    train: &Dataset,
    spec: KernelSpec,
    lambda: f64,
    rt: &Runtime,
) -> Result<TrainedPartitions> {
    if let Some(t) = ps.parts.iter().position(Vec::is_empty) {
        return Err(KrrError::Empty("partition has no samples".into()).in_partition(t));
    }
    let tasks: Vec<_> = ps
        .parts
        .iter()
        .enumerate()
        .map(|(t, part)| {
            let center = ps.centers.as_ref().map(|c| c[t].clone());
            move |counters: &mut Counters| {
                let support = train.subset(part);
                let k = gram_symmetric(&spec, &support)?;
                let sol = solve_regularized(&k, support.y(), lambda)?;
                counters.add_flops(training_flops(&spec, support.n(), support.dim()));
                KrrModel::new(support, sol.alpha, spec, lambda, center)
            }
        })
        .collect();
    let (results, stats) = rt.run(tasks);
    let models = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(TrainedPartitions {
        models,
        counters: stats.tasks.iter().map(|t| t.counters).collect(),
        wall_seconds: stats.tasks.iter().map(|t| t.wall_seconds).collect(),
    })
}

fn require_models(models: &[KrrModel]) -> Result<()> {
    if models.is_empty() {
        return Err(KrrError::Empty("no models to predict with".into()));
    }
    Ok(())
}

/// Mean of the per-model predictions.
pub fn predict_average(models: &[KrrModel], x: SparseRow<'_>) -> Result<f64> {
    require_models(models)?;
    let sum: f64 = models.iter().map(|m| m.predict(x)).sum();
    Ok(sum / models.len() as f64)
}

fn model_centers(models: &[KrrModel]) -> Result<Vec<Vec<f64>>> {
    models
        .iter()
        .map(|m| {
            m.center.clone().ok_or_else(|| {
                KrrError::Contract("nearest-center prediction needs clustered partitions".into())
            })
        })
        .collect()
}

/// Prediction of the model whose partition center is closest to `x`.
pub fn predict_nearest(models: &[KrrModel], x: SparseRow<'_>) -> Result<f64> {
    require_models(models)?;
    let centers = model_centers(models)?;
    Ok(models[nearest_center(&centers, x)].predict(x))
}

/// The per-model prediction closest to the true regressand, with the index
/// of the model that made it. Only meaningful when scoring a test set.
pub fn predict_oracle(models: &[KrrModel], x: SparseRow<'_>, y_true: f64) -> Result<(f64, usize)> {
    require_models(models)?;
    let preds: Vec<f64> = models.iter().map(|m| m.predict(x)).collect();
    let id = oracle_choice(&preds, y_true);
    Ok((preds[id], id))
}

fn oracle_choice(preds: &[f64], y_true: f64) -> usize {
    let mut best = 0;
    let mut best_err = f64::INFINITY;
    for (t, &p) in preds.iter().enumerate() {
        let err = (p - y_true) * (p - y_true);
        if err < best_err {
            best = t;
            best_err = err;
        }
    }
    best
}

/// Test-set predictions of a strategy for already trained models.
pub fn predict_set(kind: StrategyKind, models: &[KrrModel], test: &Dataset) -> Result<Vec<f64>> {
    test.rows()
        .zip(test.y())
        .map(|(x, &y)| match kind.predictor() {
            Predictor::Whole | Predictor::Average => predict_average(models, x),
            Predictor::Nearest => predict_nearest(models, x),
            Predictor::Oracle => predict_oracle(models, x, y).map(|(v, _)| v),
        })
        .collect()
}

pub fn mse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(KrrError::DimensionMismatch {
            expected: truth.len(),
            found: pred.len(),
        });
    }
    if pred.is_empty() {
        return Err(KrrError::Empty("mse of zero samples".into()));
    }
    let sum: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(sum / pred.len() as f64)
}

/// `{1e-6, 1e-5, ..., 1e-1}`.
pub fn default_lambda_grid() -> Vec<f64> {
    vec![1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1]
}

/// Median pairwise Euclidean distance over at most `max_samples` samples
/// drawn without replacement by the seeded generator.
pub fn median_pairwise_distance(train: &Dataset, max_samples: usize, seed: u64) -> f64 {
    let n = train.n();
    let idx: Vec<usize> = if n <= max_samples {
        (0..n).collect()
    } else {
        let mut v = sample(&mut rng_for(seed, Stream::SigmaSubsample), n, max_samples).into_vec();
        v.sort_unstable();
        v
    };
    let dense: Vec<Vec<f64>> = idx.iter().map(|&i| train.dense_row(i)).collect();
    let mut dists = Vec::with_capacity(dense.len() * dense.len().saturating_sub(1) / 2);
    for i in 0..dense.len() {
        for j in 0..i {
            let sq: f64 = dense[i].iter().zip(&dense[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            dists.push(sq.sqrt());
        }
    }
    if dists.is_empty() {
        return 1.0;
    }
    dists.sort_by(f64::total_cmp);
    let mid = dists.len() / 2;
    let med = if dists.len() % 2 == 1 {
        dists[mid]
    } else {
        0.5 * (dists[mid - 1] + dists[mid])
    };
    if med > 0.0 {
        med
    } else {
        1.0
    }
}

/// `g · {2⁻⁴, ..., 2⁴}` with `g` the median pairwise distance of a
/// 512-sample subsample.
pub fn default_sigma_grid(train: &Dataset, seed: u64) -> Vec<f64> {
    let g = median_pairwise_distance(train, 512, seed);
    (-4..=4).map(|e| g * 2f64.powi(e)).collect()
}

#[derive(Debug, Clone)]
pub struct GridConfig {
    pub lambdas: Vec<f64>,
    pub sigmas: Vec<f64>,
    /// Kernel family and its non-bandwidth parameters; `sigma` is swept.
    pub kernel: KernelSpec,
    pub cost: CostModel,
    pub clustering: KBalanceParams,
}

impl GridConfig {
    pub fn new(lambdas: Vec<f64>, sigmas: Vec<f64>) -> Self {
        Self {
            lambdas,
            sigmas,
            kernel: KernelSpec::default(),
            cost: CostModel::default(),
            clustering: KBalanceParams::default(),
        }
    }
}

/// Work, traffic and timing of one partition in one grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionCell {
    pub size: usize,
    pub counters: Counters,
    pub modeled_seconds: f64,
    pub measured_seconds: f64,
}

/// One successful `(λ, σ)` iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    /// Index of the cell in `λ`-outer, `σ`-inner grid order.
    pub position: usize,
    pub lambda: f64,
    pub sigma: f64,
    pub mse: f64,
    /// Critical path under the cost model.
    pub modeled_seconds: f64,
    /// Slowest partition's wall time, Gram construction amortized over the
    /// λ values that share it.
    pub measured_seconds: f64,
    pub counters: Counters,
    /// Largest `‖Aα − y‖ / ‖y‖` over the partition solves.
    pub max_relative_residual: f64,
    pub partitions: Vec<PartitionCell>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FailedCell {
    pub position: usize,
    pub lambda: f64,
    pub sigma: f64,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Best {
    pub lambda: f64,
    pub sigma: f64,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub kind: StrategyKind,
    pub p: usize,
    pub partition_sizes: Vec<usize>,
    /// Successful cells in `λ`-outer, `σ`-inner order.
    pub trace: Vec<CellResult>,
    pub failed: Vec<FailedCell>,
    pub best: Option<Best>,
}

pub const GRID_CSV_HEADER: &str = "strategy,p,lambda,sigma,mse,iter_seconds,flops,messages,bytes,failed";

impl GridResult {
    /// One row per grid cell in `λ`-outer, `σ`-inner order. `iter_seconds`
    /// is the modeled critical path, so the file is reproducible; failed
    /// cells leave the measurement columns empty.
    pub fn write_csv(&self, mut w: impl Write, header: bool) -> Result<()> {
        if header {
            writeln!(w, "{GRID_CSV_HEADER}")?;
        }
        let mut ok = self.trace.iter().peekable();
        let mut bad = self.failed.iter().peekable();
        loop {
            let take_ok = match (ok.peek(), bad.peek()) {
                (None, None) => break,
                (Some(_), None) => true,
                (None, Some(_)) => false,
                (Some(a), Some(b)) => a.position < b.position,
            };
            if take_ok {
                let c = ok.next().unwrap();
                writeln!(
                    w,
                    "{},{},{:?},{:?},{:?},{:?},{},{},{},0",
                    self.kind, self.p, c.lambda, c.sigma, c.mse, c.modeled_seconds,
                    c.counters.flops, c.counters.messages, c.counters.bytes
                )?;
            } else {
                let c = bad.next().unwrap();
                writeln!(w, "{},{},{:?},{:?},,,,,,1", self.kind, self.p, c.lambda, c.sigma)?;
            }
        }
        Ok(())
    }

    /// Total modeled seconds across all successful cells.
    pub fn total_modeled_seconds(&self) -> f64 {
        self.trace.iter().map(|c| c.modeled_seconds).sum()
    }

    pub fn total_measured_seconds(&self) -> f64 {
        self.trace.iter().map(|c| c.measured_seconds).sum()
    }
}

/// Per-λ output of one partition for a fixed σ.
struct LambdaOutcome {
    solved: std::result::Result<(Vec<f64>, f64), String>,
    seconds: f64,
    counters: Counters,
}

fn validate_grid(cfg: &GridConfig) -> Result<()> {
    if cfg.lambdas.is_empty() || cfg.sigmas.is_empty() {
        return Err(KrrError::InvalidArgument("lambda and sigma grids must be nonempty".into()));
    }
    if let Some(l) = cfg.lambdas.iter().find(|l| !(**l > 0.0)) {
        return Err(KrrError::InvalidArgument(format!("lambda {l} must be > 0")));
    }
    for s in &cfg.sigmas {
        cfg.kernel.with_sigma(*s).validate()?;
    }
    Ok(())
}

/// Grid search for one strategy.
pub fn grid_search(
    kind: StrategyKind,
    train: &Dataset,
    test: &Dataset,
    p: usize,
    cfg: &GridConfig,
    seed: u64,
    rt: &Runtime,
) -> Result<GridResult> {
    let mut out = grid_search_family(&[kind], train, test, p, cfg, seed, rt)?;
    Ok(out.remove(0))
}

/// Grid search for several strategies that share a partitioner (e.g. KKRR,
/// KKRR2 and KKRR3). The partition is computed once and every cell trains
/// one set of models that all the requested predictors score.
pub fn grid_search_family(
    kinds: &[StrategyKind],
    train: &Dataset,
    test: &Dataset,
    p: usize,
    cfg: &GridConfig,
    seed: u64,
    rt: &Runtime,
) -> Result<Vec<GridResult>> {
    let Some(&first) = kinds.first() else {
        return Ok(Vec::new());
    };
    if kinds.iter().any(|k| k.partitioner() != first.partitioner()) {
        return Err(KrrError::InvalidArgument(
            "strategies in one family must share a partitioner".into(),
        ));
    }
    validate_grid(cfg)?;
    if train.dim() != test.dim() {
        return Err(KrrError::DimensionMismatch {
            expected: train.dim(),
            found: test.dim(),
        });
    }
    let ps = partition(first, train, p, seed, cfg.clustering)?;
    let routes: Option<Vec<usize>> = ps
        .centers
        .as_ref()
        .map(|c| test.rows().map(|x| nearest_center(c, x)).collect());
    if routes.is_none() && kinds.iter().any(|k| k.predictor() == Predictor::Nearest) {
        return Err(KrrError::Contract("nearest-center prediction needs cluster centers".into()));
    }

    let n_l = cfg.lambdas.len();
    let n_s = cfg.sigmas.len();
    let d = train.dim();
    // outcomes[s][t][l]
    let mut outcomes: Vec<Vec<Vec<LambdaOutcome>>> = Vec::with_capacity(n_s);
    for &sigma in &cfg.sigmas {
        let spec = cfg.kernel.with_sigma(sigma);
        let tasks: Vec<_> = ps
            .parts
            .iter()
            .map(|part| {
                let lambdas = &cfg.lambdas;
                move |task_counters: &mut Counters| -> Result<Vec<LambdaOutcome>> {
                    let start = Instant::now();
                    let support = train.subset(part);
                    let k = gram_symmetric(&spec, &support)?;
                    let cross = gram(&spec, test, &support)?;
                    let shared = start.elapsed().as_secs_f64() / lambdas.len() as f64;
                    let m = support.n();
                    let mut per_lambda = Vec::with_capacity(lambdas.len());
                    for &lambda in lambdas {
                        let t0 = Instant::now();
                        let mut c = Counters::default();
                        c.add_flops(training_flops(&spec, m, d));
                        let solved = match solve_regularized(&k, support.y(), lambda) {
                            Ok(sol) => Ok((cross.matvec(&sol.alpha), sol.relative_residual)),
                            Err(e) if e.is_not_positive_definite() => Err(e.to_string()),
                            Err(e) => return Err(e),
                        };
                        task_counters.merge(&c);
                        per_lambda.push(LambdaOutcome {
                            solved,
                            seconds: shared + t0.elapsed().as_secs_f64(),
                            counters: c,
                        });
                    }
                    Ok(per_lambda)
                }
            })
            .collect();
        let (results, _) = rt.run(tasks);
        outcomes.push(results.into_iter().collect::<Result<Vec<_>>>()?);
    }

    let sizes = ps.sizes();
    let k_test = test.n();
    let mut results: Vec<GridResult> = kinds
        .iter()
        .map(|&kind| GridResult {
            kind,
            p: ps.p(),
            partition_sizes: sizes.clone(),
            trace: Vec::new(),
            failed: Vec::new(),
            best: None,
        })
        .collect();
    // Routed test-sample count per partition, for nearest-center flops.
    let routed: Vec<usize> = match &routes {
        Some(r) => {
            let mut cnt = vec![0; ps.p()];
            r.iter().for_each(|&t| cnt[t] += 1);
            cnt
        }
        None => vec![k_test; ps.p()],
    };

    for l in 0..n_l {
        for s in 0..n_s {
            let (lambda, sigma) = (cfg.lambdas[l], cfg.sigmas[s]);
            let cell: Vec<&LambdaOutcome> = outcomes[s].iter().map(|per| &per[l]).collect();
            if let Some(reason) = cell.iter().enumerate().find_map(|(t, o)| {
                o.solved.as_ref().err().map(|e| format!("partition {t}: {e}"))
            }) {
                for r in &mut results {
                    r.failed.push(FailedCell {
                        position: l * n_s + s,
                        lambda,
                        sigma,
                        reason: reason.clone(),
                    });
                }
                continue;
            }
            let preds: Vec<&Vec<f64>> = cell.iter().map(|o| &o.solved.as_ref().unwrap().0).collect();
            let max_res = cell
                .iter()
                .map(|o| o.solved.as_ref().unwrap().1)
                .fold(0.0, f64::max);
            let spec = cfg.kernel.with_sigma(sigma);
            for r in &mut results {
                let predicted = combine(r.kind.predictor(), &preds, routes.as_deref(), test.y());
                let err = mse(&predicted, test.y())?;
                let parts: Vec<PartitionCell> = cell
                    .iter()
                    .enumerate()
                    .map(|(t, o)| {
                        let m = sizes[t];
                        let mut c = o.counters;
                        let mut modeled_counters = c;
                        match r.kind.predictor() {
                            Predictor::Whole => {
                                c.add_flops(predict_flops(&spec, m, d, k_test));
                                let (msgs, per) = dkrr_comm(m, p);
                                c.send(msgs * p as u64, per);
                                modeled_counters = Counters {
                                    flops: c.flops / p as u64,
                                    messages: msgs,
                                    bytes: msgs * per,
                                };
                            }
                            Predictor::Average => {
                                c.add_flops(predict_flops(&spec, m, d, k_test));
                                c.send(1, 8 * k_test as u64);
                            }
                            Predictor::Nearest => {
                                c.add_flops(predict_flops(&spec, m, d, routed[t]));
                                c.send(1, 8);
                            }
                            Predictor::Oracle => {
                                c.add_flops(predict_flops(&spec, m, d, k_test));
                                c.send(k_test as u64, 16);
                            }
                        }
                        if r.kind.predictor() != Predictor::Whole {
                            modeled_counters = c;
                        }
                        PartitionCell {
                            size: m,
                            counters: c,
                            modeled_seconds: cfg.cost.estimate(&modeled_counters),
                            measured_seconds: o.seconds,
                        }
                    })
                    .collect();
                let mut total = Counters::default();
                parts.iter().for_each(|pc| total.merge(&pc.counters));
                r.trace.push(CellResult {
                    position: l * n_s + s,
                    lambda,
                    sigma,
                    mse: err,
                    modeled_seconds: parts.iter().map(|pc| pc.modeled_seconds).fold(0.0, f64::max),
                    measured_seconds: parts.iter().map(|pc| pc.measured_seconds).fold(0.0, f64::max),
                    counters: total,
                    max_relative_residual: max_res,
                    partitions: parts,
                });
            }
        }
    }
    for r in &mut results {
        for c in &r.trace {
            if r.best.map_or(true, |b| c.mse < b.mse) {
                r.best = Some(Best {
                    lambda: c.lambda,
                    sigma: c.sigma,
                    mse: c.mse,
                });
            }
        }
    }
    Ok(results)
}

/// Reduces per-partition test predictions into the strategy's prediction.
fn combine(predictor: Predictor, preds: &[&Vec<f64>], routes: Option<&[usize]>, truth: &[f64]) -> Vec<f64> {
    let p = preds.len();
    (0..truth.len())
        .map(|j| match predictor {
            Predictor::Whole | Predictor::Average => {
                preds.iter().map(|v| v[j]).sum::<f64>() / p as f64
            }
            Predictor::Nearest => preds[routes.expect("routes checked")[j]][j],
            Predictor::Oracle => {
                let column: Vec<f64> = preds.iter().map(|v| v[j]).collect();
                column[oracle_choice(&column, truth[j])]
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Dataset {
        let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64, (i % 3) as f64]).collect();
        let y = (0..8).map(|i| (i as f64).sin()).collect();
        Dataset::from_dense(&rows, y).unwrap()
    }

    #[test]
    fn kind_tables() {
        for k in StrategyKind::ALL {
            assert_eq!(k.name().parse::<StrategyKind>().unwrap(), k);
        }
        assert_eq!("bk2".parse::<StrategyKind>().unwrap(), StrategyKind::BK2);
        assert_eq!("DC-KRR".parse::<StrategyKind>().unwrap(), StrategyKind::DC);
        assert!("xx".parse::<StrategyKind>().is_err());
        assert_eq!(StrategyKind::KK3.partitioner(), Partitioner::KMeans);
        assert_eq!(StrategyKind::BK2.predictor(), Predictor::Nearest);
    }

    #[test]
    fn mse_values() {
        assert_eq!(mse(&[1.0, 3.0], &[1.0, 3.0]).unwrap(), 0.0);
        assert_eq!(mse(&[1.0, 3.0], &[0.0, 0.0]).unwrap(), 5.0);
        assert_eq!(mse(&[2.0], &[5.0]).unwrap(), 9.0);
        assert!(mse(&[1.0], &[1.0, 2.0]).is_err());
        assert!(mse(&[], &[]).is_err());
    }

    #[test]
    fn exact_and_random_partitions() {
        let ds = toy();
        let e = partition(StrategyKind::Exact, &ds, 4, 1, KBalanceParams::default()).unwrap();
        assert_eq!(e.parts, vec![(0..8).collect::<Vec<_>>()]);
        let dc = partition(StrategyKind::DC, &ds, 4, 1, KBalanceParams::default()).unwrap();
        assert_eq!(dc.sizes(), vec![2, 2, 2, 2]);
        let mut all: Vec<usize> = dc.parts.concat();
        all.sort_unstable();
        assert_eq!(all, (0..8).collect::<Vec<_>>());
        assert!(dc.centers.is_none());
        let uneven = partition(StrategyKind::DC, &ds, 3, 1, KBalanceParams::default()).unwrap();
        assert_eq!(uneven.sizes(), vec![3, 3, 2]);
        assert!(partition(StrategyKind::DC, &ds, 9, 1, KBalanceParams::default()).is_err());
        assert!(partition(StrategyKind::DC, &ds, 0, 1, KBalanceParams::default()).is_err());
    }

    #[test]
    fn oracle_picks_closest() {
        assert_eq!(oracle_choice(&[3.0, 5.0], 4.9), 1);
        assert_eq!(oracle_choice(&[3.0, 5.0], 4.0), 0);
        assert_eq!(oracle_choice(&[7.0], -100.0), 0);
    }

    #[test]
    fn nearest_requires_centers() {
        let ds = toy();
        let m = crate::solver::train_krr(&ds, KernelSpec::gaussian(1.0), 0.1).unwrap();
        assert!(matches!(predict_nearest(&[m], ds.row(0)), Err(KrrError::Contract(_))));
        assert!(predict_average(&[], ds.row(0)).is_err());
    }

    #[test]
    fn family_must_share_partitioner() {
        let ds = toy();
        let rt = Runtime::new(1).unwrap();
        let cfg = GridConfig::new(vec![0.1], vec![1.0]);
        assert!(grid_search_family(&[StrategyKind::KK2, StrategyKind::BK2], &ds, &ds, 2, &cfg, 1, &rt).is_err());
        assert!(grid_search(StrategyKind::DC, &ds, &ds, 2, &GridConfig::new(vec![], vec![1.0]), 1, &rt).is_err());
    }

    #[test]
    fn sigma_grid_is_geometric() {
        let ds = toy();
        let g = default_sigma_grid(&ds, 3);
        assert_eq!(g.len(), 9);
        let mid = median_pairwise_distance(&ds, 512, 3);
        assert_eq!(g[4], mid);
        assert_eq!(g[0] * 16.0, mid);
        assert_eq!(default_lambda_grid().len(), 6);
    }
}
