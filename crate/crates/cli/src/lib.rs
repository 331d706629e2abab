//! Command-line front end for the partitioned KRR experiments.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use pkrr::runtime::{theoretical_speedup, SpeedupVariant};
use pkrr::KrrError;

use crate::commands::{ClusterMethod, WeakScalingConfig};
use crate::config::{parse_strategies, parse_usize_list, read_config_file, DataSource, ExperimentConfig, KeyValues, SyntheticSpec};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl From<KrrError> for CliError {
    fn from(e: KrrError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "pkrr", version, about = "Partitioned kernel ridge regression experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Grid-search one or more strategies and write CSV reports.
    Run(ExperimentArgs),
    /// Split (and standardize) a dataset and write it in sparse text format.
    Prepare(ExperimentArgs),
    /// Fixed samples per partition while the partition count grows.
    WeakScaling(WeakScalingArgs),
    /// Cluster sizes of K-means against K-balance.
    ClusterStats(ClusterStatsArgs),
    /// Modeled per-machine training speedup of partitioned over exact KRR.
    Speedup {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: usize,
    },
}

#[derive(Debug, Args, Default)]
pub struct ExperimentArgs {
    /// key=value file; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Training data in sparse text format.
    #[arg(long)]
    pub dataset: Option<String>,
    /// Test data; when absent the dataset is split with --test-fraction.
    #[arg(long)]
    pub test_dataset: Option<String>,
    /// mg, space-ga or cadata.
    #[arg(long)]
    pub benchmark: Option<String>,
    /// Directory holding benchmark files.
    #[arg(long)]
    pub data_dir: Option<String>,
    /// Generated data: n,d,c,noise.
    #[arg(long)]
    pub synthetic: Option<String>,
    #[arg(long)]
    pub test_fraction: Option<String>,
    /// Keep only the first N training samples after the split.
    #[arg(long)]
    pub max_train: Option<String>,
    /// Comma-separated strategies, or `all`.
    #[arg(long)]
    pub strategy: Option<String>,
    #[arg(long)]
    pub p: Option<String>,
    #[arg(long)]
    pub lambda_grid: Option<String>,
    /// `auto` or a comma-separated list.
    #[arg(long)]
    pub sigma_grid: Option<String>,
    #[arg(long)]
    pub kernel: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub workers: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long)]
    pub no_standardize: bool,
}

impl ExperimentArgs {
    pub fn to_config(&self) -> Result<ExperimentConfig, CliError> {
        let mut kv = match &self.config {
            Some(path) => read_config_file(path)?,
            None => KeyValues::new(),
        };
        let flags = [
            ("dataset", &self.dataset),
            ("test-dataset", &self.test_dataset),
            ("benchmark", &self.benchmark),
            ("data-dir", &self.data_dir),
            ("synthetic", &self.synthetic),
            ("test-fraction", &self.test_fraction),
            ("max-train", &self.max_train),
            ("strategy", &self.strategy),
            ("p", &self.p),
            ("lambda-grid", &self.lambda_grid),
            ("sigma-grid", &self.sigma_grid),
            ("kernel", &self.kernel),
            ("seed", &self.seed),
            ("workers", &self.workers),
            ("out", &self.out),
        ];
        let sources = ["dataset", "benchmark", "synthetic"];
        if flags.iter().any(|(k, v)| sources.contains(k) && v.is_some()) {
            for s in sources {
                kv.remove(s);
            }
        }
        for (k, v) in flags {
            if let Some(v) = v {
                kv.insert(k.to_string(), v.clone());
            }
        }
        if self.no_standardize {
            kv.insert("standardize".into(), "false".into());
        }
        ExperimentConfig::from_key_values(&kv)
    }
}

#[derive(Debug, Args)]
pub struct WeakScalingArgs {
    #[arg(long, default_value = "BKRR2")]
    pub strategy: String,
    /// Partition counts to sweep.
    #[arg(long, default_value = "1,2,4,8")]
    pub ps: String,
    /// Training samples per partition.
    #[arg(long, default_value_t = 256)]
    pub m: usize,
    #[arg(long, default_value_t = 8)]
    pub d: usize,
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    #[arg(long, default_value_t = 256)]
    pub n_test: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub lambda: f64,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Defaults to the largest p.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, default_value = "pkrr-out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ClusterStatsArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub benchmark: Option<String>,
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    #[arg(long)]
    pub synthetic: Option<String>,
    #[arg(long)]
    pub k: usize,
    /// kmeans, kbalance or both.
    #[arg(long, default_value = "both")]
    pub method: String,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub no_standardize: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn cluster_source(a: &ClusterStatsArgs) -> Result<DataSource, CliError> {
    match (&a.dataset, &a.benchmark, &a.synthetic) {
        (Some(p), None, None) => {
            if !p.is_file() {
                return Err(CliError::Usage(format!("dataset {} does not exist", p.display())));
            }
            Ok(DataSource::File { train: p.clone(), test: None })
        }
        (None, Some(b), None) => Ok(DataSource::Benchmark {
            which: b.parse().map_err(|e: KrrError| CliError::Usage(e.to_string()))?,
            data_dir: a.data_dir.clone(),
        }),
        (None, None, Some(s)) => Ok(DataSource::Synthetic(SyntheticSpec::parse(s)?)),
        _ => Err(CliError::Usage(
            "exactly one of --dataset, --benchmark or --synthetic is required".into(),
        )),
    }
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.to_config()?;
            let outcome = commands::cmd_run(&cfg)?;
            commands::print_summary(&outcome);
            println!("wrote {} artifacts to {}", outcome.artifacts.len(), cfg.out.display());
        }
        Command::Prepare(args) => {
            let cfg = args.to_config()?;
            let (train, test) = commands::cmd_prepare(&cfg)?;
            println!("wrote {} and {}", train.display(), test.display());
        }
        Command::WeakScaling(a) => {
            let cfg = WeakScalingConfig {
                strategies: parse_strategies(&a.strategy)?,
                ps: parse_usize_list("ps", &a.ps)?,
                m: a.m,
                d: a.d,
                noise: a.noise,
                n_test: a.n_test,
                lambda: a.lambda,
                sigma: a.sigma,
                seed: a.seed,
                workers: a.workers,
                out: a.out,
            };
            let outcomes = commands::cmd_weak_scaling(&cfg)?;
            commands::print_weak_scaling(&outcomes);
        }
        Command::ClusterStats(a) => {
            let source = cluster_source(&a)?;
            let methods = match a.method.to_ascii_lowercase().as_str() {
                "kmeans" => vec![ClusterMethod::KMeans],
                "kbalance" => vec![ClusterMethod::KBalance],
                "both" => vec![ClusterMethod::KMeans, ClusterMethod::KBalance],
                other => return Err(CliError::Usage(format!("unknown method {other:?}"))),
            };
            let reports =
                commands::cmd_cluster_stats(&source, a.k, &methods, a.seed, !a.no_standardize, a.out.as_deref())?;
            commands::print_cluster_stats(&reports);
        }
        Command::Speedup { n, p } => {
            let plain = theoretical_speedup(n, p, SpeedupVariant::Bk2VsDkrr)?;
            let doubled = theoretical_speedup(n, p, SpeedupVariant::Bk2DoubledVsDkrr)?;
            println!("n/p per machine:  {plain}x");
            println!("2n/p per machine: {doubled}x");
        }
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code: 0 success, 1 usage error, 2 runtime
/// error.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("pkrr: {e}");
            e.exit_code()
        }
    }
}
