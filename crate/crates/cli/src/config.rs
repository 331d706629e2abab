//! Experiment configuration: a flat `key = value` file overlaid by flags.
//!
//! Recognised keys match the long flag names: `dataset`, `test-dataset`,
//! `benchmark`, `data-dir`, `synthetic`, `test-fraction`, `max-train`,
//! `strategy`, `p`, `lambda-grid`, `sigma-grid`, `kernel`, `seed`,
//! `workers`, `out`, `standardize`. Blank lines and `#` comments are
//! ignored.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use pkrr::benchmarks::Benchmark;
use pkrr::kernel::{KernelKind, KernelSpec};
use pkrr::strategies::StrategyKind;

use crate::CliError;

pub type KeyValues = BTreeMap<String, String>;

pub const KNOWN_KEYS: &[&str] = &[
    "dataset",
    "test-dataset",
    "benchmark",
    "data-dir",
    "synthetic",
    "test-fraction",
    "max-train",
    "strategy",
    "p",
    "lambda-grid",
    "sigma-grid",
    "kernel",
    "seed",
    "workers",
    "out",
    "standardize",
];

pub fn parse_config_text(text: &str) -> Result<KeyValues, CliError> {
    let mut out = KeyValues::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key=value", i + 1)))?;
        let key = k.trim().trim_start_matches("--").replace('_', "-");
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(CliError::Usage(format!("config line {}: unknown key {key:?}", i + 1)));
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

pub fn read_config_file(path: &Path) -> Result<KeyValues, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    parse_config_text(&text)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    pub c: usize,
    pub noise: f64,
}

impl SyntheticSpec {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let bad = || CliError::Usage(format!("--synthetic expects n,d,c,noise, got {s:?}"));
        if parts.len() != 4 {
            return Err(bad());
        }
        Ok(Self {
            n: parts[0].parse().map_err(|_| bad())?,
            d: parts[1].parse().map_err(|_| bad())?,
            c: parts[2].parse().map_err(|_| bad())?,
            noise: parts[3].parse().map_err(|_| bad())?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    File { train: PathBuf, test: Option<PathBuf> },
    Benchmark { which: Benchmark, data_dir: Option<PathBuf> },
    Synthetic(SyntheticSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SigmaGrid {
    /// Median pairwise distance times `2^-4 .. 2^4`.
    Auto,
    List(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub source: DataSource,
    pub test_fraction: f64,
    pub max_train: Option<usize>,
    pub strategies: Vec<StrategyKind>,
    pub p: usize,
    pub lambdas: Vec<f64>,
    pub sigmas: SigmaGrid,
    pub kernel: KernelSpec,
    pub seed: u64,
    pub workers: usize,
    pub out: PathBuf,
    pub standardize: bool,
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("{key}: cannot parse {v:?}")))
}

pub fn parse_list(key: &str, v: &str) -> Result<Vec<f64>, CliError> {
    let list: Vec<f64> = v
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_num(key, s))
        .collect::<Result<_, _>>()?;
    if list.is_empty() {
        return Err(CliError::Usage(format!("{key}: grid must be nonempty")));
    }
    Ok(list)
}

pub fn parse_usize_list(key: &str, v: &str) -> Result<Vec<usize>, CliError> {
    let list: Vec<usize> = v
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_num(key, s))
        .collect::<Result<_, _>>()?;
    if list.is_empty() {
        return Err(CliError::Usage(format!("{key}: list must be nonempty")));
    }
    Ok(list)
}

pub fn parse_strategies(v: &str) -> Result<Vec<StrategyKind>, CliError> {
    let mut out = Vec::new();
    for s in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if s.eq_ignore_ascii_case("all") {
            out.extend(StrategyKind::ALL);
            continue;
        }
        let k: StrategyKind = s.parse().map_err(|e| CliError::Usage(format!("{e}")))?;
        if !out.contains(&k) {
            out.push(k);
        }
    }
    if out.is_empty() {
        return Err(CliError::Usage("strategy list is empty".into()));
    }
    Ok(out)
}

fn parse_bool(key: &str, v: &str) -> Result<bool, CliError> {
    match v.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(CliError::Usage(format!("{key}: expected a boolean, got {v:?}"))),
    }
}

impl ExperimentConfig {
    /// Builds and validates a configuration from merged key/value pairs.
    pub fn from_key_values(kv: &KeyValues) -> Result<Self, CliError> {
        let get = |k: &str| kv.get(k).map(String::as_str);
        let sources = ["dataset", "benchmark", "synthetic"]
            .iter()
            .filter(|k| get(k).is_some())
            .count();
        if sources != 1 {
            return Err(CliError::Usage(
                "exactly one of --dataset, --benchmark or --synthetic is required".into(),
            ));
        }
        let source = if let Some(path) = get("dataset") {
            let train = PathBuf::from(path);
            if !train.is_file() {
                return Err(CliError::Usage(format!("dataset {} does not exist", train.display())));
            }
            let test = get("test-dataset").map(PathBuf::from);
            if let Some(t) = &test {
                if !t.is_file() {
                    return Err(CliError::Usage(format!("test dataset {} does not exist", t.display())));
                }
            }
            DataSource::File { train, test }
        } else if let Some(name) = get("benchmark") {
            let which: Benchmark = name.parse().map_err(|e| CliError::Usage(format!("{e}")))?;
            DataSource::Benchmark {
                which,
                data_dir: get("data-dir").map(PathBuf::from),
            }
        } else {
            DataSource::Synthetic(SyntheticSpec::parse(get("synthetic").unwrap())?)
        };
        let p: usize = get("p").map_or(Ok(1), |v| parse_num("p", v))?;
        if p == 0 {
            return Err(CliError::Usage("p must be >= 1".into()));
        }
        let workers: usize = get("workers").map_or(Ok(1), |v| parse_num("workers", v))?;
        if workers == 0 {
            return Err(CliError::Usage("workers must be >= 1".into()));
        }
        let test_fraction: f64 = get("test-fraction").map_or(Ok(0.2), |v| parse_num("test-fraction", v))?;
        if !(test_fraction > 0.0 && test_fraction < 1.0) {
            return Err(CliError::Usage("test-fraction must be in (0, 1)".into()));
        }
        let sigmas = match get("sigma-grid") {
            None => SigmaGrid::Auto,
            Some(v) if v.trim().eq_ignore_ascii_case("auto") => SigmaGrid::Auto,
            Some(v) => SigmaGrid::List(parse_list("sigma-grid", v)?),
        };
        let lambdas = match get("lambda-grid") {
            None => pkrr::strategies::default_lambda_grid(),
            Some(v) => parse_list("lambda-grid", v)?,
        };
        let kind: KernelKind = get("kernel")
            .unwrap_or("gaussian")
            .parse()
            .map_err(|e| CliError::Usage(format!("{e}")))?;
        let kernel = match kind {
            KernelKind::Gaussian => KernelSpec::gaussian(1.0),
            KernelKind::Linear => KernelSpec::linear(),
            KernelKind::Polynomial => KernelSpec::polynomial(1.0, 1.0, 2),
            KernelKind::Sigmoid => KernelSpec::sigmoid(1.0, 0.0),
        };
        Ok(Self {
            source,
            test_fraction,
            max_train: get("max-train").map(|v| parse_num("max-train", v)).transpose()?,
            strategies: parse_strategies(get("strategy").unwrap_or("all"))?,
            p,
            lambdas,
            sigmas,
            kernel,
            seed: get("seed").map_or(Ok(1), |v| parse_num("seed", v))?,
            workers,
            out: PathBuf::from(get("out").unwrap_or("pkrr-out")),
            standardize: get("standardize").map_or(Ok(true), |v| parse_bool("standardize", v))?,
        })
    }
}
