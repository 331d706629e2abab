//! The small public regression benchmarks (MG, space-ga, cadata).
//!
//! When the original sparse-format files are available in a data directory
//! they are loaded and split to the published train/test sizes. Otherwise a
//! generated stand-in with the same sample counts and dimension is used:
//! a Mackey-Glass delay-embedding series for MG and clustered synthetic
//! data for the other two.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;

use crate::data::{load_libsvm, shuffle_split, synth_clustered, Dataset, SplitSpec};
use crate::error::{KrrError, Result};
use crate::rng::{rng_for, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Benchmark {
    Mg,
    SpaceGa,
    Cadata,
}

impl Benchmark {
    pub const ALL: [Benchmark; 3] = [Benchmark::Mg, Benchmark::SpaceGa, Benchmark::Cadata];

    pub fn name(self) -> &'static str {
        match self {
            Benchmark::Mg => "MG",
            Benchmark::SpaceGa => "space-ga",
            Benchmark::Cadata => "cadata",
        }
    }

    pub fn train_size(self) -> usize {
        match self {
            Benchmark::Mg => 1024,
            Benchmark::SpaceGa => 2560,
            Benchmark::Cadata => 18432,
        }
    }

    pub fn test_size(self) -> usize {
        match self {
            Benchmark::Mg => 361,
            Benchmark::SpaceGa => 547,
            Benchmark::Cadata => 2208,
        }
    }

    pub fn dim(self) -> usize {
        match self {
            Benchmark::Mg | Benchmark::SpaceGa => 6,
            Benchmark::Cadata => 8,
        }
    }

    /// File names tried, in order, inside a data directory.
    pub fn file_names(self) -> &'static [&'static str] {
        match self {
            Benchmark::Mg => &["mg", "mg_scale"],
            Benchmark::SpaceGa => &["space_ga", "space_ga_scale"],
            Benchmark::Cadata => &["cadata", "cadata_scale"],
        }
    }

    pub fn split_spec(self, seed: u64) -> SplitSpec {
        let total = self.train_size() + self.test_size();
        SplitSpec {
            seed,
            test_fraction: self.test_size() as f64 / total as f64,
        }
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Benchmark {
    type Err = KrrError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "mg" => Ok(Benchmark::Mg),
            "space-ga" | "spacega" => Ok(Benchmark::SpaceGa),
            "cadata" => Ok(Benchmark::Cadata),
            other => Err(KrrError::InvalidArgument(format!("unknown benchmark {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    File(PathBuf),
    StandIn,
}

#[derive(Debug, Clone)]
pub struct BenchmarkData {
    pub benchmark: Benchmark,
    pub train: Dataset,
    pub test: Dataset,
    pub source: Source,
}

/// Loads a benchmark from `data_dir` when one of its files is present,
/// otherwise generates the stand-in. Either way the result is split with
/// the published train/test proportions using `seed`.
pub fn load_benchmark(b: Benchmark, data_dir: Option<&Path>, seed: u64) -> Result<BenchmarkData> {
    let found = data_dir.and_then(|dir| {
        b.file_names()
            .iter()
            .map(|name| dir.join(name))
            .find(|p| p.is_file())
    });
    let (full, source) = match found {
        Some(path) => {
            let ds = load_libsvm(&path)?;
            let d = ds.dim().max(b.dim());
            (ds.with_dim(d)?, Source::File(path))
        }
        None => (stand_in(b, seed)?, Source::StandIn),
    };
    let (train, test) = shuffle_split(&full, b.split_spec(seed))?;
    Ok(BenchmarkData {
        benchmark: b,
        train,
        test,
        source,
    })
}

/// Generated replacement with the benchmark's sample count and dimension.
pub fn stand_in(b: Benchmark, seed: u64) -> Result<Dataset> {
    let n = b.train_size() + b.test_size();
    match b {
        Benchmark::Mg => mackey_glass_embedding(n, seed),
        Benchmark::SpaceGa => synth_clustered(n, b.dim(), 5, 0.1, seed ^ 0x5ace),
        Benchmark::Cadata => synth_clustered(n, b.dim(), 8, 0.2, seed ^ 0xcada),
    }
}

/// Delay embedding of the Mackey-Glass series
/// `x' = 0.2 x(t-17) / (1 + x(t-17)^10) - 0.1 x(t)`, sampled once per time
/// unit after a 500-unit transient. Features are `x(t), x(t-6), ..., x(t-30)`
/// and the regressand is `x(t+6)`.
pub fn mackey_glass_embedding(n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(KrrError::InvalidArgument("sample count must be >= 1".into()));
    }
    const TAU: usize = 17;
    const STEPS_PER_UNIT: usize = 10;
    const TRANSIENT: usize = 500;
    const LAGS: usize = 6;
    const SPACING: usize = 6;
    const HORIZON: usize = 6;
    let h = 1.0 / STEPS_PER_UNIT as f64;
    let delay = TAU * STEPS_PER_UNIT;
    let units = TRANSIENT + n + (LAGS - 1) * SPACING + HORIZON;
    let total_steps = units * STEPS_PER_UNIT;

    let mut rng = rng_for(seed, Stream::Synthetic);
    let mut x: Vec<f64> = (0..=delay).map(|_| 1.2 + rng.gen_range(-0.05..0.05)).collect();
    x.reserve(total_steps);
    for _ in 0..total_steps {
        let now = x[x.len() - 1];
        let lagged = x[x.len() - 1 - delay];
        let dx = 0.2 * lagged / (1.0 + lagged.powi(10)) - 0.1 * now;
        x.push(now + h * dx);
    }
    let series: Vec<f64> = x[delay..].iter().step_by(STEPS_PER_UNIT).copied().collect();

    let first = TRANSIENT + (LAGS - 1) * SPACING;
    let rows: Vec<Vec<f64>> = (first..first + n)
        .map(|t| (0..LAGS).map(|l| series[t - l * SPACING]).collect())
        .collect();
    let y = (first..first + n).map(|t| series[t + HORIZON]).collect();
    Dataset::from_dense(&rows, y)
}
