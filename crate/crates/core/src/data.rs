//! Sparse datasets: loading, writing, splitting, scaling and synthesis.
//!
//! Samples are stored row-major in compressed sparse row layout. Feature
//! indices are 0-based in memory and 1-based on disk.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{KrrError, Result};
use crate::rng::{rng_for, Stream};

/// Borrowed view of one sparse sample.
#[derive(Debug, Clone, Copy)]
pub struct SparseRow<'a> {
    pub indices: &'a [u32],
    pub values: &'a [f64],
}

impl<'a> SparseRow<'a> {
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    /// Sparse-sparse inner product by merging the two sorted index lists.
    pub fn dot(&self, other: &SparseRow<'_>) -> f64 {
        let (mut a, mut b) = (0, 0);
        let mut acc = 0.0;
        while a < self.indices.len() && b < other.indices.len() {
            let (ia, ib) = (self.indices[a], other.indices[b]);
            if ia == ib {
                acc += self.values[a] * other.values[b];
                a += 1;
                b += 1;
            } else if ia < ib {
                a += 1;
            } else {
                b += 1;
            }
        }
        acc
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// Exact squared Euclidean distance to a dense point, summed in feature
    /// order so that identical points give exactly zero.
    pub fn sq_dist_dense(&self, dense: &[f64]) -> f64 {
        let mut acc = 0.0;
        let mut k = 0;
        for (j, &c) in dense.iter().enumerate() {
            let x = if k < self.indices.len() && self.indices[k] as usize == j {
                k += 1;
                self.values[k - 1]
            } else {
                0.0
            };
            let diff = x - c;
            acc += diff * diff;
        }
        acc
    }

    pub fn add_to_dense(&self, dense: &mut [f64]) {
        for (&j, &v) in self.indices.iter().zip(self.values) {
            dense[j as usize] += v;
        }
    }

    pub fn to_dense(&self, d: usize) -> Vec<f64> {
        let mut out = vec![0.0; d];
        self.add_to_dense(&mut out);
        out
    }
}

/// `n` samples of dimension `d` with their regressands.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    d: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
    y: Vec<f64>,
}

impl Dataset {
    /// Builds a dataset from per-sample `(feature, value)` lists. Rows are
    /// sorted by feature; duplicate features and out-of-range indices are
    /// rejected.
    pub fn from_rows(d: usize, rows: Vec<Vec<(usize, f64)>>, y: Vec<f64>) -> Result<Self> {
        if rows.is_empty() {
            return Err(KrrError::Empty("dataset has no samples".into()));
        }
        if d == 0 {
            return Err(KrrError::InvalidArgument("feature dimension must be >= 1".into()));
        }
        if rows.len() != y.len() {
            return Err(KrrError::DimensionMismatch {
                expected: rows.len(),
                found: y.len(),
            });
        }
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for (i, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|&(j, _)| j);
            for w in row.windows(2) {
                if w[0].0 == w[1].0 {
                    return Err(KrrError::InvalidArgument(format!(
                        "sample {i}: duplicate feature index {}",
                        w[0].0
                    )));
                }
            }
            for (j, v) in row {
                if j >= d {
                    return Err(KrrError::InvalidArgument(format!(
                        "sample {i}: feature index {j} out of range for dimension {d}"
                    )));
                }
                indices.push(j as u32);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        Ok(Self {
            d,
            indptr,
            indices,
            values,
            y,
        })
    }

    /// Builds a dataset from dense rows; exact zeros are not stored.
    pub fn from_dense(rows: &[Vec<f64>], y: Vec<f64>) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        let mut sparse = Vec::with_capacity(rows.len());
        for row in rows {
            if row.len() != d {
                return Err(KrrError::DimensionMismatch {
                    expected: d,
                    found: row.len(),
                });
            }
            sparse.push(
                row.iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(j, v)| (j, *v))
                    .collect(),
            );
        }
        Self::from_rows(d, sparse, y)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn row(&self, i: usize) -> SparseRow<'_> {
        let (lo, hi) = (self.indptr[i], self.indptr[i + 1]);
        SparseRow {
            indices: &self.indices[lo..hi],
            values: &self.values[lo..hi],
        }
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = SparseRow<'_>> + '_ {
        (0..self.n()).map(move |i| self.row(i))
    }

    pub fn dense_row(&self, i: usize) -> Vec<f64> {
        self.row(i).to_dense(self.d)
    }

    /// Copies the listed samples, in the listed order.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        let mut indptr = Vec::with_capacity(idx.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        let mut y = Vec::with_capacity(idx.len());
        indptr.push(0);
        for &i in idx {
            let r = self.row(i);
            indices.extend_from_slice(r.indices);
            values.extend_from_slice(r.values);
            indptr.push(indices.len());
            y.push(self.y[i]);
        }
        Dataset {
            d: self.d,
            indptr,
            indices,
            values,
            y,
        }
    }

    /// Same samples viewed in a larger feature space (e.g. a test file whose
    /// highest feature is absent).
    pub fn with_dim(mut self, d: usize) -> Result<Dataset> {
        if d < self.d {
            return Err(KrrError::DimensionMismatch {
                expected: self.d,
                found: d,
            });
        }
        self.d = d;
        Ok(self)
    }
}

/// Reads the sparse text format `<label> <idx>:<val> ...` with 1-based
/// feature indices. Blank lines are skipped.
pub fn load_libsvm(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path)?;
    parse_libsvm(BufReader::new(file), path)
}

pub fn parse_libsvm(reader: impl BufRead, path: &Path) -> Result<Dataset> {
    let err = |line: usize, message: String| KrrError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut rows = Vec::new();
    let mut y = Vec::new();
    let mut d = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_ascii_whitespace();
        let label = tokens.next().unwrap_or_default();
        let label: f64 = label
            .parse()
            .map_err(|_| err(lineno, format!("invalid label {label:?}")))?;
        let mut row = Vec::new();
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| err(lineno, format!("expected index:value, got {tok:?}")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| err(lineno, format!("invalid feature index {idx:?}")))?;
            if idx == 0 {
                return Err(err(lineno, "feature indices are 1-based".into()));
            }
            let val: f64 = val
                .parse()
                .map_err(|_| err(lineno, format!("invalid feature value {val:?}")))?;
            d = d.max(idx);
            row.push((idx - 1, val));
        }
        row.sort_by_key(|&(j, _)| j);
        if row.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(err(lineno, "duplicate feature index".into()));
        }
        rows.push(row);
        y.push(label);
    }
    if rows.is_empty() {
        return Err(KrrError::Empty(format!("{} contains no samples", path.display())));
    }
    if d == 0 {
        return Err(KrrError::Empty(format!("{} contains no features", path.display())));
    }
    Dataset::from_rows(d, rows, y)
}

/// Writes the sparse text format. Values use Rust's shortest round-trip
/// representation, so reloading reproduces every value bit for bit.
pub fn write_libsvm(ds: &Dataset, writer: impl Write) -> Result<()> {
    let mut w = BufWriter::new(writer);
    for (i, row) in ds.rows().enumerate() {
        write!(w, "{:?}", ds.y[i])?;
        for (&j, &v) in row.indices.iter().zip(row.values) {
            write!(w, " {}:{:?}", j + 1, v)?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_libsvm(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    write_libsvm(ds, File::create(path)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub seed: u64,
    pub test_fraction: f64,
}

impl SplitSpec {
    pub fn test_count(&self, n: usize) -> Result<usize> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(KrrError::InvalidArgument(format!(
                "test fraction {} outside (0, 1)",
                self.test_fraction
            )));
        }
        let k = (n as f64 * self.test_fraction).round() as usize;
        if k == 0 || k >= n {
            return Err(KrrError::InvalidArgument(format!(
                "test fraction {} leaves an empty side for n = {n}",
                self.test_fraction
            )));
        }
        Ok(k)
    }
}

/// Seeded permutation of `0..n` used by [`shuffle_split`]: the first
/// `test_count` entries are the test rows, the rest are train rows, each
/// in permutation order.
pub fn split_permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng_for(seed, Stream::Split));
    perm
}

pub fn shuffle_split(ds: &Dataset, spec: SplitSpec) -> Result<(Dataset, Dataset)> {
    let n_test = spec.test_count(ds.n())?;
    let perm = split_permutation(ds.n(), spec.seed);
    let (test_idx, train_idx) = perm.split_at(n_test);
    Ok((ds.subset(train_idx), ds.subset(test_idx)))
}

/// Per-feature z-score parameters fitted on training data.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Population standard deviation; zero marks a constant feature.
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(train: &Dataset) -> Result<Self> {
        let n = train.n();
        if n == 0 {
            return Err(KrrError::Empty("cannot standardize an empty dataset".into()));
        }
        let d = train.dim();
        let mut mean = vec![0.0; d];
        for row in train.rows() {
            row.add_to_dense(&mut mean);
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0; d];
        for row in train.rows() {
            let dense = row.to_dense(d);
            for j in 0..d {
                let dev = dense[j] - mean[j];
                var[j] += dev * dev;
            }
        }
        let std = var.iter().map(|v| (v / n as f64).sqrt()).collect();
        Ok(Self { mean, std })
    }

    pub fn transform(&self, ds: &Dataset) -> Result<Dataset> {
        let d = self.mean.len();
        if ds.dim() > d {
            return Err(KrrError::DimensionMismatch {
                expected: d,
                found: ds.dim(),
            });
        }
        let rows = ds
            .rows()
            .map(|row| {
                row.to_dense(d)
                    .into_iter()
                    .enumerate()
                    .filter_map(|(j, x)| {
                        let z = if self.std[j] > 0.0 {
                            (x - self.mean[j]) / self.std[j]
                        } else {
                            0.0
                        };
                        (z != 0.0).then_some((j, z))
                    })
                    .collect()
            })
            .collect();
        Dataset::from_rows(d, rows, ds.y.clone())
    }
}

/// Z-scores every feature with statistics of `train` only.
pub fn standardize(train: &Dataset, test: &Dataset) -> Result<(Dataset, Dataset, Standardizer)> {
    let stats = Standardizer::fit(train)?;
    Ok((stats.transform(train)?, stats.transform(test)?, stats))
}

/// Synthetic clustered regression data with its generating structure.
#[derive(Debug, Clone)]
pub struct SyntheticClusters {
    pub dataset: Dataset,
    /// Generating cluster of each sample.
    pub labels: Vec<usize>,
    pub centers: Vec<Vec<f64>>,
}

/// Samples around `c` well-separated centers (unit Gaussian spread per
/// feature, centers at least `6·sqrt(d)` apart). Sample `i` belongs to
/// cluster `i mod c` before a seeded shuffle. The regressand is
/// `sin(|x - c_j|) + o_j + s_j·(x - c_j)/sqrt(d)` plus `noise`-scaled
/// Gaussian noise, with per-cluster offset `o_j` and slope `s_j`.
pub fn synth_clustered_labeled(
    n: usize,
    d: usize,
    c: usize,
    noise: f64,
    seed: u64,
) -> Result<SyntheticClusters> {
    if c == 0 || n < c || d == 0 {
        return Err(KrrError::InvalidArgument(format!(
            "synthetic data needs n >= c >= 1 and d >= 1 (n={n}, c={c}, d={d})"
        )));
    }
    if !(noise >= 0.0) {
        return Err(KrrError::InvalidArgument(format!("noise {noise} must be >= 0")));
    }
    let mut rng = rng_for(seed, Stream::Synthetic);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");

    let min_sep = 6.0 * (d as f64).sqrt();
    let mut half_width = min_sep * (c as f64).powf(1.0 / d as f64);
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(c);
    let mut failures = 0;
    while centers.len() < c {
        let cand: Vec<f64> = (0..d).map(|_| rng.gen_range(-half_width..=half_width)).collect();
        let ok = centers.iter().all(|ct| {
            ct.iter().zip(&cand).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() >= min_sep * min_sep
        });
        if ok {
            centers.push(cand);
        } else {
            failures += 1;
            if failures % 100 == 0 {
                half_width *= 1.1;
            }
        }
    }
    let offsets: Vec<f64> = (0..c).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let slopes: Vec<Vec<f64>> = (0..c)
        .map(|_| (0..d).map(|_| 0.5 * std_normal.sample(&mut rng)).collect())
        .collect();

    let mut labels: Vec<usize> = (0..n).map(|i| i % c).collect();
    labels.shuffle(&mut rng);

    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for &j in &labels {
        let ct = &centers[j];
        let x: Vec<f64> = ct.iter().map(|m| m + std_normal.sample(&mut rng)).collect();
        let radius = x.iter().zip(ct).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let affine: f64 = x
            .iter()
            .zip(ct)
            .zip(&slopes[j])
            .map(|((a, b), s)| s * (a - b))
            .sum::<f64>()
            / (d as f64).sqrt();
        let eps = std_normal.sample(&mut rng);
        y.push(radius.sin() + offsets[j] + affine + noise * eps);
        rows.push(x);
    }
    Ok(SyntheticClusters {
        dataset: Dataset::from_dense(&rows, y)?,
        labels,
        centers,
    })
}

pub fn synth_clustered(n: usize, d: usize, c: usize, noise: f64, seed: u64) -> Result<Dataset> {
    Ok(synth_clustered_labeled(n, d, c, noise, seed)?.dataset)
}
