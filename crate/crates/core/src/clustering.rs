//! K-means and K-balance partitioning.
//!
//! K-balance starts from a K-means solution and then reassigns every sample,
//! in row order, to its nearest center that still has room. With `n = q·k + r`
//! at most `r` clusters may grow to `q + 1` samples and every other cluster
//! stops at `q`, so the final sizes are all `⌊n/k⌋` or `⌈n/k⌉`.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rand::seq::index::sample;

use crate::data::{Dataset, SparseRow};
use crate::error::{KrrError, Result};
use crate::rng::{rng_for, Stream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansParams {
    /// Stop once the fraction of samples that changed cluster in an
    /// iteration is at most this value.
    pub threshold: f64,
    pub max_iters: usize,
}

impl Default for KMeansParams {
    fn default() -> Self {
        Self {
            threshold: 0.01,
            max_iters: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub centers: Vec<Vec<f64>>,
    pub membership: Vec<usize>,
    pub sizes: Vec<usize>,
}

impl Clustering {
    pub fn k(&self) -> usize {
        self.centers.len()
    }

    pub fn dim(&self) -> usize {
        self.centers.first().map_or(0, Vec::len)
    }

    pub fn n(&self) -> usize {
        self.membership.len()
    }

    /// Sample indices of each cluster, ascending.
    pub fn parts(&self) -> Vec<Vec<usize>> {
        let mut parts = vec![Vec::new(); self.k()];
        for (i, &c) in self.membership.iter().enumerate() {
            parts[c].push(i);
        }
        parts
    }

    /// Text form: a `k d n` header, `k` center rows, then `n` membership
    /// indices, one per line.
    pub fn write_text(&self, mut w: impl Write) -> Result<()> {
        let mut out = String::new();
        writeln!(out, "{} {} {}", self.k(), self.dim(), self.n()).unwrap();
        for c in &self.centers {
            let row: Vec<String> = c.iter().map(|v| format!("{v:?}")).collect();
            writeln!(out, "{}", row.join(" ")).unwrap();
        }
        for m in &self.membership {
            writeln!(out, "{m}").unwrap();
        }
        w.write_all(out.as_bytes())?;
        Ok(())
    }

    pub fn read_text(r: impl BufRead) -> Result<Self> {
        let bad = |msg: String| KrrError::InvalidArgument(format!("clustering artifact: {msg}"));
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| bad("missing header".into()))??;
        let dims: Vec<usize> = header
            .split_ascii_whitespace()
            .map(|t| t.parse().map_err(|_| bad(format!("bad header {header:?}"))))
            .collect::<Result<_>>()?;
        let [k, d, n] = dims[..] else {
            return Err(bad(format!("bad header {header:?}")));
        };
        let mut centers = Vec::with_capacity(k);
        for _ in 0..k {
            let line = lines.next().ok_or_else(|| bad("missing center row".into()))??;
            let row: Vec<f64> = line
                .split_ascii_whitespace()
                .map(|t| t.parse().map_err(|_| bad(format!("bad center value {t:?}"))))
                .collect::<Result<_>>()?;
            if row.len() != d {
                return Err(bad(format!("center row has {} values, expected {d}", row.len())));
            }
            centers.push(row);
        }
        let mut membership = Vec::with_capacity(n);
        let mut sizes = vec![0; k];
        for _ in 0..n {
            let line = lines.next().ok_or_else(|| bad("missing membership row".into()))??;
            let c: usize = line.trim().parse().map_err(|_| bad(format!("bad membership {line:?}")))?;
            if c >= k {
                return Err(bad(format!("membership {c} out of range")));
            }
            sizes[c] += 1;
            membership.push(c);
        }
        Ok(Self {
            centers,
            membership,
            sizes,
        })
    }
}

/// Index of the nearest center; ties go to the lowest index.
pub fn nearest_center(centers: &[Vec<f64>], x: SparseRow<'_>) -> usize {
    nearest_center_with_distance(centers, x).0
}

fn nearest_center_with_distance(centers: &[Vec<f64>], x: SparseRow<'_>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centers.iter().enumerate() {
        let dist = x.sq_dist_dense(c);
        if dist < best.1 {
            best = (j, dist);
        }
    }
    best
}

fn check_k(x: &Dataset, k: usize) -> Result<()> {
    if k == 0 || k > x.n() {
        return Err(KrrError::InvalidArgument(format!(
            "cluster count {k} outside [1, {}]",
            x.n()
        )));
    }
    Ok(())
}

/// Means of the samples assigned to each cluster, summed in row order.
fn recompute_centers(x: &Dataset, membership: &[usize], sizes: &[usize]) -> Vec<Vec<f64>> {
    let mut centers = vec![vec![0.0; x.dim()]; sizes.len()];
    for (row, &c) in x.rows().zip(membership) {
        row.add_to_dense(&mut centers[c]);
    }
    for (c, &s) in centers.iter_mut().zip(sizes) {
        if s > 0 {
            c.iter_mut().for_each(|v| *v /= s as f64);
        }
    }
    centers
}

pub fn within_cluster_ss(x: &Dataset, c: &Clustering) -> f64 {
    x.rows()
        .zip(&c.membership)
        .map(|(row, &j)| row.sq_dist_dense(&c.centers[j]))
        .sum()
}

/// K-means run together with the within-cluster sum of squares recorded
/// after every assignment and every center update.
#[derive(Debug, Clone)]
pub struct KMeansRun {
    pub clustering: Clustering,
    pub iterations: usize,
    pub wcss_history: Vec<f64>,
}

/// Lloyd's algorithm seeded with `k` distinct samples.
///
/// All samples start in cluster 0, so with `k = 1` the first iteration
/// changes nothing and the run stops with the global mean. A cluster left
/// empty by an assignment step takes over the sample farthest from its own
/// center.
pub fn kmeans_traced(x: &Dataset, k: usize, seed: u64, params: KMeansParams) -> Result<KMeansRun> {
    check_k(x, k)?;
    let n = x.n();
    let mut rng = rng_for(seed, Stream::KMeansInit);
    let mut centers: Vec<Vec<f64>> = sample(&mut rng, n, k)
        .into_iter()
        .map(|i| x.dense_row(i))
        .collect();
    let mut membership = vec![0usize; n];
    let mut dist = vec![0.0f64; n];
    let mut sizes = vec![0usize; k];
    let mut history = Vec::new();
    let mut iterations = 0;

    while iterations < params.max_iters.max(1) {
        iterations += 1;
        let mut changed = 0usize;
        sizes.iter_mut().for_each(|s| *s = 0);
        for (i, row) in x.rows().enumerate() {
            let (j, d) = nearest_center_with_distance(&centers, row);
            if j != membership[i] {
                changed += 1;
            }
            membership[i] = j;
            dist[i] = d;
            sizes[j] += 1;
        }
        history.push(dist.iter().sum());

        for empty in 0..k {
            if sizes[empty] > 0 {
                continue;
            }
            let donor = (0..n)
                .filter(|&i| sizes[membership[i]] > 1)
                .fold(None, |best: Option<usize>, i| match best {
                    Some(b) if dist[b] >= dist[i] => Some(b),
                    _ => Some(i),
                })
                .expect("k <= n leaves a cluster with two or more samples");
            sizes[membership[donor]] -= 1;
            membership[donor] = empty;
            sizes[empty] = 1;
            dist[donor] = 0.0;
            centers[empty] = x.dense_row(donor);
            changed += 1;
        }

        centers = recompute_centers(x, &membership, &sizes);
        let clustering = Clustering {
            centers: centers.clone(),
            membership: membership.clone(),
            sizes: sizes.clone(),
        };
        history.push(within_cluster_ss(x, &clustering));
        if changed as f64 / n as f64 <= params.threshold {
            break;
        }
    }
    Ok(KMeansRun {
        clustering: Clustering {
            centers,
            membership,
            sizes,
        },
        iterations,
        wcss_history: history,
    })
}

pub fn kmeans(x: &Dataset, k: usize, seed: u64, params: KMeansParams) -> Result<Clustering> {
    Ok(kmeans_traced(x, k, seed, params)?.clustering)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KBalanceParams {
    pub kmeans: KMeansParams,
    /// Replace the K-means centers by the means of the balanced clusters.
    pub recompute_centers: bool,
}

impl Default for KBalanceParams {
    fn default() -> Self {
        Self {
            kmeans: KMeansParams::default(),
            recompute_centers: true,
        }
    }
}

/// Equal-size clustering: K-means centers, then a single capacity-limited
/// nearest-center pass over the samples in row order.
pub fn kbalance(x: &Dataset, k: usize, seed: u64, params: KBalanceParams) -> Result<Clustering> {
    check_k(x, k)?;
    let warm = kmeans(x, k, seed, params.kmeans)?;
    let n = x.n();
    let (floor, rem) = (n / k, n % k);
    let mut sizes = vec![0usize; k];
    let mut at_ceiling = 0usize;
    let mut membership = Vec::with_capacity(n);
    for row in x.rows() {
        let mut best: Option<(usize, f64)> = None;
        for (j, c) in warm.centers.iter().enumerate() {
            let full = sizes[j] > floor || (sizes[j] == floor && at_ceiling == rem);
            if full {
                continue;
            }
            let dist = row.sq_dist_dense(c);
            if best.map_or(true, |(_, b)| dist < b) {
                best = Some((j, dist));
            }
        }
        let (j, _) = best.expect("capacity bound leaves room for every sample");
        if sizes[j] == floor {
            at_ceiling += 1;
        }
        sizes[j] += 1;
        membership.push(j);
    }
    let centers = if params.recompute_centers {
        recompute_centers(x, &membership, &sizes)
    } else {
        warm.centers
    };
    Ok(Clustering {
        centers,
        membership,
        sizes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(points: &[f64]) -> Dataset {
        let rows: Vec<Vec<f64>> = points.iter().map(|&p| vec![p]).collect();
        Dataset::from_dense(&rows, vec![0.0; points.len()]).unwrap()
    }

    #[test]
    fn single_cluster_is_the_mean() {
        let x = line(&[1.0, 2.0, 6.0]);
        let run = kmeans_traced(&x, 1, 5, KMeansParams::default()).unwrap();
        assert_eq!(run.iterations, 1);
        assert_eq!(run.clustering.centers, vec![vec![3.0]]);
        assert_eq!(run.clustering.sizes, vec![3]);
    }

    #[test]
    fn k_equals_n_is_a_bijection() {
        let x = line(&[0.0, 5.0, 9.0, 20.0, 21.5]);
        let c = kmeans(&x, 5, 3, KMeansParams::default()).unwrap();
        let mut m = c.membership.clone();
        m.sort_unstable();
        assert_eq!(m, vec![0, 1, 2, 3, 4]);
        assert!(c.sizes.iter().all(|&s| s == 1));
    }

    #[test]
    fn nearest_center_rules() {
        let centers = vec![vec![0.0], vec![10.0], vec![3.5]];
        let x = line(&[4.0, 3.5, 5.0, 6.75]);
        assert_eq!(nearest_center(&centers[..2], x.row(0)), 0);
        assert_eq!(nearest_center(&centers, x.row(1)), 2);
        assert_eq!(nearest_center(&centers[..2], x.row(2)), 0);
        // 6.75 is 3.25 from both 3.5 and 10.
        assert_eq!(nearest_center(&centers[1..], x.row(3)), 0);
    }

    #[test]
    fn kbalance_small_sizes() {
        let x = line(&[0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 9.0, 9.1, 20.0]);
        let c = kbalance(&x, 3, 1, KBalanceParams::default()).unwrap();
        let mut s = c.sizes.clone();
        s.sort_unstable();
        assert_eq!(s, vec![3, 3, 4]);
        assert_eq!(c.sizes.iter().sum::<usize>(), 10);
    }

    #[test]
    fn kbalance_single_cluster() {
        let x = line(&[1.0, 4.0, 7.0]);
        let c = kbalance(&x, 1, 9, KBalanceParams::default()).unwrap();
        assert_eq!(c.membership, vec![0, 0, 0]);
        assert_eq!(c.centers, vec![vec![4.0]]);
    }

    #[test]
    fn invalid_k() {
        let x = line(&[1.0, 2.0]);
        assert!(kmeans(&x, 0, 1, KMeansParams::default()).is_err());
        assert!(kbalance(&x, 3, 1, KBalanceParams::default()).is_err());
    }

    #[test]
    fn artifact_round_trip() {
        let x = line(&[0.0, 0.3, 8.0, 8.1, 8.2]);
        let c = kmeans(&x, 2, 4, KMeansParams::default()).unwrap();
        let mut buf = Vec::new();
        c.write_text(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("2 1 5\n"));
        assert_eq!(Clustering::read_text(&buf[..]).unwrap(), c);
    }

    #[test]
    fn duplicate_points_never_leave_empty_clusters() {
        let x = line(&[2.0, 2.0, 2.0, 2.0]);
        let c = kmeans(&x, 3, 0, KMeansParams::default()).unwrap();
        assert!(c.sizes.iter().all(|&s| s > 0));
        assert_eq!(c.sizes.iter().sum::<usize>(), 4);
    }
}
