//! The α-β-γ runtime model, closed-form flop counts and scaling arithmetic.
//!
//! A machine that performs `f` flops and sends `n_m` messages of `n_b` bytes
//! is modeled as taking `f·γ + n_m·(α + n_b·β)` seconds.

use crate::error::{KrrError, Result};
use crate::kernel::KernelSpec;
use crate::runtime::Counters;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostModel {
    /// Seconds of latency per message.
    pub alpha: f64,
    /// Seconds per byte transferred.
    pub beta: f64,
    /// Seconds per floating-point operation.
    pub gamma: f64,
}

impl Default for CostModel {
    /// Constants measured on a Cray XC30 class machine.
    fn default() -> Self {
        Self {
            alpha: 7.2e-6,
            beta: 0.9e-9,
            gamma: 2e-11,
        }
    }
}

impl CostModel {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        if !(alpha >= beta && beta >= gamma && gamma >= 0.0) {
            return Err(KrrError::InvalidArgument(format!(
                "cost model needs alpha >= beta >= gamma >= 0 (got {alpha}, {beta}, {gamma})"
            )));
        }
        Ok(Self { alpha, beta, gamma })
    }

    /// Modeled seconds for a task's accumulated counters.
    pub fn estimate(&self, c: &Counters) -> f64 {
        c.flops as f64 * self.gamma + c.messages as f64 * self.alpha + c.bytes as f64 * self.beta
    }
}

pub fn estimate_time(model: &CostModel, flops: f64, messages: f64, bytes_per_message: f64) -> f64 {
    flops * model.gamma + messages * (model.alpha + bytes_per_message * model.beta)
}

/// Kernel evaluations for the symmetric Gram matrix of `m` samples.
pub fn gram_flops(spec: &KernelSpec, m: usize, d: usize) -> u64 {
    let m = m as u64;
    m * (m + 1) / 2 * spec.eval_flops(d)
}

pub fn assemble_flops(m: usize) -> u64 {
    m as u64
}

/// Exact operation count of the right-looking factorization:
/// `Σ_{j=1..m} j² = m(m+1)(2m+1)/6 = m³/3 + m²/2 + m/6`.
pub fn cholesky_flops(m: usize) -> u64 {
    let m = m as u64;
    m * (m + 1) * (2 * m + 1) / 6
}

/// One forward and one backward triangular substitution.
pub fn solve_flops(m: usize) -> u64 {
    2 * (m as u64) * (m as u64)
}

/// Gram, shift, factorization and solve for a partition of `m` samples.
pub fn training_flops(spec: &KernelSpec, m: usize, d: usize) -> u64 {
    gram_flops(spec, m, d) + assemble_flops(m) + cholesky_flops(m) + solve_flops(m)
}

/// Evaluating a model with `m` support samples at `queries` points.
pub fn predict_flops(spec: &KernelSpec, m: usize, d: usize, queries: usize) -> u64 {
    queries as u64 * m as u64 * (spec.eval_flops(d) + 2)
}

/// Bytes moved per machine by a 2D-blocked distributed Cholesky over `p`
/// machines, as a multiple of `8·n²/√p`. This is a model constant, not a
/// measurement.
pub const DKRR_COMM_COEFF: f64 = 1.0;

/// Modeled per-machine `(messages, bytes per message)` for one distributed
/// exact solve of order `n` over `p` machines: `2⌈√p⌉` panel broadcasts
/// carrying `DKRR_COMM_COEFF · 8n²/√p` bytes in total.
pub fn dkrr_comm(n: usize, p: usize) -> (u64, u64) {
    if p <= 1 {
        return (0, 0);
    }
    let sqrt_p = (p as f64).sqrt();
    let messages = 2 * sqrt_p.ceil() as u64;
    let total = DKRR_COMM_COEFF * 8.0 * (n as f64) * (n as f64) / sqrt_p;
    (messages, (total / messages as f64).round() as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpeedupVariant {
    /// Partitioned training on `n/p` samples per machine against a
    /// distributed exact solve of `n` samples.
    Bk2VsDkrr,
    /// As above with each machine holding `2n/p` samples.
    Bk2DoubledVsDkrr,
}

/// Ratio of per-machine training work, `(n³/p) / (c·n/p)³` with `c = 1` or
/// `c = 2`. The `n` cancels, leaving `p²` or `p²/8`.
pub fn theoretical_speedup(n: usize, p: usize, variant: SpeedupVariant) -> Result<f64> {
    if p == 0 || n < p {
        return Err(KrrError::InvalidArgument(format!(
            "speedup needs n >= p >= 1 (n={n}, p={p})"
        )));
    }
    let p2 = (p as f64) * (p as f64);
    Ok(match variant {
        SpeedupVariant::Bk2VsDkrr => p2,
        SpeedupVariant::Bk2DoubledVsDkrr => p2 / 8.0,
    })
}

/// How per-machine training work grows with the machine count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalingModel {
    /// One system of order `n` shared by `p` machines: `n³/p` per machine.
    DistributedExact,
    /// Independent systems, the largest of which bounds the iteration.
    Partitioned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WeakScalingStep {
    pub p: usize,
    pub n: usize,
    /// Largest partition; for the distributed exact model this is `n`.
    pub largest_part: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakScalingRow {
    pub p: usize,
    pub n: usize,
    pub modeled_seconds: f64,
    pub efficiency: f64,
}

/// Leading-order per-machine factorization work as an exact rational
/// `(numerator, denominator)`.
fn leading_work(model: ScalingModel, step: &WeakScalingStep) -> (u128, u128) {
    match model {
        ScalingModel::DistributedExact => ((step.n as u128).pow(3), step.p as u128),
        ScalingModel::Partitioned => ((step.largest_part as u128).pow(3), 1),
    }
}

/// Modeled iteration time `γ·work/3` per step and efficiency relative to
/// the first step. Efficiencies are ratios of exact integer work counts, so
/// a `p⁻²` law yields exactly `1/4`, `1/16`, ... for doubling `p`.
pub fn weak_scaling_rows(
    cost: &CostModel,
    model: ScalingModel,
    steps: &[WeakScalingStep],
) -> Vec<WeakScalingRow> {
    let Some(base) = steps.first() else {
        return Vec::new();
    };
    let (bn, bd) = leading_work(model, base);
    steps
        .iter()
        .map(|s| {
            let (num, den) = leading_work(model, s);
            let work = num as f64 / den as f64;
            WeakScalingRow {
                p: s.p,
                n: s.n,
                modeled_seconds: cost.gamma * work / 3.0,
                efficiency: (bn * den) as f64 / (num * bd) as f64,
            }
        })
        .collect()
}

/// Analytic weak-scaling table: start at `base_p` machines with `base_n`
/// samples and double both `steps` times, keeping `n/p` fixed with
/// perfectly balanced partitions.
pub fn weak_scaling_report(
    cost: &CostModel,
    model: ScalingModel,
    base_p: usize,
    base_n: usize,
    steps: usize,
) -> Result<Vec<WeakScalingRow>> {
    if base_p == 0 || base_n < base_p || base_n % base_p != 0 {
        return Err(KrrError::InvalidArgument(format!(
            "weak scaling needs base_n to be a positive multiple of base_p (n={base_n}, p={base_p})"
        )));
    }
    let per = base_n / base_p;
    let plan: Vec<WeakScalingStep> = (0..=steps)
        .map(|s| {
            let p = base_p << s;
            let n = per * p;
            WeakScalingStep {
                p,
                n,
                largest_part: if model == ScalingModel::DistributedExact { n } else { per },
            }
        })
        .collect();
    Ok(weak_scaling_rows(cost, model, &plan))
}
