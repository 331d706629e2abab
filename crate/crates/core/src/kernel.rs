//! Kernel functions, Gram matrices and the regularized KRR system.
//!
//! | kind       | value                          |
//! |------------|--------------------------------|
//! | linear     | `x·z`                          |
//! | polynomial | `(a x·z + r)^degree`           |
//! | gaussian   | `exp(-|x - z|^2 / (2 sigma^2))` |
//! | sigmoid    | `tanh(a x·z + r)`              |
//!
//! Inputs stay sparse; Gram matrices are dense.

use std::fmt;
use std::str::FromStr;

use crate::data::{Dataset, SparseRow};
use crate::error::{KrrError, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelKind {
    Linear,
    Polynomial,
    Gaussian,
    Sigmoid,
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelKind::Linear => "linear",
            KernelKind::Polynomial => "polynomial",
            KernelKind::Gaussian => "gaussian",
            KernelKind::Sigmoid => "sigmoid",
        })
    }
}

impl FromStr for KernelKind {
    type Err = KrrError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(KernelKind::Linear),
            "polynomial" | "poly" => Ok(KernelKind::Polynomial),
            "gaussian" | "rbf" => Ok(KernelKind::Gaussian),
            "sigmoid" => Ok(KernelKind::Sigmoid),
            other => Err(KrrError::InvalidArgument(format!("unknown kernel {other:?}"))),
        }
    }
}

/// Kernel choice and parameters. Fields not used by `kind` are ignored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub a: f64,
    pub r: f64,
    pub degree: u32,
    pub sigma: f64,
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self::gaussian(1.0)
    }
}

impl KernelSpec {
    pub fn gaussian(sigma: f64) -> Self {
        Self {
            kind: KernelKind::Gaussian,
            a: 1.0,
            r: 0.0,
            degree: 1,
            sigma,
        }
    }

    pub fn linear() -> Self {
        Self {
            kind: KernelKind::Linear,
            ..Self::gaussian(1.0)
        }
    }

    pub fn polynomial(a: f64, r: f64, degree: u32) -> Self {
        Self {
            kind: KernelKind::Polynomial,
            a,
            r,
            degree,
            sigma: 1.0,
        }
    }

    pub fn sigmoid(a: f64, r: f64) -> Self {
        Self {
            kind: KernelKind::Sigmoid,
            a,
            r,
            degree: 1,
            sigma: 1.0,
        }
    }

    /// Copy with a different bandwidth; the grid search sweeps this value.
    pub fn with_sigma(self, sigma: f64) -> Self {
        Self { sigma, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            KernelKind::Gaussian if !(self.sigma > 0.0 && self.sigma.is_finite()) => Err(
                KrrError::InvalidArgument(format!("gaussian sigma must be > 0, got {}", self.sigma)),
            ),
            KernelKind::Polynomial if self.degree == 0 => {
                Err(KrrError::InvalidArgument("polynomial degree must be >= 1".into()))
            }
            _ => Ok(()),
        }
    }

    /// Kernel value from the inner product and the two squared norms.
    #[inline]
    pub fn from_parts(&self, dot: f64, norm_i: f64, norm_j: f64) -> f64 {
        match self.kind {
            KernelKind::Linear => dot,
            KernelKind::Polynomial => (self.a * dot + self.r).powi(self.degree as i32),
            KernelKind::Gaussian => {
                let sq = (norm_i + norm_j - 2.0 * dot).max(0.0);
                (-sq / (2.0 * self.sigma * self.sigma)).exp()
            }
            KernelKind::Sigmoid => (self.a * dot + self.r).tanh(),
        }
    }

    /// Flops charged per kernel evaluation in dimension `d` (dense-equivalent
    /// inner product plus the per-kind scalar work).
    pub fn eval_flops(&self, d: usize) -> u64 {
        2 * d as u64
            + match self.kind {
                KernelKind::Linear => 0,
                KernelKind::Polynomial => 2 + u64::from(self.degree),
                KernelKind::Gaussian => 6,
                KernelKind::Sigmoid => 3,
            }
    }
}

pub fn kernel_eval(spec: &KernelSpec, x_i: SparseRow<'_>, x_j: SparseRow<'_>) -> f64 {
    spec.from_parts(x_i.dot(&x_j), x_i.norm_sq(), x_j.norm_sq())
}

/// Squared norms of every sample, cached for Gaussian distances.
pub fn row_norms(ds: &Dataset) -> Vec<f64> {
    ds.rows().map(|r| r.norm_sq()).collect()
}

/// `|a| x |b|` matrix of kernel values between the samples of `a` and `b`.
pub fn gram(spec: &KernelSpec, a: &Dataset, b: &Dataset) -> Result<Matrix> {
    spec.validate()?;
    if a.dim() != b.dim() {
        return Err(KrrError::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let na = row_norms(a);
    let nb = row_norms(b);
    let mut out = Matrix::zeros(a.n(), b.n());
    for i in 0..a.n() {
        let xi = a.row(i);
        let dst = out.row_mut(i);
        for (j, d) in dst.iter_mut().enumerate() {
            *d = spec.from_parts(xi.dot(&b.row(j)), na[i], nb[j]);
        }
    }
    Ok(out)
}

/// Gram matrix of `a` with itself. Each unordered pair is evaluated once
/// and mirrored, so the result is bitwise symmetric.
pub fn gram_symmetric(spec: &KernelSpec, a: &Dataset) -> Result<Matrix> {
    spec.validate()?;
    let m = a.n();
    let norms = row_norms(a);
    let mut out = Matrix::zeros(m, m);
    for i in 0..m {
        let xi = a.row(i);
        for j in 0..=i {
            let v = spec.from_parts(xi.dot(&a.row(j)), norms[i], norms[j]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(out)
}

/// `K + lambda·m·I`, the per-partition KRR system matrix.
pub fn assemble_system(k: &Matrix, lambda: f64, m: usize) -> Result<Matrix> {
    if !k.is_square() {
        return Err(KrrError::DimensionMismatch {
            expected: k.rows(),
            found: k.cols(),
        });
    }
    if !(lambda > 0.0) {
        return Err(KrrError::InvalidArgument(format!("lambda must be > 0, got {lambda}")));
    }
    let shift = lambda * m as f64;
    let mut out = k.clone();
    for i in 0..out.rows() {
        out[(i, i)] += shift;
    }
    Ok(out)
}
