//! Cholesky factorization, SPD solves and single-partition KRR models.

use crate::data::{Dataset, SparseRow};
use crate::error::{KrrError, Result};
use crate::kernel::{assemble_system, gram_symmetric, row_norms, KernelSpec};
use crate::linalg::{norm2, Matrix};

/// Cholesky factor of an SPD matrix `A = L·Lᵀ`.
///
/// The factor is held as the upper triangle `U = Lᵀ` in row-major order, so
/// the trailing updates of the right-looking sweep run over contiguous rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky {
    upper: Matrix,
}

impl Cholesky {
    pub fn order(&self) -> usize {
        self.upper.rows()
    }

    /// The lower-triangular factor `L`.
    pub fn lower(&self) -> Matrix {
        self.upper.transpose()
    }

    /// Solves `A x = y` with one forward and one backward substitution.
    pub fn solve(&self, y: &[f64]) -> Result<Vec<f64>> {
        let m = self.order();
        if y.len() != m {
            return Err(KrrError::DimensionMismatch {
                expected: m,
                found: y.len(),
            });
        }
        let u = &self.upper;
        // Forward: Uᵀ z = y. Column i of Uᵀ is row i of U.
        let mut z = y.to_vec();
        for i in 0..m {
            z[i] /= u[(i, i)];
            let zi = z[i];
            let row = u.row(i);
            for j in i + 1..m {
                z[j] -= row[j] * zi;
            }
        }
        // Backward: U x = z.
        for i in (0..m).rev() {
            let row = u.row(i);
            let s: f64 = row[i + 1..].iter().zip(&z[i + 1..]).map(|(a, b)| a * b).sum();
            z[i] = (z[i] - s) / row[i];
        }
        Ok(z)
    }
}

/// Right-looking Cholesky without pivoting. Only the upper triangle of `a`
/// is read.
pub fn cholesky(a: &Matrix) -> Result<Cholesky> {
    cholesky_in_place(a.clone())
}

pub fn cholesky_in_place(mut a: Matrix) -> Result<Cholesky> {
    if !a.is_square() {
        return Err(KrrError::DimensionMismatch {
            expected: a.rows(),
            found: a.cols(),
        });
    }
    let m = a.rows();
    let data = a.as_mut_slice();
    for k in 0..m {
        let (head, tail) = data.split_at_mut((k + 1) * m);
        let row_k = &mut head[k * m..];
        let pivot = row_k[k];
        if !(pivot > 0.0) || !pivot.is_finite() {
            return Err(KrrError::NotPositiveDefinite { pivot: k, value: pivot });
        }
        let r = pivot.sqrt();
        row_k[k] = r;
        for v in &mut row_k[k + 1..] {
            *v /= r;
        }
        let row_k = &*row_k;
        for (off, row_i) in tail.chunks_exact_mut(m).enumerate() {
            let i = k + 1 + off;
            let f = row_k[i];
            for (dst, src) in row_i[i..].iter_mut().zip(&row_k[i..]) {
                *dst -= f * src;
            }
        }
    }
    for i in 0..m {
        for j in 0..i {
            a[(i, j)] = 0.0;
        }
    }
    Ok(Cholesky { upper: a })
}

pub fn solve_spd(factor: &Cholesky, y: &[f64]) -> Result<Vec<f64>> {
    factor.solve(y)
}

/// `‖A x − y‖₂ / ‖y‖₂`, or the absolute residual when `y = 0`.
pub fn relative_residual(a: &Matrix, x: &[f64], y: &[f64]) -> f64 {
    let ax = a.matvec(x);
    let r: Vec<f64> = ax.iter().zip(y).map(|(p, q)| p - q).collect();
    let ny = norm2(y);
    if ny > 0.0 {
        norm2(&r) / ny
    } else {
        norm2(&r)
    }
}

/// A trained kernel ridge regressor over one partition's samples.
#[derive(Debug, Clone)]
pub struct KrrModel {
    pub support: Dataset,
    pub alpha: Vec<f64>,
    pub spec: KernelSpec,
    pub lambda: f64,
    /// Cluster center of the partition; `None` for random or whole-set
    /// partitions.
    pub center: Option<Vec<f64>>,
    norms: Vec<f64>,
}

impl KrrModel {
    pub fn new(
        support: Dataset,
        alpha: Vec<f64>,
        spec: KernelSpec,
        lambda: f64,
        center: Option<Vec<f64>>,
    ) -> Result<Self> {
        if alpha.len() != support.n() {
            return Err(KrrError::DimensionMismatch {
                expected: support.n(),
                found: alpha.len(),
            });
        }
        let norms = row_norms(&support);
        Ok(Self {
            support,
            alpha,
            spec,
            lambda,
            center,
            norms,
        })
    }

    pub fn size(&self) -> usize {
        self.alpha.len()
    }

    /// `Σ_i α_i Φ(x_i, x)` over the support samples.
    pub fn predict(&self, x: SparseRow<'_>) -> f64 {
        let nx = x.norm_sq();
        self.support
            .rows()
            .zip(&self.alpha)
            .zip(&self.norms)
            .map(|((xi, a), ni)| a * self.spec.from_parts(xi.dot(&x), *ni, nx))
            .sum()
    }

    pub fn predict_all(&self, xs: &Dataset) -> Vec<f64> {
        xs.rows().map(|x| self.predict(x)).collect()
    }
}

/// Output of one regularized solve, with its system residual.
#[derive(Debug, Clone)]
pub struct Solution {
    pub alpha: Vec<f64>,
    pub relative_residual: f64,
}

/// Solves `(K + λ m I) α = y` for a precomputed Gram matrix `K`.
pub fn solve_regularized(k: &Matrix, y: &[f64], lambda: f64) -> Result<Solution> {
    let m = k.rows();
    if y.len() != m {
        return Err(KrrError::DimensionMismatch {
            expected: m,
            found: y.len(),
        });
    }
    let system = assemble_system(k, lambda, m)?;
    let factor = cholesky(&system)?;
    let alpha = factor.solve(y)?;
    let relative_residual = relative_residual(&system, &alpha, y);
    Ok(Solution {
        alpha,
        relative_residual,
    })
}

pub fn train_krr(x: &Dataset, spec: KernelSpec, lambda: f64) -> Result<KrrModel> {
    let k = gram_symmetric(&spec, x)?;
    let sol = solve_regularized(&k, x.y(), lambda)?;
    KrrModel::new(x.clone(), sol.alpha, spec, lambda, None)
}
