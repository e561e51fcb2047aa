//! Squared canonical correlations between two sets of columns.
//!
//! Both column sets are centered and orthonormalized, then the squared
//! canonical correlations are the squared singular values of `Q_Aᵀ Q_B`.
//! The complement `1 - ρ²` is computed separately from the residual
//! `(I - Q_A Q_Aᵀ) Q_B` so that values near one keep their precision.

use crate::error::{Error, Result};
use crate::linalg::cholesky::Cholesky;
use crate::linalg::eigen::sym_eigen;
use crate::linalg::matrix::{dot, Matrix};
use crate::scalar::Real;

const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalCorrelations<T> {
    /// Squared canonical correlations, descending, clamped to `[0, 1]`.
    pub squared: Vec<T>,
    /// `1 - ρ²_k` for each pair, computed from the orthogonal residual.
    pub complement: Vec<T>,
    pub rank_a: usize,
    pub rank_b: usize,
    pub k: usize,
}

impl<T: Real> CanonicalCorrelations<T> {
    pub fn is_full_rank(&self) -> bool {
        self.rank_a == self.k && self.rank_b == self.k
    }

    /// Mean of the squared canonical correlations over the attainable rank.
    pub fn average(&self) -> T {
        if self.squared.is_empty() {
            return T::zero();
        }
        self.squared.iter().copied().sum::<T>() / T::from_usize_(self.squared.len())
    }

    /// `1 - average()`, without cancellation.
    pub fn average_complement(&self) -> T {
        if self.complement.is_empty() {
            return T::one();
        }
        self.complement.iter().copied().sum::<T>() / T::from_usize_(self.complement.len())
    }
}

/// Modified Gram-Schmidt with one reorthogonalization pass. Columns whose
/// residual falls below `RANK_TOL` of their original norm are dropped.
fn orthonormal_columns<T: Real>(cols: &[Vec<T>]) -> Vec<Vec<T>> {
    let mut basis: Vec<Vec<T>> = Vec::with_capacity(cols.len());
    for c in cols {
        let orig = dot(c, c).sqrt();
        if !(orig > T::zero()) {
            continue;
        }
        let mut v = c.clone();
        for _ in 0..2 {
            for q in &basis {
                let proj = dot(q, &v);
                v.iter_mut().zip(q).for_each(|(a, &b)| *a = *a - proj * b);
            }
        }
        let nv = dot(&v, &v).sqrt();
        if nv > T::c(RANK_TOL) * orig {
            v.iter_mut().for_each(|a| *a = *a / nv);
            basis.push(v);
        }
    }
    basis
}

fn centered_columns<T: Real>(m: &Matrix<T>) -> Vec<Vec<T>> {
    m.columns()
        .into_iter()
        .map(|mut c| {
            let mu = c.iter().copied().sum::<T>() / T::from_usize_(c.len());
            c.iter_mut().for_each(|v| *v = *v - mu);
            c
        })
        .collect()
}

fn angles<T: Real>(qa: &[Vec<T>], qb: &[Vec<T>], k: usize) -> Result<CanonicalCorrelations<T>> {
    let r = qa.len().min(qb.len());
    let (small, large) = if qa.len() <= qb.len() { (qa, qb) } else { (qb, qa) };
    // M = Q_smallᵀ Q_large (r x s); σ² are eigenvalues of M Mᵀ
    let cross = Matrix::from_fn(small.len(), large.len(), |i, j| dot(&small[i], &large[j]));
    let squared = if r == 0 {
        Vec::new()
    } else {
        let mmt = cross.matmul(&cross.transpose())?;
        let mut s: Vec<T> = sym_eigen(&mmt)?
            .eigenvalues
            .into_iter()
            .map(|v| v.max(T::zero()).min(T::one()))
            .collect();
        s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
        s
    };

    // residual of the small basis against the large one: singular values are sines
    let complement = if r == 0 {
        Vec::new()
    } else {
        let resid: Vec<Vec<T>> = small
            .iter()
            .map(|q| {
                let mut v = q.clone();
                for b in large {
                    let proj = dot(b, &v);
                    v.iter_mut().zip(b).for_each(|(a, &bb)| *a = *a - proj * bb);
                }
                v
            })
            .collect();
        let gram = Matrix::from_fn(r, r, |i, j| dot(&resid[i], &resid[j]));
        let mut s: Vec<T> = sym_eigen(&gram)?
            .eigenvalues
            .into_iter()
            .map(|v| v.max(T::zero()).min(T::one()))
            .collect();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        s
    };

    Ok(CanonicalCorrelations {
        squared,
        complement,
        rank_a: qa.len(),
        rank_b: qb.len(),
        k,
    })
}

/// Canonical correlations between the column spaces of centered `a` and `b`.
pub fn canonical_correlations<T: Real>(
    a: &Matrix<T>,
    b: &Matrix<T>,
) -> Result<CanonicalCorrelations<T>> {
    if a.rows() != b.rows() || a.cols() != b.cols() {
        return Err(Error::DimensionMismatch(format!(
            "canonical correlation of {}x{} and {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let k = a.cols();
    if a.rows() <= k {
        return Err(Error::DegenerateInput(format!(
            "need more rows ({}) than columns ({k})",
            a.rows()
        )));
    }
    let qa = orthonormal_columns(&centered_columns(a));
    let qb = orthonormal_columns(&centered_columns(b));
    angles(&qa, &qb, k)
}

/// Average squared canonical correlation; `RankDeficient` if either centered
/// block loses rank.
pub fn avg_sq_canonical_cor<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> Result<T> {
    let cc = canonical_correlations(a, b)?;
    if !cc.is_full_rank() {
        return Err(Error::RankDeficient {
            expected: cc.k,
            found: cc.rank_a.min(cc.rank_b),
        });
    }
    Ok(cc.average())
}

/// Canonical correlations between `X A` and `X B` computed from the sample
/// covariance of `X` alone: with `Σ = L Lᵀ` they are the principal angles
/// between `Lᵀ A` and `Lᵀ B`.
pub fn canonical_correlations_cov<T: Real>(
    cov: &Cholesky<T>,
    a: &Matrix<T>,
    b: &Matrix<T>,
) -> Result<CanonicalCorrelations<T>> {
    if a.rows() != b.rows() || a.cols() != b.cols() {
        return Err(Error::DimensionMismatch("direction bases differ in shape".into()));
    }
    let k = a.cols();
    let map = |m: &Matrix<T>| -> Vec<Vec<T>> {
        m.columns().iter().map(|c| cov.upper_mul(c)).collect()
    };
    let qa = orthonormal_columns(&map(a));
    let qb = orthonormal_columns(&map(b));
    angles(&qa, &qb, k)
}
