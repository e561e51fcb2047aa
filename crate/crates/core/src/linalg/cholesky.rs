use crate::error::{Error, Result};
use crate::linalg::matrix::Matrix;
use crate::scalar::Real;

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    l: Matrix<T>,
}

impl<T: Real> Cholesky<T> {
    /// Fails with `SingularCovariance` when a pivot is not positive.
    pub fn new(a: &Matrix<T>) -> Result<Self> {
        let n = a.rows();
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut s = a[(j, j)];
            for k in 0..j {
                s = s - l[(j, k)] * l[(j, k)];
            }
            if !(s > T::zero()) {
                return Err(Error::SingularCovariance { ratio: 0.0 });
            }
            let ljj = s.sqrt();
            l[(j, j)] = ljj;
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s = s - l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / ljj;
            }
        }
        Ok(Self { l })
    }

    pub fn factor(&self) -> &Matrix<T> {
        &self.l
    }

    /// Solves `L x = b`.
    pub fn solve_lower(&self, b: &[T]) -> Vec<T> {
        let n = b.len();
        let mut x = b.to_vec();
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s = s - self.l[(i, k)] * x[k];
            }
            x[i] = s / self.l[(i, i)];
        }
        x
    }

    /// Solves `Lᵀ x = b`.
    pub fn solve_upper(&self, b: &[T]) -> Vec<T> {
        let n = b.len();
        let mut x = b.to_vec();
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s = s - self.l[(k, i)] * x[k];
            }
            x[i] = s / self.l[(i, i)];
        }
        x
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        self.solve_upper(&self.solve_lower(b))
    }

    /// `Lᵀ v`.
    pub fn upper_mul(&self, v: &[T]) -> Vec<T> {
        let n = v.len();
        (0..n)
            .map(|i| (i..n).fold(T::zero(), |acc, k| acc + self.l[(k, i)] * v[k]))
            .collect()
    }

    /// `L⁻¹ M L⁻ᵀ` for symmetric `M`.
    pub fn whiten(&self, m: &Matrix<T>) -> Matrix<T> {
        let n = m.rows();
        // columns of L⁻¹ M
        let mut left = Matrix::zeros(n, n);
        for j in 0..n {
            let col = self.solve_lower(&m.col(j));
            for i in 0..n {
                left[(i, j)] = col[i];
            }
        }
        // (L⁻¹ (L⁻¹ M)ᵀ)ᵀ
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            let row = self.solve_lower(left.row(i));
            for j in 0..n {
                out[(j, i)] = row[j];
            }
        }
        out.symmetrize()
    }
}
