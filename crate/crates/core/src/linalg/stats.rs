use crate::error::{Error, Result};
use crate::linalg::eigen::sym_eigen;
use crate::linalg::matrix::Matrix;
use crate::scalar::Real;

/// Relative eigenvalue floor below which a covariance counts as singular.
pub const PD_RATIO: f64 = 1e-10;

pub fn mean<T: Real>(v: &[T]) -> T {
    v.iter().copied().sum::<T>() / T::from_usize_(v.len())
}

/// Sample variance with divisor `n - 1`.
pub fn variance<T: Real>(v: &[T]) -> T {
    let m = mean(v);
    v.iter().map(|&x| (x - m) * (x - m)).sum::<T>() / T::from_usize_(v.len() - 1)
}

/// Column means and sample covariance (divisor `n - 1`).
pub fn sample_mean_cov<T: Real>(x: &Matrix<T>) -> Result<(Vec<T>, Matrix<T>)> {
    let n = x.rows();
    let p = x.cols();
    if n < 2 {
        return Err(Error::DegenerateInput(format!(
            "covariance needs at least 2 rows, got {n}"
        )));
    }
    let nf = T::from_usize_(n);
    let mut mu = vec![T::zero(); p];
    for i in 0..n {
        for (m, &v) in mu.iter_mut().zip(x.row(i)) {
            *m = *m + v;
        }
    }
    mu.iter_mut().for_each(|m| *m = *m / nf);

    let mut cov = Matrix::zeros(p, p);
    let mut centered = vec![T::zero(); p];
    for i in 0..n {
        for ((c, &v), &m) in centered.iter_mut().zip(x.row(i)).zip(&mu) {
            *c = v - m;
        }
        for a in 0..p {
            let ca = centered[a];
            for b in 0..=a {
                cov[(a, b)] = cov[(a, b)] + ca * centered[b];
            }
        }
    }
    let denom = T::from_usize_(n - 1);
    for a in 0..p {
        for b in 0..=a {
            let v = cov[(a, b)] / denom;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    Ok((mu, cov))
}

/// Symmetric square root and inverse square root of a covariance matrix.
#[derive(Debug, Clone)]
pub struct Whitening<T> {
    pub mean: Vec<T>,
    pub cov: Matrix<T>,
    pub sqrt_cov: Matrix<T>,
    pub inv_sqrt_cov: Matrix<T>,
}

impl<T: Real> Whitening<T> {
    pub fn from_data(x: &Matrix<T>) -> Result<Self> {
        let (mean, cov) = sample_mean_cov(x)?;
        Self::from_cov(mean, cov)
    }

    pub fn from_cov(mean: Vec<T>, cov: Matrix<T>) -> Result<Self> {
        let eig = sym_eigen(&cov)?;
        let largest = eig
            .eigenvalues
            .iter()
            .fold(T::zero(), |m, &l| m.max(l));
        let smallest = eig
            .eigenvalues
            .iter()
            .fold(T::infinity(), |m, &l| m.min(l));
        if !(largest > T::zero()) || !(smallest > T::c(PD_RATIO) * largest) {
            let ratio = if largest > T::zero() {
                (smallest / largest).to_f64_()
            } else {
                0.0
            };
            return Err(Error::SingularCovariance { ratio });
        }
        let p = cov.rows();
        let v = &eig.eigenvectors;
        let roots: Vec<T> = eig.eigenvalues.iter().map(|l| l.sqrt()).collect();
        let sqrt_cov = Matrix::from_fn(p, p, |i, j| {
            (0..p).fold(T::zero(), |acc, k| acc + v[(i, k)] * roots[k] * v[(j, k)])
        })
        .symmetrize();
        let inv_sqrt_cov = Matrix::from_fn(p, p, |i, j| {
            (0..p).fold(T::zero(), |acc, k| acc + v[(i, k)] * v[(j, k)] / roots[k])
        })
        .symmetrize();
        Ok(Self {
            mean,
            cov,
            sqrt_cov,
            inv_sqrt_cov,
        })
    }

    /// `Σ^{-1/2}(x_i - x̄)` for every row.
    pub fn apply(&self, x: &Matrix<T>) -> Matrix<T> {
        let p = x.cols();
        let mut z = Matrix::zeros(x.rows(), p);
        let mut centered = vec![T::zero(); p];
        for i in 0..x.rows() {
            for ((c, &v), &m) in centered.iter_mut().zip(x.row(i)).zip(&self.mean) {
                *c = v - m;
            }
            let zi = self.inv_sqrt_cov.mul_vec(&centered);
            for (j, v) in zi.into_iter().enumerate() {
                z[(i, j)] = v;
            }
        }
        z
    }
}

/// Standardized predictors `z_i = Σ̂^{-1/2}(x_i - x̄)`.
#[derive(Debug, Clone)]
pub struct Standardized<T> {
    pub z: Matrix<T>,
    pub whitening: Whitening<T>,
}

impl<T: Real> Standardized<T> {
    pub fn sqrt_cov(&self) -> &Matrix<T> {
        &self.whitening.sqrt_cov
    }

    pub fn inv_sqrt_cov(&self) -> &Matrix<T> {
        &self.whitening.inv_sqrt_cov
    }
}

pub fn standardize<T: Real>(x: &Matrix<T>) -> Result<Standardized<T>> {
    let whitening = Whitening::from_data(x)?;
    let z = whitening.apply(x);
    Ok(Standardized { z, whitening })
}
