//! Leave-one-out influence of single observations on an estimated dimension
//! reduction subspace.
//!
//! For each observation `i` the estimator is refitted without it and the
//! reduced predictors `X B̂` and `X B̂_(i)` (always the full `X`) are compared
//! through their average squared canonical correlation `r²`:
//!
//! * `ρ_i = (n - 1)² (1 - r²)` for any estimator and any `K`,
//! * `r_i = n² (1/r² - 1)` for the OLS slope (`K = 1`).
//!
//! Two exact evaluation strategies are provided. `Refit` reruns the estimator
//! on each deleted sample. `Downdate` obtains the deleted-sample moments by
//! rank-one corrections of centered sums and recomputes the factorizations
//! and eigendecompositions from them; it is only available for the built-in
//! estimators and otherwise falls back to `Refit`.

use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dr::{orthonormalize, Predictors};
use crate::error::{Error, Result};
use crate::linalg::{canonical_correlations, canonical_correlations_cov, mean, sym_eigen, Cholesky, Matrix};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InfluenceMeasure {
    /// `r_i`, OLS slope only.
    Ri,
    /// `ρ_i`, any estimator.
    Rho,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum LooStrategy {
    #[default]
    Downdate,
    Refit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceReport<T> {
    /// Per-observation influence; `NaN` where the deleted fit failed.
    pub values: Vec<T>,
    /// Mean over the observations whose deleted fit succeeded.
    pub mean: T,
    pub measure: InfluenceMeasure,
    pub method: &'static str,
    /// Observations whose deleted-sample fit failed, with the error.
    pub failures: Vec<(usize, Error)>,
}

impl<T: Real> InfluenceReport<T> {
    /// Indices sorted by decreasing influence (failed indices last).
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.values.len()).collect();
        idx.sort_by(|&a, &b| {
            let va = self.values[a];
            let vb = self.values[b];
            match (va.is_nan(), vb.is_nan()) {
                (true, true) => a.cmp(&b),
                (true, false) => std::cmp::Ordering::Greater,
                (false, true) => std::cmp::Ordering::Less,
                _ => vb.partial_cmp(&va).unwrap().then(a.cmp(&b)),
            }
        });
        idx
    }
}

/// Something that maps a sample to a `p x K` basis of x-scale directions.
pub trait DirectionEstimator<T: Real>: Sync {
    fn label(&self) -> &'static str;

    fn estimate(&self, y: &[T], x: &Matrix<T>) -> Result<Matrix<T>>;

    /// Exact deleted-sample fits from downdated moments, when supported.
    fn downdater<'a>(&'a self, _y: &'a [T], _x: &'a Matrix<T>) -> Option<Result<Box<dyn LeaveOneOut<T> + 'a>>> {
        None
    }
}

pub trait LeaveOneOut<T>: Sync {
    fn without(&self, i: usize) -> Result<Matrix<T>>;
}

/// The built-in estimators.
#[derive(Debug, Clone, PartialEq)]
pub enum Estimator<T> {
    Ols,
    Rlm,
    Phd { k: usize },
    /// Leading PHD direction after projecting out fixed x-scale directions,
    /// mapped to the z-scale of whichever sample is being fitted.
    PhdDeflated { prior: Matrix<T> },
}

impl<T: Real> DirectionEstimator<T> for Estimator<T> {
    fn label(&self) -> &'static str {
        match self {
            Estimator::Ols => "OLS",
            Estimator::Rlm => "RLM",
            Estimator::Phd { .. } => "PHD",
            Estimator::PhdDeflated { .. } => "PHD_deflated",
        }
    }

    fn estimate(&self, y: &[T], x: &Matrix<T>) -> Result<Matrix<T>> {
        let pred = Predictors::new(x)?;
        estimate_with(self, &pred, y)
    }

    fn downdater<'a>(&'a self, y: &'a [T], x: &'a Matrix<T>) -> Option<Result<Box<dyn LeaveOneOut<T> + 'a>>> {
        match self {
            Estimator::Rlm => None,
            _ => Some(Moments::new(y, x, self).map(|m| Box::new(m) as Box<dyn LeaveOneOut<T> + 'a>)),
        }
    }
}

/// Estimate using predictor quantities that were already computed.
pub fn estimate_with<T: Real>(est: &Estimator<T>, pred: &Predictors<T>, y: &[T]) -> Result<Matrix<T>> {
    match est {
        Estimator::Ols | Estimator::Rlm => {
            let fit = if matches!(est, Estimator::Ols) { pred.ols(y)? } else { pred.rlm(y)? };
            if fit.zero_slope {
                return Err(Error::ZeroSlope);
            }
            Ok(fit.directions)
        }
        Estimator::Phd { k } => Ok(pred.phd(y, *k)?.directions),
        Estimator::PhdDeflated { prior } => {
            let cols: Vec<Vec<T>> = prior
                .columns()
                .iter()
                .map(|g| pred.to_z_unit(g))
                .collect::<Result<_>>()?;
            let prior_z = Matrix::from_columns(&cols)?;
            Ok(pred.phd_deflated(y, &prior_z)?.directions)
        }
    }
}

/// Centered first, second and third-order sums of the full sample.
struct Moments<'a, T> {
    est: &'a Estimator<T>,
    xc: Matrix<T>,
    yc: Vec<T>,
    /// `Σ x̃ x̃ᵀ`
    sxx: Matrix<T>,
    /// `Σ ỹ x̃`
    sxy: Vec<T>,
    /// `Σ ỹ x̃ x̃ᵀ`, PHD only
    syxx: Option<Matrix<T>>,
}

impl<'a, T: Real> Moments<'a, T> {
    fn new(y: &[T], x: &Matrix<T>, est: &'a Estimator<T>) -> Result<Self> {
        let n = x.rows();
        let p = x.cols();
        if y.len() != n {
            return Err(Error::DimensionMismatch("response length".into()));
        }
        let ybar = mean(y);
        let xbar: Vec<T> = (0..p).map(|j| mean(&x.col(j))).collect();
        let xc = Matrix::from_fn(n, p, |i, j| x[(i, j)] - xbar[j]);
        let yc: Vec<T> = y.iter().map(|&v| v - ybar).collect();
        let need_third = !matches!(est, Estimator::Ols | Estimator::Rlm);
        let mut sxx = Matrix::zeros(p, p);
        let mut sxy = vec![T::zero(); p];
        let mut syxx = if need_third { Some(Matrix::zeros(p, p)) } else { None };
        for i in 0..n {
            let r = xc.row(i);
            let w = yc[i];
            for a in 0..p {
                sxy[a] = sxy[a] + w * r[a];
                for b in 0..=a {
                    let q = r[a] * r[b];
                    sxx[(a, b)] = sxx[(a, b)] + q;
                    if let Some(m) = syxx.as_mut() {
                        m[(a, b)] = m[(a, b)] + w * q;
                    }
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                sxx[(b, a)] = sxx[(a, b)];
                if let Some(m) = syxx.as_mut() {
                    m[(b, a)] = m[(a, b)];
                }
            }
        }
        Ok(Self {
            est,
            xc,
            yc,
            sxx,
            sxy,
            syxx,
        })
    }
}

impl<T: Real> LeaveOneOut<T> for Moments<'_, T> {
    fn without(&self, i: usize) -> Result<Matrix<T>> {
        let n = self.xc.rows();
        let p = self.xc.cols();
        let m1 = T::from_usize_(n - 1);
        let xi = self.xc.row(i);
        let yi = self.yc[i];
        // deleted-sample means of the centered data
        let mx: Vec<T> = xi.iter().map(|&v| -v / m1).collect();
        let my = -yi / m1;

        // Σ_{j≠i} (x̃_j - m_x)(x̃_j - m_x)ᵀ = Sxx - x̃_i x̃_iᵀ - (n-1) m_x m_xᵀ
        let scatter = Matrix::from_fn(p, p, |a, b| {
            self.sxx[(a, b)] - xi[a] * xi[b] - m1 * mx[a] * mx[b]
        });
        let cov = scatter.scale(T::one() / T::from_usize_(n - 2));
        let chol = Cholesky::new(&cov).map_err(|_| Error::SingularLeaveOneOut { index: i })?;

        match self.est {
            Estimator::Ols | Estimator::Rlm => {
                // Σ_{j≠i} (ỹ_j - m_y)(x̃_j - m_x) = (Sxy - ỹ_i x̃_i) - (n-1) m_y m_x
                let sxy: Vec<T> = (0..p)
                    .map(|a| self.sxy[a] - yi * xi[a] - m1 * my * mx[a])
                    .collect();
                let b = chol.solve(&sxy);
                if b.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("deleted-sample slope"));
                }
                Ok(Matrix::column_vector(&b))
            }
            Estimator::Phd { .. } | Estimator::PhdDeflated { .. } => {
                let syxx = self.syxx.as_ref().expect("third moments for PHD");
                // T' - v' m_xᵀ - m_x v'ᵀ - m_y W' + 2(n-1) m_y m_x m_xᵀ, primes = row i removed
                let v: Vec<T> = (0..p).map(|a| self.sxy[a] - yi * xi[a]).collect();
                let two_m1_my = T::c(2.0) * m1 * my;
                let inv = T::one() / m1;
                let m = Matrix::from_fn(p, p, |a, b| {
                    let t = syxx[(a, b)] - yi * xi[a] * xi[b];
                    let w = self.sxx[(a, b)] - xi[a] * xi[b];
                    (t - v[a] * mx[b] - mx[a] * v[b] - my * w + two_m1_my * mx[a] * mx[b]) * inv
                });
                let mut white = chol.whiten(&m);
                let k = match self.est {
                    Estimator::Phd { k } => *k,
                    Estimator::PhdDeflated { prior } => {
                        // Lᵀγ is the Cholesky-frame image of Σ^{1/2}γ
                        let us: Vec<Vec<T>> = prior.columns().iter().map(|g| chol.upper_mul(g)).collect();
                        for u in orthonormalize(&us) {
                            white = crate::dr::deflate(&white, &u)?;
                        }
                        1
                    }
                    _ => unreachable!(),
                };
                let eig = sym_eigen(&white)?;
                let cols: Vec<Vec<T>> = (0..k).map(|j| chol.solve_upper(&eig.vector(j))).collect();
                Matrix::from_columns(&cols)
            }
        }
    }
}

/// Deleted-sample refits through the estimator itself.
struct Refit<'a, T, E: ?Sized> {
    est: &'a E,
    y: &'a [T],
    x: &'a Matrix<T>,
}

impl<T: Real, E: DirectionEstimator<T> + ?Sized> LeaveOneOut<T> for Refit<'_, T, E> {
    fn without(&self, i: usize) -> Result<Matrix<T>> {
        let y: Vec<T> = self
            .y
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &v)| v)
            .collect();
        self.est.estimate(&y, &self.x.without_row(i))
    }
}

/// `1 - r²` between `X B̂` and `X B̂_(i)` for every `i`.
fn deleted_complements<T: Real, E: DirectionEstimator<T> + ?Sized>(
    y: &[T],
    x: &Matrix<T>,
    est: &E,
    strategy: LooStrategy,
) -> Result<Vec<Result<T>>> {
    let n = x.rows();
    let p = x.cols();
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!("{} responses for {n} rows", y.len())));
    }
    if n < p + 2 {
        return Err(Error::DegenerateInput(format!(
            "leave-one-out influence needs n > p + 1, got n={n} p={p}"
        )));
    }
    let full = est.estimate(y, x)?;

    let down = match strategy {
        LooStrategy::Downdate => est.downdater(y, x).transpose()?,
        LooStrategy::Refit => None,
    };
    match down {
        Some(engine) => {
            let (_, cov) = crate::linalg::sample_mean_cov(x)?;
            let chol = Cholesky::new(&cov)?;
            Ok((0..n)
                .into_par_iter()
                .map(|i| {
                    let b = engine.without(i)?;
                    complement(canonical_correlations_cov(&chol, &full, &b)?)
                })
                .collect())
        }
        None => {
            let engine = Refit { est, y, x };
            let xb = x.matmul(&full)?;
            Ok((0..n)
                .into_par_iter()
                .map(|i| {
                    let b = engine.without(i)?;
                    complement(canonical_correlations(&xb, &x.matmul(&b)?)?)
                })
                .collect())
        }
    }
}

fn complement<T: Real>(cc: crate::linalg::CanonicalCorrelations<T>) -> Result<T> {
    if !cc.is_full_rank() {
        return Err(Error::RankDeficient {
            expected: cc.k,
            found: cc.rank_a.min(cc.rank_b),
        });
    }
    Ok(cc.average_complement().max(T::zero()))
}

fn assemble<T: Real>(
    raw: Vec<Result<T>>,
    scale: impl Fn(T) -> T,
    measure: InfluenceMeasure,
    method: &'static str,
) -> InfluenceReport<T> {
    let mut values = Vec::with_capacity(raw.len());
    let mut failures = Vec::new();
    for (i, r) in raw.into_iter().enumerate() {
        match r {
            Ok(c) => values.push(scale(c).max(T::zero())),
            Err(e) => {
                values.push(T::nan());
                failures.push((i, e));
            }
        }
    }
    let ok: Vec<T> = values.iter().copied().filter(|v| !v.is_nan()).collect();
    let mean = if ok.is_empty() {
        T::nan()
    } else {
        ok.iter().copied().sum::<T>() / T::from_usize_(ok.len())
    };
    InfluenceReport {
        values,
        mean,
        measure,
        method,
        failures,
    }
}

/// `ρ_i` for every observation.
pub fn influence_subspace<T: Real, E: DirectionEstimator<T> + ?Sized>(
    y: &[T],
    x: &Matrix<T>,
    est: &E,
    strategy: LooStrategy,
) -> Result<InfluenceReport<T>> {
    let raw = deleted_complements(y, x, est, strategy)?;
    let n1 = T::from_usize_(x.rows() - 1);
    let scale = n1 * n1;
    Ok(assemble(raw, |c| scale * c, InfluenceMeasure::Rho, est.label()))
}

/// `r_i` for the OLS slope.
pub fn influence_ols<T: Real>(y: &[T], x: &Matrix<T>) -> Result<InfluenceReport<T>> {
    let est = Estimator::Ols;
    let raw = deleted_complements(y, x, &est, LooStrategy::Downdate)?;
    let n = T::from_usize_(x.rows());
    let scale = n * n;
    Ok(assemble(
        raw,
        |c| scale * c / (T::one() - c),
        InfluenceMeasure::Ri,
        "OLS",
    ))
}

pub fn mean_influence<T: Real>(report: &InfluenceReport<T>) -> T {
    report.mean
}

/// Wraps an estimator and counts how often it is invoked.
pub struct CountingEstimator<E> {
    pub inner: E,
    pub calls: AtomicUsize,
}

impl<E> CountingEstimator<E> {
    pub fn new(inner: E) -> Self {
        Self {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn count(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl<T: Real, E: DirectionEstimator<T>> DirectionEstimator<T> for CountingEstimator<E> {
    fn label(&self) -> &'static str {
        self.inner.label()
    }

    fn estimate(&self, y: &[T], x: &Matrix<T>) -> Result<Matrix<T>> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.estimate(y, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Constant;
    impl DirectionEstimator<f64> for Constant {
        fn label(&self) -> &'static str {
            "const"
        }
        fn estimate(&self, _y: &[f64], x: &Matrix<f64>) -> Result<Matrix<f64>> {
            let mut d = vec![0.0; x.cols()];
            d[0] = 1.0;
            Ok(Matrix::column_vector(&d))
        }
    }

    fn small() -> (Vec<f64>, Matrix<f64>) {
        let x = Matrix::from_rows(&[
            vec![0.3, 1.2],
            vec![-1.1, 0.4],
            vec![0.8, -0.7],
            vec![1.9, 0.1],
            vec![-0.4, -1.3],
            vec![0.2, 0.9],
            vec![-1.6, -0.2],
        ])
        .unwrap();
        let y = vec![1.0, -0.5, 2.0, 3.1, -1.2, 0.7, -2.2];
        (y, x)
    }

    #[test]
    fn constant_direction_has_zero_influence() {
        let (y, x) = small();
        let r = influence_subspace(&y, &x, &Constant, LooStrategy::Downdate).unwrap();
        assert!(r.values.iter().all(|&v| v.abs() < 1e-12));
        assert!(r.mean.abs() < 1e-12);
    }

    #[test]
    fn too_few_rows() {
        let x = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!(matches!(
            influence_subspace(&[1.0, 2.0, 3.0], &x, &Estimator::Ols, LooStrategy::Refit),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn mean_of_values() {
        let r = InfluenceReport {
            values: vec![1.0, 2.0, 3.0],
            mean: 2.0,
            measure: InfluenceMeasure::Rho,
            method: "x",
            failures: vec![],
        };
        assert_eq!(mean_influence(&r), 2.0);
        assert_eq!(r.ranking(), vec![2, 1, 0]);
    }
}
