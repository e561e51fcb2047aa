//! Dimension reduction estimators: OLS and Huber M-estimator slopes,
//! principal Hessian directions (PHD), deflated PHD for iterative searches,
//! and the chi-square rank test on PHD eigenvalues.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::linalg::{dot, mean, norm, sym_eigen, variance, Cholesky, Matrix, Whitening};
use crate::scalar::Real;

/// Huber tuning constant, in units of the robust residual scale.
pub const HUBER_K: f64 = 1.345;
/// Consistency factor turning a MAD into a normal-scale estimate.
pub const MAD_SCALE: f64 = 1.4826;
pub const RLM_MAX_ITER: usize = 50;
pub const RLM_TOL: f64 = 1e-8;
/// Fitted-value spread below this fraction of `sd(y)` is reported as a zero slope.
pub const ZERO_SLOPE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DrMethod {
    Ols,
    Rlm,
    Phd,
    PhdDeflated,
}

impl DrMethod {
    pub fn label(self) -> &'static str {
        match self {
            DrMethod::Ols => "OLS",
            DrMethod::Rlm => "RLM",
            DrMethod::Phd => "PHD",
            DrMethod::PhdDeflated => "PHD_deflated",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DrFit<T> {
    /// Estimated directions on the x-scale, one per column.
    pub directions: Matrix<T>,
    /// Unit directions on the standardized scale; `directions = Σ̂^{-1/2} z_directions`.
    pub z_directions: Matrix<T>,
    /// All `p` PHD eigenvalues in decreasing absolute order; empty for slopes.
    pub eigenvalues: Vec<T>,
    pub method: DrMethod,
    /// Raw regression slope for OLS/RLM.
    pub slope: Option<Vec<T>>,
    /// The slope vanished (e.g. a response symmetric about the index).
    pub zero_slope: bool,
    /// IRLS hit its iteration cap.
    pub not_converged: bool,
}

impl<T: Real> DrFit<T> {
    pub fn k(&self) -> usize {
        self.directions.cols()
    }

    pub fn leading_direction(&self) -> Vec<T> {
        self.directions.col(0)
    }

    pub fn leading_z_direction(&self) -> Vec<T> {
        self.z_directions.col(0)
    }
}

/// Predictor-side quantities that do not depend on the response, computed
/// once and shared across every response transformation.
#[derive(Debug, Clone)]
pub struct Predictors<T> {
    pub x: Matrix<T>,
    pub whitening: Whitening<T>,
    pub z: Matrix<T>,
    pub chol: Cholesky<T>,
}

impl<T: Real> Predictors<T> {
    pub fn new(x: &Matrix<T>) -> Result<Self> {
        if x.rows() <= x.cols() {
            return Err(Error::DegenerateInput(format!(
                "need n > p, got n={} p={}",
                x.rows(),
                x.cols()
            )));
        }
        let whitening = Whitening::from_data(x)?;
        let z = whitening.apply(x);
        let chol = Cholesky::new(&whitening.cov)?;
        Ok(Self {
            x: x.clone(),
            whitening,
            z,
            chol,
        })
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn p(&self) -> usize {
        self.x.cols()
    }

    /// Unit z-scale vector `Σ̂^{1/2} γ / ‖Σ̂^{1/2} γ‖` for an x-scale direction.
    pub fn to_z_unit(&self, gamma: &[T]) -> Result<Vec<T>> {
        let mut u = self.whitening.sqrt_cov.mul_vec(gamma);
        let nu = norm(&u);
        if !(nu > T::zero()) {
            return Err(Error::ZeroSlope);
        }
        u.iter_mut().for_each(|v| *v = *v / nu);
        Ok(u)
    }

    fn check_response(&self, y: &[T]) -> Result<()> {
        if y.len() != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "{} responses for {} rows",
                y.len(),
                self.n()
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("responses"));
        }
        Ok(())
    }

    /// Sample covariance of the predictors with `y` (divisor `n - 1`).
    pub fn cov_xy(&self, y: &[T]) -> Vec<T> {
        let n = self.n();
        let ybar = mean(y);
        let mut out = vec![T::zero(); self.p()];
        for i in 0..n {
            let dy = y[i] - ybar;
            for ((o, &xv), &m) in out.iter_mut().zip(self.x.row(i)).zip(&self.whitening.mean) {
                *o = *o + (xv - m) * dy;
            }
        }
        let denom = T::from_usize_(n - 1);
        out.iter_mut().for_each(|o| *o = *o / denom);
        out
    }

    fn package_slope(&self, y: &[T], b: Vec<T>, method: DrMethod) -> DrFit<T> {
        let p = self.p();
        let bz_raw = self.whitening.sqrt_cov.mul_vec(&b);
        let spread = norm(&bz_raw);
        let sd_y = variance(y).max(T::zero()).sqrt();
        let zero_slope = !(spread > T::c(ZERO_SLOPE_TOL) * sd_y) || spread == T::zero();
        let bz: Vec<T> = if zero_slope {
            vec![T::zero(); p]
        } else {
            bz_raw.iter().map(|&v| v / spread).collect()
        };
        let direction = self.whitening.inv_sqrt_cov.mul_vec(&bz);
        DrFit {
            directions: Matrix::column_vector(&direction),
            z_directions: Matrix::column_vector(&bz),
            eigenvalues: Vec::new(),
            method,
            slope: Some(b),
            zero_slope,
            not_converged: false,
        }
    }

    pub fn ols(&self, y: &[T]) -> Result<DrFit<T>> {
        self.check_response(y)?;
        let b = self.chol.solve(&self.cov_xy(y));
        Ok(self.package_slope(y, b, DrMethod::Ols))
    }

    /// `y_i - ȳ - (x_i - x̄)ᵀ b` for the least-squares slope `b`.
    pub fn ols_residuals(&self, y: &[T]) -> Result<Vec<T>> {
        self.check_response(y)?;
        let b = self.chol.solve(&self.cov_xy(y));
        let ybar = mean(y);
        Ok((0..self.n())
            .map(|i| {
                let fit = self
                    .x
                    .row(i)
                    .iter()
                    .zip(&self.whitening.mean)
                    .zip(&b)
                    .fold(T::zero(), |acc, ((&xv, &m), &bj)| acc + (xv - m) * bj);
                y[i] - ybar - fit
            })
            .collect())
    }

    pub fn rlm(&self, y: &[T]) -> Result<DrFit<T>> {
        self.check_response(y)?;
        let (b, converged) = huber_irls(&self.x, y, self.chol.solve(&self.cov_xy(y)))?;
        let mut fit = self.package_slope(y, b, DrMethod::Rlm);
        fit.not_converged = !converged;
        Ok(fit)
    }

    pub fn hessian(&self, y: &[T]) -> Result<Matrix<T>> {
        self.check_response(y)?;
        phd_hessian(y, &self.z)
    }

    pub fn phd(&self, y: &[T], k: usize) -> Result<DrFit<T>> {
        let p = self.p();
        if k == 0 || k > p {
            return Err(Error::InvalidConfig(format!("K={k} outside 1..={p}")));
        }
        let h = self.hessian(y)?;
        self.phd_from_matrix(&h, k, DrMethod::Phd)
    }

    /// PHD with the z-scale prior directions projected out of the Hessian.
    pub fn phd_deflated(&self, y: &[T], prior_z: &Matrix<T>) -> Result<DrFit<T>> {
        let h = self.hessian(y)?;
        let basis = orthonormalize(&prior_z.columns());
        let mut m = h;
        for u in &basis {
            m = deflate(&m, u)?;
        }
        self.phd_from_matrix(&m, 1, DrMethod::PhdDeflated)
    }

    fn phd_from_matrix(&self, m: &Matrix<T>, k: usize, method: DrMethod) -> Result<DrFit<T>> {
        let eig = sym_eigen(m)?;
        let eta = eig.eigenvectors.leading_columns(k);
        let directions = self.whitening.inv_sqrt_cov.matmul(&eta)?;
        Ok(DrFit {
            directions,
            z_directions: eta,
            eigenvalues: eig.eigenvalues,
            method,
            slope: None,
            zero_slope: false,
            not_converged: false,
        })
    }
}

/// Gram-Schmidt on columns; near-null columns are dropped.
pub fn orthonormalize<T: Real>(cols: &[Vec<T>]) -> Vec<Vec<T>> {
    let mut basis: Vec<Vec<T>> = Vec::new();
    for c in cols {
        let orig = norm(c);
        let mut v = c.clone();
        for _ in 0..2 {
            for q in &basis {
                let d = dot(q, &v);
                v.iter_mut().zip(q).for_each(|(a, &b)| *a = *a - d * b);
            }
        }
        let nv = norm(&v);
        if nv > T::c(1e-10) * orig {
            v.iter_mut().for_each(|a| *a = *a / nv);
            basis.push(v);
        }
    }
    basis
}

/// Huber M-estimator slope by iteratively reweighted least squares, started
/// from the given slope. Returns the slope and whether it converged.
fn huber_irls<T: Real>(x: &Matrix<T>, y: &[T], start: Vec<T>) -> Result<(Vec<T>, bool)> {
    let n = x.rows();
    let p = x.cols();
    let k = T::c(HUBER_K);
    let mut b = start;
    let mut intercept = {
        let xbar: Vec<T> = (0..p).map(|j| mean(&x.col(j))).collect();
        mean(y) - dot(&xbar, &b)
    };
    for _ in 0..RLM_MAX_ITER {
        let resid: Vec<T> = (0..n)
            .map(|i| y[i] - intercept - dot(x.row(i), &b))
            .collect();
        let scale = T::c(MAD_SCALE) * mad(&resid);
        let y_scale = variance(y).max(T::zero()).sqrt();
        if !(scale > T::epsilon() * y_scale.max(T::min_positive_value())) {
            // residuals vanish: the least squares fit is already exact
            return Ok((b, true));
        }
        let w: Vec<T> = resid
            .iter()
            .map(|&r| {
                let a = r.abs();
                if a <= k * scale {
                    T::one()
                } else {
                    k * scale / a
                }
            })
            .collect();
        let (new_intercept, new_b) = weighted_ls(x, y, &w)?;
        let change = norm(
            &new_b
                .iter()
                .zip(&b)
                .map(|(&a, &c)| a - c)
                .chain(std::iter::once(new_intercept - intercept))
                .collect::<Vec<_>>(),
        );
        let size = norm(&b).hypot(intercept).max(T::min_positive_value());
        b = new_b;
        intercept = new_intercept;
        if change < T::c(RLM_TOL) * size {
            return Ok((b, true));
        }
    }
    Ok((b, false))
}

fn weighted_ls<T: Real>(x: &Matrix<T>, y: &[T], w: &[T]) -> Result<(T, Vec<T>)> {
    let n = x.rows();
    let p = x.cols();
    let wsum: T = w.iter().copied().sum();
    let mut xbar = vec![T::zero(); p];
    let mut ybar = T::zero();
    for i in 0..n {
        for (m, &v) in xbar.iter_mut().zip(x.row(i)) {
            *m = *m + w[i] * v;
        }
        ybar = ybar + w[i] * y[i];
    }
    xbar.iter_mut().for_each(|m| *m = *m / wsum);
    ybar = ybar / wsum;
    let mut xtx = Matrix::zeros(p, p);
    let mut xty = vec![T::zero(); p];
    let mut c = vec![T::zero(); p];
    for i in 0..n {
        for ((ci, &v), &m) in c.iter_mut().zip(x.row(i)).zip(&xbar) {
            *ci = v - m;
        }
        let dy = y[i] - ybar;
        for a in 0..p {
            let wa = w[i] * c[a];
            xty[a] = xty[a] + wa * dy;
            for bb in 0..=a {
                xtx[(a, bb)] = xtx[(a, bb)] + wa * c[bb];
            }
        }
    }
    for a in 0..p {
        for bb in 0..a {
            xtx[(bb, a)] = xtx[(a, bb)];
        }
    }
    let b = Cholesky::new(&xtx)?.solve(&xty);
    Ok((ybar - dot(&xbar, &b), b))
}

fn median<T: Real>(v: &mut [T]) -> T {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) * T::c(0.5)
    }
}

/// Median absolute deviation about the median (unscaled).
fn mad<T: Real>(v: &[T]) -> T {
    let mut s = v.to_vec();
    let med = median(&mut s);
    let mut dev: Vec<T> = v.iter().map(|&x| (x - med).abs()).collect();
    median(&mut dev)
}

pub fn ols_slope<T: Real>(y: &[T], x: &Matrix<T>) -> Result<DrFit<T>> {
    Predictors::new(x)?.ols(y)
}

pub fn rlm_slope<T: Real>(y: &[T], x: &Matrix<T>) -> Result<DrFit<T>> {
    Predictors::new(x)?.rlm(y)
}

/// `(1/n) Σ (y_i - ȳ) z_i z_iᵀ`, accumulated in row order.
pub fn phd_hessian<T: Real>(y: &[T], z: &Matrix<T>) -> Result<Matrix<T>> {
    let n = z.rows();
    let p = z.cols();
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!("{} responses for {n} rows", y.len())));
    }
    if y.iter().any(|v| !v.is_finite()) || !z.is_finite() {
        return Err(Error::NonFinite("PHD input"));
    }
    let ybar = mean(y);
    let mut h = Matrix::zeros(p, p);
    for i in 0..n {
        let dy = y[i] - ybar;
        let zi = z.row(i);
        for a in 0..p {
            let w = dy * zi[a];
            for b in 0..=a {
                h[(a, b)] = h[(a, b)] + w * zi[b];
            }
        }
    }
    let nf = T::from_usize_(n);
    for a in 0..p {
        for b in 0..=a {
            let v = h[(a, b)] / nf;
            h[(a, b)] = v;
            h[(b, a)] = v;
        }
    }
    Ok(h)
}

pub fn phd_fit<T: Real>(y: &[T], x: &Matrix<T>, k: usize) -> Result<DrFit<T>> {
    Predictors::new(x)?.phd(y, k)
}

pub fn phd_fit_deflated<T: Real>(y: &[T], x: &Matrix<T>, prior_z: &Matrix<T>) -> Result<DrFit<T>> {
    Predictors::new(x)?.phd_deflated(y, prior_z)
}

/// `Q M Q` with `Q = I - u uᵀ`. `u` is renormalized when its norm is within
/// `1e-6` of one and rejected otherwise.
pub fn deflate<T: Real>(m: &Matrix<T>, u: &[T]) -> Result<Matrix<T>> {
    let p = m.rows();
    if !m.is_square() || u.len() != p {
        return Err(Error::DimensionMismatch("deflation vector length".into()));
    }
    let nu = norm(u);
    if !((nu - T::one()).abs() <= T::c(1e-6)) {
        return Err(Error::NotUnit { norm: nu.to_f64_() });
    }
    let u: Vec<T> = u.iter().map(|&v| v / nu).collect();
    // Q M Q = M - u (Mu)ᵀ - (Mu) uᵀ + (uᵀMu) u uᵀ
    let mu = m.mul_vec(&u);
    let umu = dot(&u, &mu);
    let out = Matrix::from_fn(p, p, |i, j| {
        m[(i, j)] - u[i] * mu[j] - mu[i] * u[j] + umu * u[i] * u[j]
    });
    Ok(out.symmetrize())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankTest {
    pub k: usize,
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// `t_k = n / (2 s²_y) Σ_{j>k} λ_j²` against a chi-square with
/// `(p - k + 1)(p - k) / 2` degrees of freedom.
pub fn rank_test<T: Real>(eigenvalues: &[T], k: usize, n: usize, s2y: T) -> Result<RankTest> {
    let p = eigenvalues.len();
    if k >= p {
        return Err(Error::InvalidConfig(format!("rank test needs k < p, got k={k} p={p}")));
    }
    if !(s2y > T::zero()) {
        return Err(Error::ZeroVariance);
    }
    let mut sorted: Vec<f64> = eigenvalues.iter().map(|v| v.to_f64_()).collect();
    sorted.sort_by(|a, b| b.abs().partial_cmp(&a.abs()).unwrap_or(std::cmp::Ordering::Equal));
    let tail: f64 = sorted[k..].iter().map(|l| l * l).sum();
    let statistic = n as f64 / (2.0 * s2y.to_f64_()) * tail;
    let df = (p - k + 1) * (p - k) / 2;
    let p_value = chi_square_sf(statistic, df);
    Ok(RankTest {
        k,
        statistic,
        df,
        p_value,
    })
}

/// Rank tests for every `k = 0..p-1`.
pub fn rank_test_table<T: Real>(eigenvalues: &[T], n: usize, s2y: T) -> Result<Vec<RankTest>> {
    (0..eigenvalues.len())
        .map(|k| rank_test(eigenvalues, k, n, s2y))
        .collect()
}

fn chi_square_sf(x: f64, df: usize) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    match ChiSquared::new(df as f64) {
        Ok(d) => d.sf(x).clamp(0.0, 1.0),
        Err(_) => f64::NAN,
    }
}
