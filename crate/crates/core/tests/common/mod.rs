//! Independent reference computations for the integration tests. Nothing
//! here calls the library's linear algebra.

#![allow(dead_code)]

use otdr::linalg::Matrix;
use otdr::sim::rng::NormalStream;

pub type Rows = Vec<Vec<f64>>;

pub fn to_rows(m: &Matrix<f64>) -> Rows {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

pub fn random_x(n: usize, p: usize, seed: u64) -> Matrix<f64> {
    Matrix::new(n, p, NormalStream::new(seed, 0).normals(n * p)).unwrap()
}

pub fn random_y(n: usize, seed: u64) -> Vec<f64> {
    NormalStream::new(seed, 1).normals(n)
}

pub fn col_means(x: &Rows) -> Vec<f64> {
    let n = x.len() as f64;
    (0..x[0].len())
        .map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n)
        .collect()
}

/// Covariance with divisor `n - 1`, plain double loop.
pub fn covariance(x: &Rows) -> Rows {
    let n = x.len();
    let p = x[0].len();
    let m = col_means(x);
    let mut c = vec![vec![0.0; p]; p];
    for a in 0..p {
        for b in 0..p {
            let s: f64 = x.iter().map(|r| (r[a] - m[a]) * (r[b] - m[b])).sum();
            c[a][b] = s / (n - 1) as f64;
        }
    }
    c
}

/// Cyclic Jacobi rotations; returns eigenvalues and eigenvectors (columns).
pub fn jacobi_eigen(a: &Rows) -> (Vec<f64>, Rows) {
    let p = a.len();
    let mut m = a.clone();
    let mut v = vec![vec![0.0; p]; p];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..p)
            .flat_map(|i| (0..p).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for i in 0..p {
            for j in i + 1..p {
                if m[i][j].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[j][j] - m[i][i]) / (2.0 * m[i][j]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..p {
                    let (mki, mkj) = (m[k][i], m[k][j]);
                    m[k][i] = c * mki - s * mkj;
                    m[k][j] = s * mki + c * mkj;
                }
                for k in 0..p {
                    let (mik, mjk) = (m[i][k], m[j][k]);
                    m[i][k] = c * mik - s * mjk;
                    m[j][k] = s * mik + c * mjk;
                }
                for row in v.iter_mut() {
                    let (vki, vkj) = (row[i], row[j]);
                    row[i] = c * vki - s * vkj;
                    row[j] = s * vki + c * vkj;
                }
            }
        }
    }
    ((0..p).map(|i| m[i][i]).collect(), v)
}

/// Symmetric `A^power` through the Jacobi eigendecomposition.
pub fn sym_power(a: &Rows, power: f64) -> Rows {
    let (vals, vecs) = jacobi_eigen(a);
    let p = a.len();
    let mut out = vec![vec![0.0; p]; p];
    for k in 0..p {
        let w = vals[k].powf(power);
        for i in 0..p {
            for j in 0..p {
                out[i][j] += vecs[i][k] * w * vecs[j][k];
            }
        }
    }
    out
}

/// `(1/n) Σ_i (y_i - ȳ) z_i z_iᵀ` by explicit triple loop over `(i, a, b)`.
pub fn hessian_oracle(y: &[f64], x: &Rows) -> Rows {
    let n = x.len();
    let p = x[0].len();
    let m = col_means(x);
    let s = sym_power(&covariance(x), -0.5);
    let z: Rows = x
        .iter()
        .map(|r| (0..p).map(|a| (0..p).map(|b| s[a][b] * (r[b] - m[b])).sum()).collect())
        .collect();
    let ybar = y.iter().sum::<f64>() / n as f64;
    let mut h = vec![vec![0.0; p]; p];
    for i in 0..n {
        for a in 0..p {
            for b in 0..p {
                h[a][b] += (y[i] - ybar) * z[i][a] * z[i][b];
            }
        }
    }
    h.iter_mut().for_each(|r| r.iter_mut().for_each(|v| *v /= n as f64));
    h
}

/// Gaussian elimination with partial pivoting.
pub fn solve(a: &Rows, b: &[f64]) -> Vec<f64> {
    let p = a.len();
    let mut m: Rows = a.iter().zip(b).map(|(r, &bi)| {
        let mut r = r.clone();
        r.push(bi);
        r
    }).collect();
    for c in 0..p {
        let piv = (c..p).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
        m.swap(c, piv);
        for r in c + 1..p {
            let f = m[r][c] / m[c][c];
            for k in c..=p {
                m[r][k] -= f * m[c][k];
            }
        }
    }
    let mut x = vec![0.0; p];
    for c in (0..p).rev() {
        let s: f64 = (c + 1..p).map(|k| m[c][k] * x[k]).sum();
        x[c] = (m[c][p] - s) / m[c][c];
    }
    x
}

/// Slope from the centered normal equations `X̃ᵀX̃ b = X̃ᵀỹ`.
pub fn ols_oracle(y: &[f64], x: &Rows) -> Vec<f64> {
    let n = x.len();
    let p = x[0].len();
    let m = col_means(x);
    let ybar = y.iter().sum::<f64>() / n as f64;
    let mut xtx = vec![vec![0.0; p]; p];
    let mut xty = vec![0.0; p];
    for i in 0..n {
        for a in 0..p {
            xty[a] += (x[i][a] - m[a]) * (y[i] - ybar);
            for b in 0..p {
                xtx[a][b] += (x[i][a] - m[a]) * (x[i][b] - m[b]);
            }
        }
    }
    solve(&xtx, &xty)
}

fn cross_cov(a: &Rows, b: &Rows) -> Rows {
    let n = a.len();
    let ma = col_means(a);
    let mb = col_means(b);
    (0..a[0].len())
        .map(|i| {
            (0..b[0].len())
                .map(|j| (0..n).map(|k| (a[k][i] - ma[i]) * (b[k][j] - mb[j])).sum::<f64>() / (n - 1) as f64)
                .collect()
        })
        .collect()
}

fn inv2(m: &Rows) -> Rows {
    let d = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    vec![vec![m[1][1] / d, -m[0][1] / d], vec![-m[1][0] / d, m[0][0] / d]]
}

fn mul(a: &Rows, b: &Rows) -> Rows {
    (0..a.len())
        .map(|i| (0..b[0].len()).map(|j| (0..b.len()).map(|k| a[i][k] * b[k][j]).sum()).collect())
        .collect()
}

/// Squared canonical correlations of two `n x 2` blocks: the eigenvalues of
/// `S_aa⁻¹ S_ab S_bb⁻¹ S_ba`, largest first.
pub fn cca2_oracle(a: &Rows, b: &Rows) -> [f64; 2] {
    let m = mul(&mul(&inv2(&cross_cov(a, a)), &cross_cov(a, b)), &mul(&inv2(&cross_cov(b, b)), &cross_cov(b, a)));
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    [tr / 2.0 + disc, tr / 2.0 - disc]
}

/// Squared correlation of two vectors.
pub fn cor2(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let sab: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let saa: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum();
    let sbb: f64 = b.iter().map(|y| (y - mb) * (y - mb)).sum();
    sab * sab / (saa * sbb)
}

pub fn mat_vec(x: &Rows, v: &[f64]) -> Vec<f64> {
    x.iter().map(|r| r.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

pub fn without_row(x: &Rows, i: usize) -> Rows {
    x.iter().enumerate().filter(|(k, _)| *k != i).map(|(_, r)| r.clone()).collect()
}

/// Naive `ρ_i` for a one-direction estimator: refit on every deleted sample
/// and compare `Xb` with `Xb_(i)` on the full predictors.
pub fn rho_oracle(y: &[f64], x: &Rows, fit: impl Fn(&[f64], &Rows) -> Vec<f64>) -> Vec<f64> {
    let n = x.len();
    let full = mat_vec(x, &fit(y, x));
    (0..n)
        .map(|i| {
            let yi: Vec<f64> = y.iter().enumerate().filter(|(k, _)| *k != i).map(|(_, v)| *v).collect();
            let b = fit(&yi, &without_row(x, i));
            let r2 = cor2(&full, &mat_vec(x, &b));
            ((n - 1) * (n - 1)) as f64 * (1.0 - r2)
        })
        .collect()
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}
