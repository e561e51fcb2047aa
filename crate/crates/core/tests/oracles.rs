mod common;

use common::*;
use otdr::dr::{ols_slope, phd_fit, Predictors};
use otdr::influence::{influence_ols, influence_subspace, Estimator, LooStrategy};
use otdr::linalg::{canonical_correlations, Matrix};

fn phd_leading(y: &[f64], x: &Rows) -> Vec<f64> {
    let h = hessian_oracle(y, x);
    let (vals, vecs) = jacobi_eigen(&h);
    let k = (0..vals.len()).max_by(|&a, &b| vals[a].abs().total_cmp(&vals[b].abs())).unwrap();
    let eta: Vec<f64> = vecs.iter().map(|r| r[k]).collect();
    mat_vec(&sym_power(&covariance(x), -0.5), &eta)
}

#[test]
fn hessian_matches_triple_loop() {
    for (n, p, seed) in [(30, 3, 1), (50, 5, 2), (12, 4, 3)] {
        let x = random_x(n, p, seed);
        let y: Vec<f64> = random_y(n, seed).iter().zip(0..n).map(|(e, i)| x[(i, 0)] * x[(i, 0)] + e).collect();
        let h = Predictors::new(&x).unwrap().hessian(&y).unwrap();
        let o = hessian_oracle(&y, &to_rows(&x));
        let scale = o.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        for a in 0..p {
            for b in 0..p {
                assert!((h[(a, b)] - o[a][b]).abs() <= 1e-12 * scale, "n={n} ({a},{b}) {} vs {}", h[(a, b)], o[a][b]);
            }
        }
    }
}

#[test]
fn ols_matches_normal_equations() {
    for (n, p, seed) in [(20, 3, 4), (50, 6, 5), (200, 10, 6)] {
        let x = random_x(n, p, seed);
        let y: Vec<f64> = random_y(n, seed).iter().enumerate().map(|(i, e)| 2.0 * x[(i, 0)] - x[(i, p - 1)] + e).collect();
        let fit = ols_slope(&y, &x).unwrap();
        let b = fit.slope.unwrap();
        let o = ols_oracle(&y, &to_rows(&x));
        for j in 0..p {
            assert!((b[j] - o[j]).abs() <= 1e-10 * o[j].abs().max(1.0), "{j}: {} vs {}", b[j], o[j]);
        }
        // the reported direction is parallel to the slope
        let d = fit.directions.col(0);
        let c = d.iter().zip(&o).map(|(a, b)| a * b).sum::<f64>()
            / (d.iter().map(|v| v * v).sum::<f64>() * o.iter().map(|v| v * v).sum::<f64>()).sqrt();
        assert!((c.abs() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn cca_matches_generalized_eigenproblem() {
    for seed in 0..5 {
        let n = 40;
        let a = random_x(n, 2, 100 + seed);
        let noise = random_x(n, 2, 200 + seed);
        let b = Matrix::from_fn(n, 2, |i, j| a[(i, 1 - j)] * 0.7 + noise[(i, j)] * (0.3 + j as f64));
        let cc = canonical_correlations(&a, &b).unwrap();
        let o = cca2_oracle(&to_rows(&a), &to_rows(&b));
        for k in 0..2 {
            assert!((cc.squared[k] - o[k]).abs() < 1e-8, "{k}: {} vs {}", cc.squared[k], o[k]);
        }
    }
}

#[test]
fn downdated_ols_influence_matches_naive_refit() {
    let (n, p) = (40, 4);
    let x = random_x(n, p, 7);
    let y: Vec<f64> = random_y(n, 7).iter().enumerate().map(|(i, e)| x[(i, 0)] + 0.5 * x[(i, 1)] + 0.3 * e).collect();
    let rep = influence_subspace(&y, &x, &Estimator::Ols, LooStrategy::Downdate).unwrap();
    let o = rho_oracle(&y, &to_rows(&x), |y, x| ols_oracle(y, x));
    for i in 0..n {
        assert!((rep.values[i] - o[i]).abs() <= 1e-10 * o[i].abs().max(1.0), "{i}: {} vs {}", rep.values[i], o[i]);
    }
}

#[test]
fn downdated_phd_influence_matches_naive_refit() {
    let (n, p) = (45, 3);
    let x = random_x(n, p, 8);
    let y: Vec<f64> = random_y(n, 8).iter().enumerate().map(|(i, e)| x[(i, 0)].powi(2) + 0.2 * e).collect();
    let rep = influence_subspace(&y, &x, &Estimator::Phd { k: 1 }, LooStrategy::Downdate).unwrap();
    let o = rho_oracle(&y, &to_rows(&x), phd_leading);
    for i in 0..n {
        assert!((rep.values[i] - o[i]).abs() <= 1e-10 * o[i].abs().max(1.0), "{i}: {} vs {}", rep.values[i], o[i]);
    }
}

#[test]
fn downdate_and_refit_agree_for_every_builtin() {
    let (n, p) = (30, 4);
    let x = random_x(n, p, 9);
    let y: Vec<f64> = random_y(n, 9).iter().enumerate().map(|(i, e)| (x[(i, 0)] + x[(i, 1)]).powi(2) + x[(i, 2)] + 0.3 * e).collect();
    let prior = Matrix::column_vector(&[1.0, 0.5, 0.0, 0.0]);
    for est in [
        Estimator::Ols,
        Estimator::Phd { k: 1 },
        Estimator::Phd { k: 2 },
        Estimator::PhdDeflated { prior },
    ] {
        let d = influence_subspace(&y, &x, &est, LooStrategy::Downdate).unwrap();
        let r = influence_subspace(&y, &x, &est, LooStrategy::Refit).unwrap();
        for i in 0..n {
            assert!((d.values[i] - r.values[i]).abs() <= 1e-10 * r.values[i].abs().max(1.0), "{est:?} {i}");
        }
    }
}

#[test]
fn ri_is_a_rescaling_of_the_same_correlation() {
    let (n, p) = (25, 3);
    let x = random_x(n, p, 10);
    let y: Vec<f64> = random_y(n, 10).iter().enumerate().map(|(i, e)| x[(i, 2)] - x[(i, 0)] + e).collect();
    let ri = influence_ols(&y, &x).unwrap();
    let o = rho_oracle(&y, &to_rows(&x), |y, x| ols_oracle(y, x));
    let nn = (n * n) as f64;
    let n1 = ((n - 1) * (n - 1)) as f64;
    for i in 0..n {
        let one_minus = o[i] / n1;
        let expect = nn * one_minus / (1.0 - one_minus);
        assert!(rel_diff(ri.values[i], expect) < 1e-8, "{i}");
    }
}

#[test]
fn phd_pipeline_composes_the_three_steps() {
    let x = Matrix::from_rows(&[
        vec![0.2, 1.0],
        vec![-1.3, 0.4],
        vec![0.9, -0.8],
        vec![1.5, 0.3],
        vec![-0.6, -1.1],
    ])
    .unwrap();
    let y = [1.0, 2.5, 0.3, 3.1, 1.7];
    let fit = phd_fit(&y, &x, 1).unwrap();
    let o = phd_leading(&y, &to_rows(&x));
    let d = fit.directions.col(0);
    let c = d.iter().zip(&o).map(|(a, b)| a * b).sum::<f64>()
        / (d.iter().map(|v| v * v).sum::<f64>() * o.iter().map(|v| v * v).sum::<f64>()).sqrt();
    assert!((c.abs() - 1.0).abs() < 1e-10);
}
