//! Grid search for the response-transformation parameter.
//!
//! A single search transforms `y` at every grid value, fits the chosen
//! estimator and scores the fit with one of three criteria:
//!
//! * `MinInfluence`: mean leave-one-out influence `ρ̄`, minimized,
//! * `MaxEigRatio`: share of the leading PHD eigenvalue `Λ`, maximized,
//! * `MaxEvidence`: the `k = 0` rank-test statistic `t₀`, maximized.
//!
//! The iterative search fixes the first direction and runs a second grid
//! search on the PHD matrix with that direction projected out.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dr::{rank_test, DrFit, Predictors};
use crate::error::{Error, Result};
use crate::influence::{influence_subspace, Estimator, LooStrategy};
use crate::linalg::{variance, Matrix};
use crate::scalar::Real;
use crate::transforms::TransformSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CriterionKind {
    MinInfluence,
    MaxEigRatio,
    MaxEvidence,
}

impl CriterionKind {
    pub fn label(self) -> &'static str {
        match self {
            CriterionKind::MinInfluence => "rho",
            CriterionKind::MaxEigRatio => "lambda",
            CriterionKind::MaxEvidence => "tk",
        }
    }

    pub fn minimizes(self) -> bool {
        matches!(self, CriterionKind::MinInfluence)
    }

    pub fn needs_eigenvalues(self) -> bool {
        !self.minimizes()
    }

    /// Whether `a` is strictly better than `b`.
    fn better<T: Real>(self, a: T, b: T) -> bool {
        if self.minimizes() {
            a < b
        } else {
            a > b
        }
    }
}

impl fmt::Display for CriterionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for CriterionKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rho" | "influence" | "min-influence" => Ok(CriterionKind::MinInfluence),
            "lambda" | "eig-ratio" => Ok(CriterionKind::MaxEigRatio),
            "tk" | "t0" | "evidence" => Ok(CriterionKind::MaxEvidence),
            other => Err(Error::InvalidConfig(format!("unknown criterion {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Fitter {
    Ols,
    Rlm,
    Phd,
}

impl Fitter {
    pub fn label(self) -> &'static str {
        match self {
            Fitter::Ols => "OLS",
            Fitter::Rlm => "RLM",
            Fitter::Phd => "PHD",
        }
    }
}

impl FromStr for Fitter {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ols" => Ok(Fitter::Ols),
            "rlm" => Ok(Fitter::Rlm),
            "phd" => Ok(Fitter::Phd),
            other => Err(Error::InvalidConfig(format!("unknown fitter {other:?}"))),
        }
    }
}

/// `Σ_{i≤K} |λ_i| / Σ_j |λ_j|` for eigenvalues sorted by decreasing `|λ|`.
pub fn criterion_eig_ratio<T: Real>(eigenvalues: &[T], k: usize) -> Result<T> {
    if k == 0 || k > eigenvalues.len() {
        return Err(Error::InvalidConfig(format!(
            "K={k} outside 1..={}",
            eigenvalues.len()
        )));
    }
    let total: T = eigenvalues.iter().map(|l| l.abs()).sum();
    if !(total > T::zero()) {
        return Err(Error::AllZeroSpectrum);
    }
    let top: T = eigenvalues[..k].iter().map(|l| l.abs()).sum();
    Ok(top / total)
}

/// Rank-test statistic `t₀ = n/(2 s²) Σ λ_j²`.
pub fn criterion_evidence<T: Real>(eigenvalues: &[T], n: usize, s2y: T) -> Result<T> {
    if !(s2y > T::zero()) {
        return Err(Error::ZeroVariance);
    }
    Ok(T::c(rank_test(eigenvalues, 0, n, s2y)?.statistic))
}

/// One grid point of a search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint<T> {
    pub param: T,
    /// `None` when the fit or the criterion failed at this value.
    pub value: Option<T>,
    /// Leading eigenvalue of the PHD matrix, PHD fitters only.
    pub leading_eigenvalue: Option<T>,
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult<T> {
    pub optimal_param: T,
    pub criterion_value: T,
    /// x-scale direction at the optimum.
    pub direction: Vec<T>,
    /// Unit z-scale direction at the optimum.
    pub z_direction: Vec<T>,
    /// Full fit at the optimum.
    pub fit: DrFit<T>,
    /// Transformed responses at the optimum.
    pub transformed: Vec<T>,
    pub trace: Vec<TracePoint<T>>,
    pub criterion: CriterionKind,
    pub fitter: &'static str,
}

impl<T: Real> SearchResult<T> {
    pub fn warnings(&self) -> Vec<String> {
        self.trace
            .iter()
            .filter_map(|t| t.warning.as_ref().map(|w| format!("param {}: {w}", t.param)))
            .collect()
    }
}

/// Knobs shared by every search.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchOptions {
    pub strategy: LooStrategy,
}

/// One stage of an iterative search. `fitter` is ignored after the first
/// stage, which always uses deflated PHD.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage<T> {
    pub spec: TransformSpec<T>,
    pub fitter: Fitter,
    pub criterion: CriterionKind,
}

impl<T: Real> Stage<T> {
    pub fn new(spec: TransformSpec<T>, fitter: Fitter, criterion: CriterionKind) -> Self {
        Self {
            spec,
            fitter,
            criterion,
        }
    }
}

fn check_compatible(fitter: &'static str, has_eigen: bool, criterion: CriterionKind) -> Result<()> {
    if criterion.needs_eigenvalues() && !has_eigen {
        return Err(Error::IncompatibleCriterion {
            criterion: criterion.label(),
            fitter,
        });
    }
    Ok(())
}

/// Fit without a transformation search; deflated priors are x-scale.
pub fn fit_with<T: Real>(est: &Estimator<T>, pred: &Predictors<T>, y: &[T]) -> Result<DrFit<T>> {
    match est {
        Estimator::Ols => pred.ols(y),
        Estimator::Rlm => pred.rlm(y),
        Estimator::Phd { k } => pred.phd(y, *k),
        Estimator::PhdDeflated { prior } => {
            let cols: Vec<Vec<T>> = prior
                .columns()
                .iter()
                .map(|g| pred.to_z_unit(g))
                .collect::<Result<_>>()?;
            pred.phd_deflated(y, &Matrix::from_columns(&cols)?)
        }
    }
}

struct Evaluated<T> {
    point: TracePoint<T>,
    fit: Option<(DrFit<T>, Vec<T>)>,
}

fn evaluate<T: Real>(
    pred: &Predictors<T>,
    y: &[T],
    spec: &TransformSpec<T>,
    est: &Estimator<T>,
    criterion: CriterionKind,
    opts: SearchOptions,
    param: T,
) -> Evaluated<T> {
    let attempt = || -> Result<(T, DrFit<T>, Vec<T>, Option<String>)> {
        let ty = spec.apply(y, param)?;
        let fit = fit_with(est, pred, &ty)?;
        if fit.zero_slope {
            return Err(Error::ZeroSlope);
        }
        let mut warning = fit.not_converged.then(|| "IRLS did not converge".to_string());
        let value = match criterion {
            CriterionKind::MinInfluence => {
                let report = influence_subspace(&ty, &pred.x, est, opts.strategy)?;
                if !report.failures.is_empty() {
                    warning = Some(format!(
                        "{} leave-one-out fits failed, first at observation {}: {}",
                        report.failures.len(),
                        report.failures[0].0,
                        report.failures[0].1
                    ));
                }
                report.mean
            }
            CriterionKind::MaxEigRatio => criterion_eig_ratio(&fit.eigenvalues, 1)?,
            CriterionKind::MaxEvidence => criterion_evidence(&fit.eigenvalues, pred.n(), variance(&ty))?,
        };
        if !value.is_finite() {
            return Err(Error::NonFinite("criterion value"));
        }
        Ok((value, fit, ty, warning))
    };
    match attempt() {
        Ok((value, fit, ty, warning)) => Evaluated {
            point: TracePoint {
                param,
                value: Some(value),
                leading_eigenvalue: fit.eigenvalues.first().copied(),
                warning,
            },
            fit: Some((fit, ty)),
        },
        Err(e) => Evaluated {
            point: TracePoint {
                param,
                value: None,
                leading_eigenvalue: None,
                warning: Some(e.to_string()),
            },
            fit: None,
        },
    }
}

/// Index of the extremum; equal values go to the smaller parameter.
fn pick_best<T: Real>(points: &[&TracePoint<T>], criterion: CriterionKind) -> Option<usize> {
    let mut best: Option<(usize, T, T)> = None;
    for (i, pt) in points.iter().enumerate() {
        let Some(v) = pt.value else { continue };
        let replace = match best {
            None => true,
            Some((_, bv, bp)) => criterion.better(v, bv) || (v == bv && pt.param < bp),
        };
        if replace {
            best = Some((i, v, pt.param));
        }
    }
    best.map(|b| b.0)
}

/// Grid search with a prepared estimator and predictor factorization.
pub fn search_with<T: Real>(
    pred: &Predictors<T>,
    y: &[T],
    spec: &TransformSpec<T>,
    est: &Estimator<T>,
    criterion: CriterionKind,
    opts: SearchOptions,
) -> Result<SearchResult<T>> {
    let label = match est {
        Estimator::Ols => "OLS",
        Estimator::Rlm => "RLM",
        Estimator::Phd { .. } => "PHD",
        Estimator::PhdDeflated { .. } => "PHD_deflated",
    };
    check_compatible(label, !matches!(est, Estimator::Ols | Estimator::Rlm), criterion)?;
    if y.len() != pred.n() {
        return Err(Error::DimensionMismatch(format!(
            "{} responses for {} rows",
            y.len(),
            pred.n()
        )));
    }

    let evaluated: Vec<Evaluated<T>> = spec
        .grid
        .par_iter()
        .map(|&param| evaluate(pred, y, spec, est, criterion, opts, param))
        .collect();

    let points: Vec<&TracePoint<T>> = evaluated.iter().map(|e| &e.point).collect();
    let best = pick_best(&points, criterion);
    let best = best.ok_or(Error::AllParamsFailed)?;

    let mut trace = Vec::with_capacity(evaluated.len());
    let mut chosen = None;
    for (i, ev) in evaluated.into_iter().enumerate() {
        if i == best {
            chosen = ev.fit;
        }
        trace.push(ev.point);
    }
    let (fit, transformed) = chosen.expect("best grid point has a fit");
    Ok(SearchResult {
        optimal_param: trace[best].param,
        criterion_value: trace[best].value.unwrap(),
        direction: fit.leading_direction(),
        z_direction: fit.leading_z_direction(),
        fit,
        transformed,
        trace,
        criterion,
        fitter: label,
    })
}

fn estimator_for<T: Real>(fitter: Fitter) -> Estimator<T> {
    match fitter {
        Fitter::Ols => Estimator::Ols,
        Fitter::Rlm => Estimator::Rlm,
        Fitter::Phd => Estimator::Phd { k: 1 },
    }
}

pub fn search_single<T: Real>(
    y: &[T],
    x: &Matrix<T>,
    spec: &TransformSpec<T>,
    fitter: Fitter,
    criterion: CriterionKind,
) -> Result<SearchResult<T>> {
    search_single_with(y, x, spec, fitter, criterion, SearchOptions::default())
}

pub fn search_single_with<T: Real>(
    y: &[T],
    x: &Matrix<T>,
    spec: &TransformSpec<T>,
    fitter: Fitter,
    criterion: CriterionKind,
    opts: SearchOptions,
) -> Result<SearchResult<T>> {
    check_compatible(fitter.label(), fitter == Fitter::Phd, criterion)?;
    let pred = Predictors::new(x)?;
    search_with(&pred, y, spec, &estimator_for(fitter), criterion, opts)
}

/// Second-direction search on deflated PHD given fixed x-scale priors.
pub fn search_deflated<T: Real>(
    pred: &Predictors<T>,
    y: &[T],
    spec: &TransformSpec<T>,
    priors: &Matrix<T>,
    criterion: CriterionKind,
    opts: SearchOptions,
) -> Result<SearchResult<T>> {
    let est = Estimator::PhdDeflated {
        prior: priors.clone(),
    };
    search_with(pred, y, spec, &est, criterion, opts)
}

/// Stage 1 then stage 2 on the deflated problem.
pub fn search_iterative<T: Real>(
    y: &[T],
    x: &Matrix<T>,
    stage1: &Stage<T>,
    stage2: &Stage<T>,
) -> Result<(SearchResult<T>, SearchResult<T>)> {
    let mut out = search_sequence(y, x, &[stage1.clone(), stage2.clone()], SearchOptions::default())?;
    let second = out.pop().unwrap();
    let first = out.pop().unwrap();
    Ok((first, second))
}

/// Any number of stages; stage `j > 0` deflates every earlier direction.
pub fn search_sequence<T: Real>(
    y: &[T],
    x: &Matrix<T>,
    stages: &[Stage<T>],
    opts: SearchOptions,
) -> Result<Vec<SearchResult<T>>> {
    let Some(first) = stages.first() else {
        return Err(Error::InvalidConfig("no search stages".into()));
    };
    if stages.len() > x.cols() {
        return Err(Error::InvalidConfig(format!(
            "{} stages for {} predictors",
            stages.len(),
            x.cols()
        )));
    }
    check_compatible(first.fitter.label(), first.fitter == Fitter::Phd, first.criterion)?;
    let pred = Predictors::new(x)?;
    let mut results = vec![search_with(
        &pred,
        y,
        &first.spec,
        &estimator_for(first.fitter),
        first.criterion,
        opts,
    )?];
    for stage in &stages[1..] {
        let cols: Vec<Vec<T>> = results.iter().map(|r| r.direction.clone()).collect();
        let priors = Matrix::from_columns(&cols)?;
        results.push(search_deflated(&pred, y, &stage.spec, &priors, stage.criterion, opts)?);
    }
    Ok(results)
}

/// Directions of a sequence of results as the columns of a `p x K` basis.
pub fn combined_basis<T: Real>(results: &[SearchResult<T>]) -> Result<Matrix<T>> {
    let cols: Vec<Vec<T>> = results.iter().map(|r| r.direction.clone()).collect();
    Matrix::from_columns(&cols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot;
    use crate::transforms::TransformFamily;

    fn lcg_normals(n: usize, seed: u64) -> Vec<f64> {
        // Box-Muller on a small LCG, test data only
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 + 0.5) / (1u64 << 53) as f64
        };
        (0..n)
            .map(|_| {
                let (u, v) = (next(), next());
                (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
            })
            .collect()
    }

    fn data(n: usize, p: usize, seed: u64) -> Matrix<f64> {
        Matrix::new(n, p, lcg_normals(n * p, seed)).unwrap()
    }

    #[test]
    fn eig_ratio_examples() {
        assert_eq!(criterion_eig_ratio(&[2.0, 1.0, 1.0], 1).unwrap(), 0.5);
        assert_eq!(criterion_eig_ratio(&[3.0, 0.0, 0.0], 1).unwrap(), 1.0);
        assert_eq!(criterion_eig_ratio(&[1.0, 1.0, 1.0, 1.0], 2).unwrap(), 0.5);
        assert_eq!(criterion_eig_ratio(&[-3.0, 1.0], 1).unwrap(), 0.75);
        assert_eq!(criterion_eig_ratio(&[0.0, 0.0], 1), Err(Error::AllZeroSpectrum));
    }

    #[test]
    fn evidence_examples() {
        assert_eq!(criterion_evidence(&[0.0, 0.0], 10, 1.0).unwrap(), 0.0);
        assert!((criterion_evidence(&[2.0f64, 1.0], 100, 2.0).unwrap() - 125.0).abs() < 1e-12);
        let a = criterion_evidence(&[0.3f64, -0.2, 0.1], 50, 1.7).unwrap();
        let b = criterion_evidence(&[0.6f64, -0.4, 0.2], 50, 1.7).unwrap();
        assert!((b - 4.0 * a).abs() < 1e-12 * b);
        assert_eq!(criterion_evidence(&[1.0], 10, 0.0), Err(Error::ZeroVariance));
    }

    #[test]
    fn incompatible_criteria_are_rejected() {
        let x = data(30, 2, 1);
        let y: Vec<f64> = (0..30).map(|i| x[(i, 0)]).collect();
        let spec = TransformSpec::with_default_grid(TransformFamily::MeanAbs);
        for c in [CriterionKind::MaxEigRatio, CriterionKind::MaxEvidence] {
            for f in [Fitter::Ols, Fitter::Rlm] {
                assert!(matches!(
                    search_single(&y, &x, &spec, f, c),
                    Err(Error::IncompatibleCriterion { .. })
                ));
            }
        }
    }

    #[test]
    fn single_grid_value() {
        let x = data(40, 3, 2);
        let y: Vec<f64> = (0..40).map(|i| x[(i, 0)].powi(2) + 0.1 * x[(i, 1)]).collect();
        let spec = TransformSpec::new(TransformFamily::MeanAbs, vec![0.4]).unwrap();
        let r = search_single(&y, &x, &spec, Fitter::Phd, CriterionKind::MaxEigRatio).unwrap();
        assert_eq!(r.optimal_param, 0.4);
        assert_eq!(r.trace.len(), 1);
    }

    fn pt(param: f64, value: Option<f64>) -> TracePoint<f64> {
        TracePoint {
            param,
            value,
            leading_eigenvalue: None,
            warning: None,
        }
    }

    #[test]
    fn ties_go_to_the_smallest_parameter() {
        let pts = [pt(0.5, Some(2.0)), pt(0.1, Some(2.0)), pt(0.3, None), pt(0.9, Some(1.0))];
        let refs: Vec<&TracePoint<f64>> = pts.iter().collect();
        assert_eq!(pick_best(&refs, CriterionKind::MaxEvidence), Some(1));
        assert_eq!(pick_best(&refs, CriterionKind::MinInfluence), Some(3));
        let none = [pt(0.0, None)];
        assert_eq!(pick_best(&[&none[0]], CriterionKind::MaxEigRatio), None);
    }

    #[test]
    fn extremum_matches_trace() {
        let x = data(60, 3, 4);
        let y: Vec<f64> = (0..60).map(|i| 1.0 + x[(i, 0)] + 0.3 * lcg_normals(60, 9)[i]).collect();
        let spec = TransformSpec::with_default_grid(TransformFamily::MeanAbs);
        for c in [
            CriterionKind::MinInfluence,
            CriterionKind::MaxEigRatio,
            CriterionKind::MaxEvidence,
        ] {
            let r = search_single(&y, &x, &spec, Fitter::Phd, c).unwrap();
            let vals: Vec<f64> = r.trace.iter().filter_map(|t| t.value).collect();
            let ext = if c.minimizes() {
                vals.iter().copied().fold(f64::INFINITY, f64::min)
            } else {
                vals.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            };
            assert_eq!(r.criterion_value, ext);
            assert!(spec.grid.contains(&r.optimal_param));
            if c == CriterionKind::MinInfluence {
                assert!(vals.iter().all(|&v| v >= 0.0));
            }
        }
    }

    #[test]
    fn failed_grid_points_are_skipped() {
        let x = data(40, 2, 5);
        // negative responses make every Box-Cox value fail
        let y: Vec<f64> = (0..40).map(|i| x[(i, 0)]).collect();
        let spec = TransformSpec::with_default_grid(TransformFamily::BoxCox);
        assert_eq!(
            search_single(&y, &x, &spec, Fitter::Ols, CriterionKind::MinInfluence).unwrap_err(),
            Error::AllParamsFailed
        );
        let shifted = spec.clone().with_shift(10.0);
        let r = search_single(&y, &x, &shifted, Fitter::Ols, CriterionKind::MinInfluence).unwrap();
        assert!(r.trace.iter().all(|t| t.value.is_some()));
    }

    #[test]
    fn iterative_directions_are_orthogonal_on_z_scale() {
        let x = data(120, 4, 6);
        let y: Vec<f64> = (0..120)
            .map(|i| x[(i, 0)].powi(3) / 3.0 - x[(i, 0)] * x[(i, 1)].powi(2))
            .collect();
        let t1 = TransformSpec::with_default_grid(TransformFamily::MeanAbs);
        let s1 = Stage::new(t1.clone(), Fitter::Phd, CriterionKind::MaxEvidence);
        let s2 = Stage::new(t1, Fitter::Phd, CriterionKind::MaxEvidence);
        let (a, b) = search_iterative(&y, &x, &s1, &s2).unwrap();
        assert!(dot(&a.z_direction, &b.z_direction).abs() < 1e-8);
        let basis = combined_basis(&[a, b]).unwrap();
        assert_eq!(basis.cols(), 2);
    }

    #[test]
    fn deflating_an_eigenvector_leaves_the_next_eigenvalue() {
        let x = data(80, 4, 7);
        let y: Vec<f64> = (0..80).map(|i| x[(i, 0)].powi(2) - 0.5 * x[(i, 2)].powi(2)).collect();
        let pred = Predictors::new(&x).unwrap();
        let spec = TransformSpec::new(TransformFamily::MeanAbs, vec![1.0]).unwrap();
        let full = pred.phd(&y, 2).unwrap();
        let prior = Matrix::column_vector(&full.directions.col(0));
        let r = search_deflated(
            &pred,
            &y,
            &spec,
            &prior,
            CriterionKind::MaxEigRatio,
            SearchOptions::default(),
        )
        .unwrap();
        let lead = r.trace[0].leading_eigenvalue.unwrap();
        assert!((lead - full.eigenvalues[1]).abs() < 1e-10);
    }

    #[test]
    fn rerun_is_bit_identical() {
        let x = data(50, 3, 8);
        let y: Vec<f64> = (0..50).map(|i| (x[(i, 0)] + x[(i, 1)]).sin()).collect();
        let spec = TransformSpec::with_default_grid(TransformFamily::MeanAbs);
        let a = search_single(&y, &x, &spec, Fitter::Phd, CriterionKind::MinInfluence).unwrap();
        let b = search_single(&y, &x, &spec, Fitter::Phd, CriterionKind::MinInfluence).unwrap();
        assert_eq!(a, b);
    }
}
