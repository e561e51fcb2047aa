//! Method names and their evaluation on one dataset.
//!
//! A method is one or more stages joined by `|`, read as "conditional on":
//! in `t2phd-tk|bc-ols` the right-hand stage runs first and the left-hand
//! stage searches the PHD matrix with that direction projected out.
//!
//! Stage names: `ols`, `rlm`, `phd` (no transformation), `bc-ols`,
//! `bc-rlm` (Box-Cox with minimum influence), and `{t1,t2,bc}phd-{rho,lambda,tk}`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dr::{DrFit, Predictors};
use crate::error::{Error, Result};
use crate::influence::Estimator;
use crate::linalg::{mean, Matrix};
use crate::selection::{fit_with, search_with, CriterionKind, Fitter, SearchOptions, SearchResult};
use crate::transforms::{TransformFamily, TransformSpec};

/// How Box-Cox families treat responses that are not all positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ShiftRule {
    /// Leave `y` alone; non-positive values make every grid point fail.
    None,
    /// When `min(y) <= 0`, add `offset - min(y)` so the minimum becomes `offset`.
    MinTo(f64),
    /// When `min(y) <= 0`, add `offset · sd(y) - min(y)`.
    MinToSd(f64),
    /// Always add the given amount.
    Add(f64),
}

impl ShiftRule {
    pub fn shift_for(self, y: &[f64]) -> Option<f64> {
        if let ShiftRule::Add(s) = self {
            return Some(s);
        }
        let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
        if lo > 0.0 {
            return None;
        }
        match self {
            ShiftRule::None | ShiftRule::Add(_) => None,
            ShiftRule::MinTo(c) => Some(c - lo),
            ShiftRule::MinToSd(c) => {
                let m = mean(y);
                let sd = (y.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (y.len() - 1) as f64).sqrt();
                Some(c * sd - lo)
            }
        }
    }
}

impl Default for ShiftRule {
    fn default() -> Self {
        ShiftRule::MinTo(1.0)
    }
}

/// Response fed to the stages after the first.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum LaterResponse {
    /// The observed `y`, as in the first stage.
    #[default]
    Response,
    /// Residuals of the least-squares fit of `y` on `X`. The PHD matrix is
    /// unchanged by this, but the transformed residuals are not.
    OlsResidual,
}

impl FromStr for LaterResponse {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "y" | "response" => Ok(LaterResponse::Response),
            "residual" | "ols-residual" => Ok(LaterResponse::OlsResidual),
            other => Err(Error::InvalidConfig(format!("unknown stage response {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MethodOptions {
    pub shift: ShiftRule,
    pub later: LaterResponse,
    pub search: SearchOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StageMethod {
    /// `None` fits the raw response.
    pub family: Option<TransformFamily>,
    pub fitter: Fitter,
    pub criterion: Option<CriterionKind>,
}

impl fmt::Display for StageMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let fit = self.fitter.label().to_ascii_lowercase();
        match (self.family, self.criterion) {
            (None, _) => f.write_str(&fit),
            (Some(fam), Some(c)) if self.fitter == Fitter::Phd => write!(f, "{fam}{fit}-{c}"),
            (Some(fam), Some(CriterionKind::MinInfluence)) => write!(f, "{fam}-{fit}"),
            (Some(fam), Some(c)) => write!(f, "{fam}-{fit}-{c}"),
            (Some(fam), None) => write!(f, "{fam}-{fit}"),
        }
    }
}

impl FromStr for StageMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let bad = || Error::InvalidConfig(format!("unknown method {s:?}"));
        let plain = |fitter| StageMethod {
            family: None,
            fitter,
            criterion: None,
        };
        match s.as_str() {
            "ols" => return Ok(plain(Fitter::Ols)),
            "rlm" => return Ok(plain(Fitter::Rlm)),
            "phd" => return Ok(plain(Fitter::Phd)),
            _ => {}
        }
        // {fam}phd-{crit}
        for fam in ["t1", "t2", "bc"] {
            if let Some(rest) = s.strip_prefix(&format!("{fam}phd-")) {
                return Ok(StageMethod {
                    family: Some(fam.parse()?),
                    fitter: Fitter::Phd,
                    criterion: Some(rest.parse().map_err(|_| bad())?),
                });
            }
        }
        // {fam}-{ols|rlm}[-rho]
        let parts: Vec<&str> = s.split('-').collect();
        match parts.as_slice() {
            [fam, fit] | [fam, fit, "rho"] if *fit == "ols" || *fit == "rlm" => Ok(StageMethod {
                family: Some(fam.parse().map_err(|_| bad())?),
                fitter: fit.parse()?,
                criterion: Some(CriterionKind::MinInfluence),
            }),
            [_, fit, crit] if *fit == "ols" || *fit == "rlm" => Err(Error::IncompatibleCriterion {
                criterion: crit.parse::<CriterionKind>().map_err(|_| bad())?.label(),
                fitter: if *fit == "ols" { "OLS" } else { "RLM" },
            }),
            _ => Err(bad()),
        }
    }
}

/// Stages in execution order (first found direction first).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Method {
    pub stages: Vec<StageMethod>,
}

impl Method {
    pub fn name(&self) -> String {
        self.stages
            .iter()
            .rev()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join("|")
    }

    pub fn needs_positive(&self) -> bool {
        self.stages
            .iter()
            .any(|s| s.family.is_some_and(|f| f.needs_positive()))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let stages: Vec<StageMethod> = s.split('|').rev().map(str::parse).collect::<Result<_>>()?;
        if stages.is_empty() {
            return Err(Error::InvalidConfig("empty method".into()));
        }
        for later in &stages[1..] {
            if later.fitter != Fitter::Phd {
                return Err(Error::InvalidConfig(format!(
                    "{s:?}: stages after the first must be PHD"
                )));
            }
        }
        Ok(Method { stages })
    }
}

/// What one stage produced.
#[derive(Debug, Clone, PartialEq)]
pub struct StageOutcome {
    /// Shift added to the stage's response before its transformation.
    pub shift: Option<f64>,
    /// The grid search, for transformed stages.
    pub search: Option<SearchResult<f64>>,
    /// The fit whose directions the stage contributed.
    pub fit: DrFit<f64>,
}

/// What a method produced on one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodOutcome {
    /// `p x K` estimated basis, one column per stage (or the top `K` PHD
    /// directions for single-stage plain PHD).
    pub basis: Matrix<f64>,
    /// Chosen parameter per stage, `None` for untransformed stages.
    pub chosen: Vec<Option<f64>>,
    pub stages: Vec<StageOutcome>,
}

/// Runs `method` on `(y, x)` over the default grids. A single plain `phd`
/// stage returns the top `k` directions; every other stage contributes one
/// direction.
pub fn run_method(
    method: &Method,
    y: &[f64],
    x: &Matrix<f64>,
    k: usize,
    opts: MethodOptions,
) -> Result<MethodOutcome> {
    run_method_on_grids(method, y, x, k, opts, &[])
}

/// As [`run_method`], with `grids[j]` replacing the default grid of stage
/// `j` (execution order) when present and non-empty.
pub fn run_method_on_grids(
    method: &Method,
    y: &[f64],
    x: &Matrix<f64>,
    k: usize,
    opts: MethodOptions,
    grids: &[Vec<f64>],
) -> Result<MethodOutcome> {
    let pred = Predictors::new(x)?;
    let residuals = match opts.later {
        LaterResponse::OlsResidual if method.stages.len() > 1 => Some(pred.ols_residuals(y)?),
        _ => None,
    };
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    let mut chosen = Vec::new();
    let mut stages = Vec::new();
    let single = method.stages.len() == 1;
    for (j, stage) in method.stages.iter().enumerate() {
        let y = match &residuals {
            Some(r) if j > 0 => r.as_slice(),
            _ => y,
        };
        let est = if j == 0 {
            match stage.fitter {
                Fitter::Ols => Estimator::Ols,
                Fitter::Rlm => Estimator::Rlm,
                Fitter::Phd => Estimator::Phd {
                    k: if single && stage.family.is_none() { k } else { 1 },
                },
            }
        } else {
            Estimator::PhdDeflated {
                prior: Matrix::from_columns(&dirs)?,
            }
        };
        match (stage.family, stage.criterion) {
            (Some(family), Some(criterion)) => {
                let mut spec = match grids.get(j) {
                    Some(g) if !g.is_empty() => TransformSpec::new(family, g.clone())?,
                    _ => TransformSpec::with_default_grid(family),
                };
                let shift = if family.needs_positive() { opts.shift.shift_for(y) } else { None };
                if let Some(s) = shift {
                    spec = spec.with_shift(s);
                }
                let r = search_with(&pred, y, &spec, &est, criterion, opts.search)?;
                dirs.push(r.direction.clone());
                chosen.push(Some(r.optimal_param));
                stages.push(StageOutcome {
                    shift,
                    fit: r.fit.clone(),
                    search: Some(r),
                });
            }
            _ => {
                let fit = fit_with(&est, &pred, y)?;
                if fit.zero_slope {
                    return Err(Error::ZeroSlope);
                }
                dirs.extend(fit.directions.columns());
                chosen.push(None);
                stages.push(StageOutcome {
                    shift: None,
                    search: None,
                    fit,
                });
            }
        }
    }
    Ok(MethodOutcome {
        basis: Matrix::from_columns(&dirs)?,
        chosen,
        stages,
    })
}
