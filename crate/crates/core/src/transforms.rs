//! One-parameter response transformations.
//!
//! * Box-Cox `BC(y; ω)`, log at `ω = 0`.
//! * Mean-centered absolute `T1(y; c) = c(y - ȳ) + (1 - c)|y - ȳ|`.
//! * Mean-centered absolute Box-Cox `T2(y; ω) = |BC(y; ω) - mean(BC(y; ω))|`.
//!
//! Population means are replaced by sample means of the vector being
//! transformed, recomputed for each parameter value.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::mean;
use crate::scalar::Real;

/// `|ω|` below this uses the log branch.
pub const LOG_CUTOFF: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TransformFamily {
    BoxCox,
    MeanAbs,
    MeanAbsBoxCox,
}

impl TransformFamily {
    /// Admissible parameter range.
    pub fn range(self) -> (f64, f64) {
        match self {
            TransformFamily::BoxCox | TransformFamily::MeanAbsBoxCox => (-2.0, 2.0),
            TransformFamily::MeanAbs => (0.0, 1.0),
        }
    }

    /// Step-0.1 grid spanning the whole range.
    pub fn default_grid(self) -> Vec<f64> {
        let (lo, hi) = self.range();
        grid_from_range(lo, hi, 0.1).expect("static grid")
    }

    /// Whether the family takes logs or powers of the raw response.
    pub fn needs_positive(self) -> bool {
        !matches!(self, TransformFamily::MeanAbs)
    }

    pub fn label(self) -> &'static str {
        match self {
            TransformFamily::BoxCox => "bc",
            TransformFamily::MeanAbs => "t1",
            TransformFamily::MeanAbsBoxCox => "t2",
        }
    }
}

impl fmt::Display for TransformFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for TransformFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bc" | "boxcox" | "box-cox" => Ok(TransformFamily::BoxCox),
            "t1" | "meanabs" => Ok(TransformFamily::MeanAbs),
            "t2" | "meanabsboxcox" => Ok(TransformFamily::MeanAbsBoxCox),
            other => Err(Error::InvalidConfig(format!("unknown transform family {other:?}"))),
        }
    }
}

/// `lo, lo + step, ..., hi`, rounded to ten decimals so that the grid values
/// print as their nominal decimals.
pub fn grid_from_range(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !lo.is_finite() || !hi.is_finite() || hi < lo {
        return Err(Error::InvalidGrid(format!("lo={lo} hi={hi} step={step}")));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    Ok((0..count)
        .map(|i| ((lo + i as f64 * step) * 1e10).round() / 1e10)
        .collect())
}

/// A transformation family with its parameter grid and an optional explicit
/// pre-shift `y -> y + shift` applied before Box-Cox powers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformSpec<T> {
    pub family: TransformFamily,
    pub grid: Vec<T>,
    pub shift: Option<T>,
}

impl<T: Real> TransformSpec<T> {
    pub fn new(family: TransformFamily, grid: Vec<T>) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::InvalidGrid("empty grid".into()));
        }
        if grid.iter().any(|g| !g.is_finite()) {
            return Err(Error::InvalidGrid("non-finite grid value".into()));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidGrid("grid must be strictly increasing".into()));
        }
        let (lo, hi) = family.range();
        for g in &grid {
            check_range(g.to_f64_(), lo, hi)?;
        }
        Ok(Self {
            family,
            grid,
            shift: None,
        })
    }

    pub fn with_default_grid(family: TransformFamily) -> Self {
        let grid = family.default_grid().into_iter().map(T::c).collect();
        Self::new(family, grid).expect("default grid is valid")
    }

    pub fn with_shift(mut self, shift: T) -> Self {
        self.shift = Some(shift);
        self
    }

    /// Transforms `y` at one parameter value.
    pub fn apply(&self, y: &[T], param: T) -> Result<Vec<T>> {
        let shifted;
        let y = match (self.shift, self.family.needs_positive()) {
            (Some(s), true) => {
                shifted = y.iter().map(|&v| v + s).collect::<Vec<_>>();
                &shifted[..]
            }
            _ => y,
        };
        match self.family {
            TransformFamily::BoxCox => {
                let (lo, hi) = self.family.range();
                check_range(param.to_f64_(), lo, hi)?;
                box_cox(y, param)
            }
            TransformFamily::MeanAbs => t1(y, param),
            TransformFamily::MeanAbsBoxCox => t2(y, param),
        }
    }
}

fn check_range(v: f64, lo: f64, hi: f64) -> Result<()> {
    let slack = 1e-12;
    if v < lo - slack || v > hi + slack || !v.is_finite() {
        return Err(Error::ParamOutOfRange { value: v, lo, hi });
    }
    Ok(())
}

fn check_positive<T: Real>(y: &[T]) -> Result<()> {
    let bad: Vec<usize> = y
        .iter()
        .enumerate()
        .filter(|(_, &v)| !(v > T::zero()))
        .map(|(i, _)| i)
        .collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Error::NonPositiveResponse { indices: bad })
    }
}

pub fn box_cox<T: Real>(y: &[T], omega: T) -> Result<Vec<T>> {
    check_positive(y)?;
    let out: Vec<T> = if omega.abs() < T::c(LOG_CUTOFF) {
        y.iter().map(|v| v.ln()).collect()
    } else {
        y.iter().map(|&v| (v.powf(omega) - T::one()) / omega).collect()
    };
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("Box-Cox output"));
    }
    Ok(out)
}

pub fn t1<T: Real>(y: &[T], c: T) -> Result<Vec<T>> {
    check_range(c.to_f64_(), 0.0, 1.0)?;
    let m = mean(y);
    let one_minus = T::one() - c;
    Ok(y.iter()
        .map(|&v| {
            let d = v - m;
            c * d + one_minus * d.abs()
        })
        .collect())
}

pub fn t2<T: Real>(y: &[T], omega: T) -> Result<Vec<T>> {
    check_range(omega.to_f64_(), -2.0, 2.0)?;
    let b = box_cox(y, omega)?;
    let m = mean(&b);
    Ok(b.iter().map(|&v| (v - m).abs()).collect())
}
