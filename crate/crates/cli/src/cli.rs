use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use otdr::influence::LooStrategy;
use otdr::selection::CriterionKind;
use otdr::sim::{LaterResponse, Method, ModelId, ShiftRule};
use otdr::transforms::grid_from_range;
use serde::Serialize;

use crate::error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "otdr", version, about = "Response-transformed OLS/PHD dimension reduction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate directions on a CSV dataset.
    Fit(FitArgs),
    /// Per-observation leave-one-out influence.
    Influence(InfluenceArgs),
    /// Replicated simulation on one of the built-in models.
    Simulate(SimulateArgs),
    /// Wall time of single searches per criterion and sample size.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DataArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// Response column name.
    #[arg(long)]
    pub response: String,
    /// Predictor column names; every other column when omitted.
    #[arg(long, value_delimiter = ',')]
    pub predictors: Vec<String>,
    /// Data rows (1-based, after the header) left out of the estimation.
    #[arg(long, value_delimiter = ',')]
    pub exclude_rows: Vec<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CommonArgs {
    /// Output directory, created if needed.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads.
    #[arg(long, env = "OTDR_WORKERS")]
    pub workers: Option<usize>,
}

impl CommonArgs {
    pub fn workers(&self) -> usize {
        self.workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
            .max(1)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Method, e.g. `bc-ols`, `t1phd-rho`, `t2phd-tk|bc-ols`.
    #[arg(long, default_value = "bc-ols")]
    pub method: String,
    /// Grid `lo:hi:step`; repeat once per stage, first executed stage first.
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Vec<String>,
    /// Number of directions (1 or 2). Only plain `phd` may differ from the
    /// number of stages.
    #[arg(long)]
    pub k: Option<usize>,
    /// `auto`, `none`, `min-to:C`, `min-to-sd:C`, or a number always added
    /// to `y` before Box-Cox powers.
    #[arg(long, default_value = "auto", allow_hyphen_values = true)]
    pub shift: String,
    /// Response of the stages after the first: `y` or `residual`.
    #[arg(long, default_value = "y")]
    pub later: String,
    /// Leave-one-out strategy for ρ: `downdate` or `refit`.
    #[arg(long, default_value = "downdate")]
    pub strategy: String,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InfluenceArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Single-stage method: `ols`, `rlm`, `phd`, `bc-ols`, `t1phd-rho`, ...
    #[arg(long, default_value = "ols")]
    pub method: String,
    /// Transformation parameter; searched over the grid when omitted.
    #[arg(long, allow_negative_numbers = true)]
    pub param: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<String>,
    #[arg(long, default_value = "auto", allow_hyphen_values = true)]
    pub shift: String,
    #[arg(long, default_value = "downdate")]
    pub strategy: String,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    /// `motivating`, `M1`, `M2`, `M3` or `M4`.
    #[arg(long)]
    pub model: String,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 10)]
    pub p: usize,
    #[arg(long, default_value_t = 200)]
    pub reps: usize,
    /// Comma-separated method names.
    #[arg(long, value_delimiter = ',', required = true)]
    pub methods: Vec<String>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value = "auto", allow_hyphen_values = true)]
    pub shift: String,
    #[arg(long, default_value = "y")]
    pub later: String,
    #[arg(long, default_value = "downdate")]
    pub strategy: String,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BenchArgs {
    /// Sample sizes.
    #[arg(long, value_delimiter = ',', default_values_t = [100usize, 200, 500])]
    pub n: Vec<usize>,
    /// Criteria: `rho`, `lambda`, `tk`.
    #[arg(long, value_delimiter = ',', default_values_t = ["rho".to_string(), "lambda".into(), "tk".into()])]
    pub criteria: Vec<String>,
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value = "refit")]
    pub strategy: String,
    #[command(flatten)]
    pub common: CommonArgs,
}

pub fn parse_method(s: &str) -> Result<Method> {
    Ok(Method::from_str(s)?)
}

pub fn parse_model(s: &str) -> Result<ModelId> {
    Ok(ModelId::from_str(s)?)
}

pub fn parse_later(s: &str) -> Result<LaterResponse> {
    Ok(LaterResponse::from_str(s)?)
}

pub fn parse_criterion(s: &str) -> Result<CriterionKind> {
    Ok(CriterionKind::from_str(s)?)
}

pub fn parse_strategy(s: &str) -> Result<LooStrategy> {
    match s.to_ascii_lowercase().as_str() {
        "downdate" => Ok(LooStrategy::Downdate),
        "refit" => Ok(LooStrategy::Refit),
        other => Err(CliError::InvalidArgs(format!("unknown strategy {other:?}"))),
    }
}

pub fn parse_shift(s: &str) -> Result<ShiftRule> {
    let bad = || CliError::InvalidArgs(format!("bad shift {s:?}"));
    let num = |v: &str| v.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(bad);
    let s = s.trim().to_ascii_lowercase();
    match s.as_str() {
        "auto" => Ok(ShiftRule::default()),
        "none" => Ok(ShiftRule::None),
        _ => {
            if let Some(c) = s.strip_prefix("min-to-sd:") {
                Ok(ShiftRule::MinToSd(num(c)?))
            } else if let Some(c) = s.strip_prefix("min-to:") {
                Ok(ShiftRule::MinTo(num(c)?))
            } else {
                Ok(ShiftRule::Add(num(&s)?))
            }
        }
    }
}

/// `lo:hi:step`, inclusive of both ends.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| CliError::InvalidArgs(format!("bad grid {s:?}, expected lo:hi:step")))?;
    match nums.as_slice() {
        [lo, hi, step] => Ok(grid_from_range(*lo, *hi, *step)?),
        _ => Err(CliError::InvalidArgs(format!("bad grid {s:?}, expected lo:hi:step"))),
    }
}

/// 1-based rows to 0-based indices, checked against `n`.
pub fn exclusion_indices(rows: &[usize], n: usize) -> Result<Vec<usize>> {
    let mut idx = Vec::with_capacity(rows.len());
    for &r in rows {
        if r == 0 || r > n {
            return Err(CliError::InvalidArgs(format!("excluded row {r} outside 1..={n}")));
        }
        if !idx.contains(&(r - 1)) {
            idx.push(r - 1);
        }
    }
    idx.sort_unstable();
    Ok(idx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shift_forms() {
        assert_eq!(parse_shift("auto").unwrap(), ShiftRule::MinTo(1.0));
        assert_eq!(parse_shift("none").unwrap(), ShiftRule::None);
        assert_eq!(parse_shift("min-to:0.5").unwrap(), ShiftRule::MinTo(0.5));
        assert_eq!(parse_shift("min-to-sd:2").unwrap(), ShiftRule::MinToSd(2.0));
        assert_eq!(parse_shift("3.5").unwrap(), ShiftRule::Add(3.5));
        assert!(parse_shift("lots").is_err());
    }

    #[test]
    fn grids() {
        assert_eq!(parse_grid("-1:1:0.5").unwrap(), [-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert!(parse_grid("0:1").is_err());
        assert!(parse_grid("0:1:0").is_err());
    }

    #[test]
    fn exclusions() {
        assert_eq!(exclusion_indices(&[3, 1, 3], 5).unwrap(), [0, 2]);
        assert!(exclusion_indices(&[0], 5).is_err());
        assert!(exclusion_indices(&[6], 5).is_err());
    }
}
