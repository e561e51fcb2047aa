//! The simulation models. `X ~ N(0, I_p)` and `ε ~ N(0, 1)` independently.
//!
//! | id          | response                                                | K |
//! |-------------|---------------------------------------------------------|---|
//! | Motivating  | `2 + 1.2 βᵀx + 0.5ε`                                    | 1 |
//! | M1          | `2 exp(1 + 1.2 βᵀx + 0.5ε) + 0.3ε`                      | 1 |
//! | M2          | `1.5 sin(0.7 βᵀx + 0.25ε)`                              | 1 |
//! | M3          | `(β₁ᵀx)³/3 - (β₁ᵀx)(β₂ᵀx)² + 0.4ε`                      | 2 |
//! | M4          | `5 sin(0.5 β₁ᵀx) + 0.5 (0.5 β₂ᵀx)³ + 0.3ε`              | 2 |
//!
//! The same `ε` enters twice in M1, and about 6% of M1 responses are
//! negative, so Box-Cox methods need a shift (see `ShiftRule`). Coefficient vectors are zero padded to
//! `p`, or truncated when `p` is smaller than their printed length (only
//! trailing zeros are ever dropped).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{avg_sq_canonical_cor, Matrix};
use crate::sim::rng::NormalStream;

const X_STREAM: u64 = 0;
const EPS_STREAM: u64 = 1;
/// Regeneration attempts before giving up on a positive M1 sample.
pub const MAX_REGENERATIONS: u32 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelId {
    Motivating,
    M1,
    M2,
    M3,
    M4,
}

impl ModelId {
    pub fn label(self) -> &'static str {
        match self {
            ModelId::Motivating => "motivating",
            ModelId::M1 => "M1",
            ModelId::M2 => "M2",
            ModelId::M3 => "M3",
            ModelId::M4 => "M4",
        }
    }

    pub fn k(self) -> usize {
        match self {
            ModelId::M3 | ModelId::M4 => 2,
            _ => 1,
        }
    }

    fn coefficients(self) -> Vec<Vec<f64>> {
        match self {
            ModelId::Motivating => vec![vec![1.0, 0.0, -2.0]],
            ModelId::M1 => vec![vec![1.0, 0.0, 1.5, 0.0, 0.5]],
            ModelId::M2 => vec![vec![1.0, 0.0, -1.0, 0.5]],
            ModelId::M3 => vec![vec![1.0], vec![0.0, 1.0]],
            ModelId::M4 => vec![vec![1.0, 2.0, -3.0], vec![1.0, 1.0, 0.0, -2.0]],
        }
    }

    /// Smallest `p` that keeps every nonzero coefficient.
    pub fn min_p(self) -> usize {
        self.coefficients()
            .iter()
            .map(|c| c.iter().rposition(|&v| v != 0.0).map_or(0, |i| i + 1))
            .max()
            .unwrap_or(1)
    }

    fn response(self, u: &[f64], eps: f64) -> f64 {
        match self {
            ModelId::Motivating => 2.0 + 1.2 * u[0] + 0.5 * eps,
            ModelId::M1 => 2.0 * (1.0 + 1.2 * u[0] + 0.5 * eps).exp() + 0.3 * eps,
            ModelId::M2 => 1.5 * (0.7 * u[0] + 0.25 * eps).sin(),
            ModelId::M3 => u[0].powi(3) / 3.0 - u[0] * u[1] * u[1] + 0.4 * eps,
            ModelId::M4 => 5.0 * (0.5 * u[0]).sin() + 0.5 * (0.5 * u[1]).powi(3) + 0.3 * eps,
        }
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ModelId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "motivating" | "m0" | "linear" => Ok(ModelId::Motivating),
            "m1" | "1" => Ok(ModelId::M1),
            "m2" | "2" => Ok(ModelId::M2),
            "m3" | "3" => Ok(ModelId::M3),
            "m4" | "4" => Ok(ModelId::M4),
            other => Err(Error::InvalidConfig(format!("unknown model id {other:?}"))),
        }
    }
}

/// How a sample with non-positive responses is handled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PositivityPolicy {
    /// Keep the sample as drawn.
    Keep,
    /// Redraw with the next derived seed until every response is positive.
    Regenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub id: ModelId,
    pub n: usize,
    pub p: usize,
    /// Drop the noise term (test hook).
    pub noiseless: bool,
    pub positivity: PositivityPolicy,
}

impl ModelSpec {
    /// Samples are kept as drawn; see `with_positivity`.
    pub fn new(id: ModelId, n: usize, p: usize) -> Result<Self> {
        if p < id.min_p() {
            return Err(Error::InvalidConfig(format!(
                "{id} needs p >= {}, got {p}",
                id.min_p()
            )));
        }
        if n <= p + 1 {
            return Err(Error::InvalidConfig(format!("{id} needs n > p + 1, got n={n} p={p}")));
        }
        Ok(Self {
            id,
            n,
            p,
            noiseless: false,
            positivity: PositivityPolicy::Keep,
        })
    }

    pub fn with_positivity(mut self, policy: PositivityPolicy) -> Self {
        self.positivity = policy;
        self
    }

    pub fn noiseless(mut self) -> Self {
        self.noiseless = true;
        self
    }

    pub fn k(&self) -> usize {
        self.id.k()
    }

    /// `p x K` true basis.
    pub fn true_basis(&self) -> Matrix<f64> {
        let cols: Vec<Vec<f64>> = self
            .id
            .coefficients()
            .into_iter()
            .map(|c| (0..self.p).map(|j| c.get(j).copied().unwrap_or(0.0)).collect())
            .collect();
        Matrix::from_columns(&cols).expect("coefficient columns")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Matrix<f64>,
    pub y: Vec<f64>,
    pub true_basis: Matrix<f64>,
    pub seed: u64,
    /// Redraws needed before the sample was accepted.
    pub regenerations: u32,
}

impl Dataset {
    /// FNV-1a over the bit patterns of `x` and `y`.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        for v in self.x.as_slice().iter().chain(&self.y) {
            for b in v.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        }
        h
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }
}

fn draw(spec: &ModelSpec, seed: u64, attempt: u32) -> (Matrix<f64>, Vec<f64>) {
    let (n, p) = (spec.n, spec.p);
    let base = 2 * attempt as u64;
    let x = Matrix::new(n, p, NormalStream::new(seed, base + X_STREAM).normals(n * p))
        .expect("finite normals");
    let mut eps = NormalStream::new(seed, base + EPS_STREAM).normals(n);
    if spec.noiseless {
        eps.iter_mut().for_each(|e| *e = 0.0);
    }
    let beta = spec.true_basis();
    let y = (0..n)
        .map(|i| {
            let u: Vec<f64> = (0..beta.cols())
                .map(|k| (0..p).map(|j| x[(i, j)] * beta[(j, k)]).sum())
                .collect();
            spec.id.response(&u, eps[i])
        })
        .collect();
    (x, y)
}

/// Sample for `(spec, seed)`. Redraws use independent streams of the same
/// seed, so the result is still a pure function of its inputs.
pub fn gen_model(spec: &ModelSpec, seed: u64) -> Result<Dataset> {
    for attempt in 0..=MAX_REGENERATIONS {
        let (x, y) = draw(spec, seed, attempt);
        let ok = match spec.positivity {
            PositivityPolicy::Keep => true,
            PositivityPolicy::Regenerate => y.iter().all(|&v| v > 0.0),
        };
        if ok {
            return Ok(Dataset {
                x,
                y,
                true_basis: spec.true_basis(),
                seed,
                regenerations: attempt,
            });
        }
    }
    Err(Error::DegenerateInput(format!(
        "no positive sample for {} after {MAX_REGENERATIONS} redraws",
        spec.id
    )))
}

/// Average squared canonical correlation between `X B_true` and `X B_est`;
/// for `K = 1` the squared correlation.
pub fn metric(true_basis: &Matrix<f64>, est_basis: &Matrix<f64>, x: &Matrix<f64>) -> Result<f64> {
    avg_sq_canonical_cor(&x.matmul(true_basis)?, &x.matmul(est_basis)?)
}
