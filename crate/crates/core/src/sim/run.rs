//! Replicated experiments and the timing probe.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::influence::LooStrategy;
use crate::selection::{search_single_with, CriterionKind, Fitter, SearchOptions};
use crate::sim::method::{run_method, LaterResponse, Method, MethodOptions, ShiftRule};
use crate::sim::model::{gen_model, metric, ModelId, ModelSpec};
use crate::transforms::{TransformFamily, TransformSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub spec: ModelSpec,
    pub methods: Vec<Method>,
    pub reps: usize,
    pub base_seed: u64,
    pub workers: usize,
    pub shift: ShiftRule,
    pub later: LaterResponse,
    pub strategy: LooStrategy,
}

impl ExperimentConfig {
    pub fn new(spec: ModelSpec, methods: Vec<Method>, reps: usize, base_seed: u64) -> Self {
        Self {
            spec,
            methods,
            reps,
            base_seed,
            workers: 1,
            shift: ShiftRule::default(),
            later: LaterResponse::default(),
            strategy: LooStrategy::Downdate,
        }
    }
}

/// One replicate of one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub replicate: usize,
    pub seed: u64,
    pub dataset_hash: u64,
    /// `None` when the method failed on this replicate.
    pub metric: Option<f64>,
    pub chosen: Vec<Option<f64>>,
    pub error: Option<String>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub records: Vec<ReplicateRecord>,
    pub mean: f64,
    /// Sample standard deviation of the successful replicates.
    pub sd: f64,
    pub failures: usize,
    /// Per stage: counts of chosen parameter values, keyed by their decimal form.
    pub histogram: Vec<BTreeMap<String, usize>>,
    pub total_seconds: f64,
}

impl MethodSummary {
    pub fn values(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.metric).collect()
    }

    pub fn median(&self) -> f64 {
        median(&self.values())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub model: ModelId,
    pub n: usize,
    pub p: usize,
    pub reps: usize,
    pub base_seed: u64,
    pub shift: ShiftRule,
    pub later: LaterResponse,
    pub methods: Vec<MethodSummary>,
    /// Replicates whose sample had to be redrawn for positivity.
    pub regenerated: usize,
}

impl SimReport {
    pub fn method(&self, name: &str) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == name)
    }

    /// The report with every wall time zeroed, for reproducibility checks.
    pub fn without_timings(&self) -> SimReport {
        let mut r = self.clone();
        for m in &mut r.methods {
            m.total_seconds = 0.0;
            m.records.iter_mut().for_each(|rec| rec.seconds = 0.0);
        }
        r
    }
}

pub fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let sd = if v.len() > 1 {
        (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (m, sd)
}

/// Grid values print as their shortest decimal form, e.g. `-0.1`.
pub fn param_key(v: f64) -> String {
    format!("{v}")
}

struct Replicate {
    records: Vec<ReplicateRecord>,
    regenerated: bool,
}

fn run_replicate(cfg: &ExperimentConfig, r: usize) -> Replicate {
    let seed = cfg.base_seed.wrapping_add(r as u64);
    let opts = MethodOptions {
        shift: cfg.shift,
        later: cfg.later,
        search: SearchOptions {
            strategy: cfg.strategy,
        },
    };
    let data = gen_model(&cfg.spec, seed);
    let records = cfg
        .methods
        .iter()
        .map(|m| {
            let start = Instant::now();
            let out = data.as_ref().map_err(Clone::clone).and_then(|d| {
                let o = run_method(m, &d.y, &d.x, cfg.spec.k(), opts)?;
                let v = metric(&d.true_basis, &o.basis, &d.x)?;
                Ok((v, o.chosen))
            });
            let seconds = start.elapsed().as_secs_f64();
            let hash = data.as_ref().map_or(0, |d| d.fingerprint());
            match out {
                Ok((v, chosen)) => ReplicateRecord {
                    replicate: r,
                    seed,
                    dataset_hash: hash,
                    metric: Some(v),
                    chosen,
                    error: None,
                    seconds,
                },
                Err(e) => ReplicateRecord {
                    replicate: r,
                    seed,
                    dataset_hash: hash,
                    metric: None,
                    chosen: vec![None; m.stages.len()],
                    error: Some(e.to_string()),
                    seconds,
                },
            }
        })
        .collect();
    Replicate {
        records,
        regenerated: data.map_or(false, |d| d.regenerations > 0),
    }
}

/// Runs every method on replicates `base_seed + r`, `r < reps`. Results are
/// reduced in replicate order, so the report does not depend on `workers`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<SimReport> {
    if cfg.reps == 0 {
        return Err(Error::InvalidConfig("reps must be at least 1".into()));
    }
    if cfg.methods.is_empty() {
        return Err(Error::InvalidConfig("no methods".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;
    let reps: Vec<Replicate> = pool.install(|| {
        (0..cfg.reps)
            .into_par_iter()
            .map(|r| run_replicate(cfg, r))
            .collect()
    });

    let regenerated = reps.iter().filter(|r| r.regenerated).count();
    let mut per_method: Vec<Vec<ReplicateRecord>> = vec![Vec::with_capacity(cfg.reps); cfg.methods.len()];
    for rep in reps {
        for (j, rec) in rep.records.into_iter().enumerate() {
            per_method[j].push(rec);
        }
    }
    let methods = cfg
        .methods
        .iter()
        .zip(per_method)
        .map(|(m, records)| {
            let vals: Vec<f64> = records.iter().filter_map(|r| r.metric).collect();
            let (mean, sd) = mean_sd(&vals);
            let mut histogram = vec![BTreeMap::new(); m.stages.len()];
            for rec in &records {
                for (h, c) in histogram.iter_mut().zip(&rec.chosen) {
                    if let Some(v) = c {
                        *h.entry(param_key(*v)).or_insert(0) += 1;
                    }
                }
            }
            MethodSummary {
                method: m.name(),
                failures: records.len() - vals.len(),
                total_seconds: records.iter().map(|r| r.seconds).sum(),
                records,
                mean,
                sd,
                histogram,
            }
        })
        .collect();
    Ok(SimReport {
        model: cfg.spec.id,
        n: cfg.spec.n,
        p: cfg.spec.p,
        reps: cfg.reps,
        base_seed: cfg.base_seed,
        shift: cfg.shift,
        later: cfg.later,
        methods,
        regenerated,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub criterion: CriterionKind,
    pub n: usize,
    /// Median of the repeated wall times.
    pub seconds: f64,
    pub runs: Vec<f64>,
}

/// Wall time of one `T1`-PHD search on M2 data with `p = 10` for every
/// `(criterion, n)`, median of `repeats` runs.
pub fn timing_probe(
    criteria: &[CriterionKind],
    ns: &[usize],
    repeats: usize,
    seed: u64,
    strategy: LooStrategy,
) -> Result<Vec<TimingRow>> {
    let spec_t1 = TransformSpec::<f64>::with_default_grid(TransformFamily::MeanAbs);
    let opts = SearchOptions { strategy };
    let mut rows = Vec::new();
    for &n in ns {
        let data = gen_model(&ModelSpec::new(ModelId::M2, n, 10)?, seed)?;
        for &c in criteria {
            let mut runs = Vec::with_capacity(repeats);
            for _ in 0..repeats.max(1) {
                let start = Instant::now();
                search_single_with(&data.y, &data.x, &spec_t1, Fitter::Phd, c, opts)?;
                runs.push(start.elapsed().as_secs_f64());
            }
            rows.push(TimingRow {
                criterion: c,
                n,
                seconds: median(&runs),
                runs,
            });
        }
    }
    Ok(rows)
}
