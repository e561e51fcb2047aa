use otdr::dr::{rank_test_table, DrFit, Predictors};
use otdr::influence::{influence_subspace, Estimator};
use otdr::linalg::{dot, mean, variance, Matrix};
use otdr::selection::{search_with, Fitter, SearchOptions};
use otdr::sim::{
    run_experiment, run_method_on_grids, timing_probe, ExperimentConfig, Method, MethodOptions, ModelSpec,
    StageMethod,
};
use otdr::transforms::{box_cox, TransformFamily, TransformSpec};
use serde_json::json;

use crate::cli::*;
use crate::data::{ingest_csv, Dataset};
use crate::error::{CliError, Result};
use crate::output::{num, opt, strings, Outputs};

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::InvalidArgs(format!("worker pool: {e}")))
}

fn load(a: &DataArgs) -> Result<(Dataset, Dataset, Vec<usize>)> {
    let full = ingest_csv(&a.data, &a.response, &a.predictors)?;
    let excluded = exclusion_indices(&a.exclude_rows, full.n())?;
    let used = full.without_rows(&excluded);
    Ok((full, used, excluded))
}

fn resolve_k(method: &Method, k: Option<usize>) -> Result<usize> {
    if let Some(k) = k {
        if !(1..=2).contains(&k) {
            return Err(CliError::InvalidArgs(format!("--k must be 1 or 2, got {k}")));
        }
    }
    let plain_phd = method.stages.len() == 1 && method.stages[0].family.is_none() && method.stages[0].fitter == Fitter::Phd;
    if plain_phd {
        return Ok(k.unwrap_or(1));
    }
    match k {
        Some(k) if k != method.stages.len() => Err(CliError::InvalidArgs(format!(
            "{method} finds {} direction(s) but --k is {k}; add or remove `|` stages",
            method.stages.len()
        ))),
        _ => Ok(method.stages.len()),
    }
}

/// `t(y)` for every row of `y_all`, with any centering taken from the rows
/// in `used` so excluded rows sit on the same scale as the fitted ones.
fn transform_all(
    family: TransformFamily,
    shift: Option<f64>,
    param: f64,
    y_all: &[f64],
    used: &[f64],
) -> Vec<Option<f64>> {
    let s = if family.needs_positive() { shift.unwrap_or(0.0) } else { 0.0 };
    let bc = |v: f64| box_cox(&[v + s], param).ok().map(|b| b[0]);
    match family {
        TransformFamily::BoxCox => y_all.iter().map(|&v| bc(v)).collect(),
        TransformFamily::MeanAbs => {
            let m = mean(used);
            y_all
                .iter()
                .map(|&v| Some(param * (v - m) + (1.0 - param) * (v - m).abs()))
                .collect()
        }
        TransformFamily::MeanAbsBoxCox => {
            let b: Option<Vec<f64>> = used.iter().map(|&v| bc(v)).collect();
            let Some(b) = b else { return vec![None; y_all.len()] };
            let m = mean(&b);
            y_all.iter().map(|&v| bc(v).map(|t| (t - m).abs())).collect()
        }
    }
}

pub fn fit(a: &FitArgs) -> Result<Outputs> {
    let method = parse_method(&a.method)?;
    let opts = MethodOptions {
        shift: parse_shift(&a.shift)?,
        later: parse_later(&a.later)?,
        search: SearchOptions {
            strategy: parse_strategy(&a.strategy)?,
        },
    };
    let grids: Vec<Vec<f64>> = a.grid.iter().map(|g| parse_grid(g)).collect::<Result<_>>()?;
    if grids.len() > method.stages.len() {
        return Err(CliError::InvalidArgs(format!(
            "{} grids for {} stage(s)",
            grids.len(),
            method.stages.len()
        )));
    }
    let k = resolve_k(&method, a.k)?;
    let (full, d, excluded) = load(&a.data)?;
    let outcome = pool(a.common.workers())?.install(|| run_method_on_grids(&method, &d.y, &d.x, k, opts, &grids))?;

    let mut out = Outputs::default();
    let dir_names: Vec<String> = (1..=outcome.basis.cols()).map(|j| format!("dir{j}")).collect();

    let mut header = strings(["predictor"]);
    header.extend(dir_names.iter().cloned());
    let rows: Vec<Vec<String>> = d
        .predictors
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let mut r = vec![name.clone()];
            r.extend((0..outcome.basis.cols()).map(|j| num(outcome.basis[(i, j)])));
            r
        })
        .collect();
    out.csv("directions.csv", &header, &rows)?;

    let mut trace = Vec::new();
    let mut warnings = Vec::new();
    let mut stages = Vec::new();
    for (j, (sm, so)) in method.stages.iter().zip(&outcome.stages).enumerate() {
        if let Some(r) = &so.search {
            for t in &r.trace {
                trace.push(vec![
                    (j + 1).to_string(),
                    sm.to_string(),
                    num(t.param),
                    opt(t.value),
                    opt(t.leading_eigenvalue),
                    t.warning.clone().unwrap_or_default(),
                ]);
            }
            warnings.extend(r.warnings().into_iter().map(|w| format!("stage {}: {w}", j + 1)));
        }
        if so.fit.not_converged {
            warnings.push(format!("stage {}: robust fit hit its iteration cap", j + 1));
        }
        stages.push(json!({
            "stage": j + 1,
            "method": sm.to_string(),
            "family": sm.family.map(|f| f.label()),
            "criterion": sm.criterion.map(|c| c.label()),
            "shift": so.shift,
            "chosen": so.search.as_ref().map(|r| r.optimal_param),
            "criterion_value": so.search.as_ref().map(|r| r.criterion_value),
            "eigenvalues": so.fit.eigenvalues,
        }));
    }
    out.csv(
        "trace.csv",
        &strings(["stage", "method", "param", "criterion", "leading_eigenvalue", "warning"]),
        &trace,
    )?;

    // ESSP: every row, excluded ones flagged
    let first = &outcome.stages[0];
    let t_all: Vec<Option<f64>> = match (&method.stages[0], &first.search) {
        (StageMethod { family: Some(f), .. }, Some(r)) => transform_all(*f, first.shift, r.optimal_param, &full.y, &d.y),
        _ => full.y.iter().map(|&v| Some(v)).collect(),
    };
    let mut header = strings(["row", "y", "t_y"]);
    header.extend(dir_names.iter().cloned());
    header.push("excluded".into());
    let cols = outcome.basis.columns();
    let essp: Vec<Vec<String>> = (0..full.n())
        .map(|i| {
            let mut r = vec![(i + 1).to_string(), num(full.y[i]), opt(t_all[i])];
            r.extend(cols.iter().map(|c| num(dot(full.x.row(i), c))));
            r.push(excluded.contains(&i).to_string());
            r
        })
        .collect();
    out.csv("essp.csv", &header, &essp)?;

    let ty: Vec<f64> = match &first.search {
        Some(r) => r.transformed.clone(),
        None => d.y.clone(),
    };
    let rank = rank_table(&first.fit, &ty, &d.x);
    let (rank_test, rank_error) = match rank {
        Ok(t) => (t, None),
        Err(e) => {
            warnings.push(format!("rank test unavailable: {e}"));
            (Vec::new(), Some(e.to_string()))
        }
    };
    out.json(
        "summary.json",
        &json!({
            "method": method.name(),
            "response": d.response,
            "predictors": d.predictors,
            "n": d.n(),
            "n_total": full.n(),
            "p": d.p(),
            "excluded_rows": excluded.iter().map(|i| i + 1).collect::<Vec<_>>(),
            "stages": stages,
            "rank_test": rank_test,
            "rank_test_error": rank_error,
            "warnings": warnings,
        }),
    )?;
    Ok(out)
}

/// Rank tests `k = 0..p-1` on the PHD spectrum of the first stage's response.
fn rank_table(fit: &DrFit<f64>, ty: &[f64], x: &Matrix<f64>) -> otdr::Result<Vec<otdr::dr::RankTest>> {
    let eigs = if fit.eigenvalues.len() == x.cols() {
        fit.eigenvalues.clone()
    } else {
        Predictors::new(x)?.phd(ty, 1)?.eigenvalues
    };
    rank_test_table(&eigs, ty.len(), variance(ty))
}

pub fn influence(a: &InfluenceArgs) -> Result<Outputs> {
    let method = parse_method(&a.method)?;
    if method.stages.len() != 1 {
        return Err(CliError::InvalidArgs("influence takes a single-stage method".into()));
    }
    let stage = method.stages[0];
    let shift_rule = parse_shift(&a.shift)?;
    let strategy = parse_strategy(&a.strategy)?;
    let (full, d, excluded) = load(&a.data)?;
    if d.n() < d.p() + 2 {
        return Err(CliError::InvalidArgs(format!(
            "influence needs at least p + 2 = {} rows, got {}",
            d.p() + 2,
            d.n()
        )));
    }
    let est = match stage.fitter {
        Fitter::Ols => Estimator::Ols,
        Fitter::Rlm => Estimator::Rlm,
        Fitter::Phd => Estimator::Phd { k: 1 },
    };
    let workers = a.common.workers();
    let (ty, param, shift) = match stage.family {
        None => {
            if a.param.is_some() {
                return Err(CliError::InvalidArgs(format!("{method} has no transformation parameter")));
            }
            (d.y.clone(), None, None)
        }
        Some(family) => {
            let mut spec = match &a.grid {
                Some(g) => TransformSpec::new(family, parse_grid(g)?)?,
                None => TransformSpec::with_default_grid(family),
            };
            let shift = if family.needs_positive() { shift_rule.shift_for(&d.y) } else { None };
            if let Some(s) = shift {
                spec = spec.with_shift(s);
            }
            let param = match a.param {
                Some(v) => v,
                None => {
                    let pred = Predictors::new(&d.x)?;
                    let criterion = stage.criterion.expect("transformed stages carry a criterion");
                    let opts = SearchOptions { strategy };
                    pool(workers)?
                        .install(|| search_with(&pred, &d.y, &spec, &est, criterion, opts))?
                        .optimal_param
                }
            };
            (spec.apply(&d.y, param)?, Some(param), shift)
        }
    };
    let report = pool(workers)?.install(|| influence_subspace(&ty, &d.x, &est, strategy))?;

    // original 1-based row numbers of the fitted observations
    let rows: Vec<usize> = (0..full.n()).filter(|i| !excluded.contains(i)).map(|i| i + 1).collect();
    let mut out = Outputs::default();
    let body: Vec<Vec<String>> = rows
        .iter()
        .zip(&report.values)
        .map(|(r, v)| vec![r.to_string(), num(*v)])
        .collect();
    out.csv("influence.csv", &strings(["row", "value"]), &body)?;
    let top: Vec<_> = report
        .ranking()
        .into_iter()
        .take(5)
        .map(|i| json!({ "row": rows[i], "value": report.values[i] }))
        .collect();
    let failures: Vec<_> = report
        .failures
        .iter()
        .map(|(i, e)| json!({ "row": rows[*i], "error": e.to_string() }))
        .collect();
    out.json(
        "summary.json",
        &json!({
            "method": method.name(),
            "measure": "rho",
            "param": param,
            "shift": shift,
            "n": d.n(),
            "p": d.p(),
            "excluded_rows": excluded.iter().map(|i| i + 1).collect::<Vec<_>>(),
            "mean": report.mean,
            "top": top,
            "failures": failures,
        }),
    )?;
    Ok(out)
}

pub fn simulate(a: &SimulateArgs) -> Result<Outputs> {
    let spec = ModelSpec::new(parse_model(&a.model)?, a.n, a.p)?;
    let methods: Vec<Method> = a.methods.iter().map(|m| parse_method(m)).collect::<Result<_>>()?;
    let mut cfg = ExperimentConfig::new(spec, methods, a.reps, a.seed);
    cfg.workers = a.common.workers();
    cfg.shift = parse_shift(&a.shift)?;
    cfg.later = parse_later(&a.later)?;
    cfg.strategy = parse_strategy(&a.strategy)?;
    let report = run_experiment(&cfg)?;

    let mut out = Outputs::default();
    out.json("report.json", &report)?;

    let chosen = |c: &[Option<f64>]| c.iter().map(|v| opt(*v)).collect::<Vec<_>>().join(";");
    let mut long = Vec::new();
    for m in &report.methods {
        for r in &m.records {
            long.push(vec![
                r.replicate.to_string(),
                r.seed.to_string(),
                m.method.clone(),
                opt(r.metric),
                chosen(&r.chosen),
                r.error.clone().unwrap_or_default(),
                num(r.seconds),
            ]);
        }
    }
    // replicate-major, matching the paired design
    long.sort_by_key(|r| r[0].parse::<usize>().unwrap_or(0));
    out.csv(
        "results.csv",
        &strings(["replicate", "seed", "method", "metric", "chosen", "error", "seconds"]),
        &long,
    )?;

    let mut header = strings(["replicate", "seed"]);
    header.extend(report.methods.iter().map(|m| m.method.clone()));
    let wide: Vec<Vec<String>> = (0..report.reps)
        .map(|r| {
            let mut row = vec![r.to_string(), report.methods[0].records[r].seed.to_string()];
            row.extend(report.methods.iter().map(|m| opt(m.records[r].metric)));
            row
        })
        .collect();
    out.csv("metrics.csv", &header, &wide)?;
    Ok(out)
}

pub fn bench(a: &BenchArgs) -> Result<Outputs> {
    let criteria = a.criteria.iter().map(|c| parse_criterion(c)).collect::<Result<Vec<_>>>()?;
    let strategy = parse_strategy(&a.strategy)?;
    let rows = pool(a.common.workers())?.install(|| timing_probe(&criteria, &a.n, a.repeats, a.seed, strategy))?;
    let mut out = Outputs::default();
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.criterion.label().to_string(),
                r.n.to_string(),
                num(r.seconds),
                r.runs.iter().map(|v| num(*v)).collect::<Vec<_>>().join(";"),
            ]
        })
        .collect();
    out.csv("timing.csv", &strings(["criterion", "n", "seconds", "runs"]), &body)?;
    Ok(out)
}
