//! CSV ingestion.

use std::path::Path;

use otdr::linalg::Matrix;

use crate::error::{CliError, Result};

const MISSING: [&str; 6] = ["", "na", "nan", "null", ".", "?"];

#[derive(Debug, Clone)]
pub struct Dataset {
    pub response: String,
    pub predictors: Vec<String>,
    pub y: Vec<f64>,
    pub x: Matrix<f64>,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.predictors.len()
    }

    /// Keeps the rows whose 0-based index is not in `drop`.
    pub fn without_rows(&self, drop: &[usize]) -> Dataset {
        let keep: Vec<usize> = (0..self.n()).filter(|i| !drop.contains(i)).collect();
        Dataset {
            response: self.response.clone(),
            predictors: self.predictors.clone(),
            y: keep.iter().map(|&i| self.y[i]).collect(),
            x: self.x.select_rows(&keep),
        }
    }
}

/// Reads `response` and `predictors` (every other column when empty). Any
/// missing or non-numeric selected field is an error naming its row.
pub fn ingest_csv(path: &Path, response: &str, predictors: &[String]) -> Result<Dataset> {
    if !path.is_file() {
        return Err(CliError::FileNotFound(path.to_path_buf()));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(e, "header"))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_error(e, "header"))?
        .iter()
        .map(str::to_string)
        .collect();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::MissingColumn(name.to_string()))
    };
    let yi = find(response)?;
    let predictors: Vec<String> = if predictors.is_empty() {
        header.iter().filter(|h| *h != response).cloned().collect()
    } else {
        predictors.to_vec()
    };
    if predictors.is_empty() {
        return Err(CliError::InvalidArgs("no predictor columns".into()));
    }
    if predictors.iter().any(|p| p == response) {
        return Err(CliError::InvalidArgs(format!("{response:?} is both response and predictor")));
    }
    let xi: Vec<usize> = predictors.iter().map(|p| find(p)).collect::<Result<_>>()?;

    let mut y = Vec::new();
    let mut xs = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let row = k + 1;
        let rec = rec.map_err(|e| csv_error(e, ""))?;
        let field = |j: usize| -> Result<f64> {
            let col = &header[j];
            let raw = rec.get(j).ok_or_else(|| CliError::Parse {
                row,
                column: col.clone(),
                message: "field missing".into(),
            })?;
            if MISSING.contains(&raw.to_ascii_lowercase().as_str()) {
                return Err(CliError::Parse {
                    row,
                    column: col.clone(),
                    message: format!("missing value {raw:?}"),
                });
            }
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(CliError::NonNumeric {
                    row,
                    column: col.clone(),
                    value: raw.to_string(),
                }),
            }
        };
        y.push(field(yi)?);
        for &j in &xi {
            xs.push(field(j)?);
        }
    }
    if y.is_empty() {
        return Err(CliError::InvalidArgs(format!("{} has no data rows", path.display())));
    }
    let x = Matrix::new(y.len(), xi.len(), xs)?;
    Ok(Dataset {
        response: response.to_string(),
        predictors,
        y,
        x,
    })
}

fn csv_error(e: csv::Error, column: &str) -> CliError {
    // the header is record 0, so this is the 1-based data row
    let row = e.position().map_or(0, |p| p.record() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io("reading csv", io),
        kind => CliError::Parse {
            row,
            column: column.to_string(),
            message: format!("{kind:?}"),
        },
    }
}
