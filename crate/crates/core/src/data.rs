//! Observational survival data and right-continuous step functions.
//!
//! A [`Dataset`] holds one row per unit: covariates, a binary treatment, the
//! observed follow-up time `U = min(T, C)` and the event indicator
//! `delta = I(T <= C)`. It is validated once at construction and immutable
//! afterwards.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("non-numeric cell at row {row}, column `{col}`")]
    NonNumericCell { row: usize, col: String },
    #[error("indicator column `{col}` has value {value} at row {row}; expected 0 or 1")]
    InvalidIndicator { row: usize, col: String, value: f64 },
    #[error("negative follow-up time {value} at row {row}")]
    NegativeTime { row: usize, value: f64 },
    #[error("non-finite value in column `{col}` at row {row}")]
    NonFinite { row: usize, col: String },
    #[error("treatment arm {0} has no units")]
    EmptyArm(u8),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("empty input file")]
    Empty,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Column mapping for delimited input.
///
/// When `covariates` is `None`, every column other than the treatment, time
/// and event columns is used as a covariate, in header order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub treat: String,
    pub time: String,
    pub event: String,
    pub covariates: Option<Vec<String>>,
}

impl Default for ColumnSchema {
    fn default() -> Self {
        Self { treat: "treat".into(), time: "time".into(), event: "event".into(), covariates: None }
    }
}

/// Validated observational dataset. Covariates are stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    p: usize,
    x: Vec<f64>,
    treat: Vec<u8>,
    time: Vec<f64>,
    event: Vec<bool>,
    covariate_names: Vec<String>,
}

impl Dataset {
    /// Builds and validates a dataset. `x` is row-major with `p` columns.
    pub fn new(x: Vec<f64>, p: usize, treat: Vec<u8>, time: Vec<f64>, event: Vec<bool>) -> Result<Self, DataError> {
        let names = (1..=p).map(|j| format!("x{j}")).collect();
        Self::with_names(x, p, treat, time, event, names)
    }

    pub fn with_names(
        x: Vec<f64>,
        p: usize,
        treat: Vec<u8>,
        time: Vec<f64>,
        event: Vec<bool>,
        covariate_names: Vec<String>,
    ) -> Result<Self, DataError> {
        let n = treat.len();
        if time.len() != n || event.len() != n || x.len() != n * p {
            return Err(DataError::Shape(format!(
                "n={n}: time {}, event {}, x {} (p={p})",
                time.len(),
                event.len(),
                x.len()
            )));
        }
        if covariate_names.len() != p {
            return Err(DataError::Shape(format!("{} covariate names for p={p}", covariate_names.len())));
        }
        for (i, &a) in treat.iter().enumerate() {
            if a > 1 {
                return Err(DataError::InvalidIndicator { row: i, col: "treat".into(), value: a as f64 });
            }
        }
        for (i, &u) in time.iter().enumerate() {
            if !u.is_finite() {
                return Err(DataError::NonFinite { row: i, col: "time".into() });
            }
            if u < 0.0 {
                return Err(DataError::NegativeTime { row: i, value: u });
            }
        }
        for (k, v) in x.iter().enumerate() {
            if !v.is_finite() {
                return Err(DataError::NonFinite { row: k / p.max(1), col: covariate_names[k % p.max(1)].clone() });
            }
        }
        for arm in [0u8, 1u8] {
            if !treat.contains(&arm) {
                return Err(DataError::EmptyArm(arm));
            }
        }
        let data = Self { p, x, treat, time, event, covariate_names };
        for j in data.constant_columns() {
            log::warn!("covariate `{}` has zero variance", data.covariate_names[j]);
        }
        Ok(data)
    }

    pub fn n(&self) -> usize {
        self.treat.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    pub fn covariates(&self) -> &[f64] {
        &self.x
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn treat(&self) -> &[u8] {
        &self.treat
    }

    pub fn time(&self) -> &[f64] {
        &self.time
    }

    pub fn event(&self) -> &[bool] {
        &self.event
    }

    pub fn is_treated(&self, i: usize) -> bool {
        self.treat[i] == 1
    }

    pub fn arm_size(&self, arm: u8) -> usize {
        self.treat.iter().filter(|&&a| a == arm).count()
    }

    /// Column `j` as an owned vector.
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n()).map(|i| self.x[i * self.p + j]).collect()
    }

    /// Indices of covariate columns with zero sample variance.
    pub fn constant_columns(&self) -> Vec<usize> {
        (0..self.p)
            .filter(|&j| {
                let first = self.x[j];
                (0..self.n()).all(|i| self.x[i * self.p + j] == first)
            })
            .collect()
    }

    /// Rows `idx` (with repetition allowed) as a new dataset.
    pub fn subset(&self, idx: &[usize]) -> Result<Self, DataError> {
        let mut x = Vec::with_capacity(idx.len() * self.p);
        for &i in idx {
            x.extend_from_slice(self.row(i));
        }
        let treat = idx.iter().map(|&i| self.treat[i]).collect();
        let time = idx.iter().map(|&i| self.time[i]).collect();
        let event = idx.iter().map(|&i| self.event[i]).collect();
        Self::with_names(x, self.p, treat, time, event, self.covariate_names.clone())
    }

    /// Same units with every follow-up time multiplied by `c`.
    pub fn rescale_time(&self, c: f64) -> Result<Self, DataError> {
        let mut out = self.clone();
        out.time.iter_mut().for_each(|u| *u *= c);
        Ok(out)
    }

    /// Writes the dataset with the default column names (`treat,time,event,<covariates>`).
    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<(), DataError> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["treat".to_string(), "time".into(), "event".into()];
        header.extend(self.covariate_names.iter().cloned());
        w.write_record(&header)?;
        for i in 0..self.n() {
            let mut rec =
                vec![self.treat[i].to_string(), self.time[i].to_string(), u8::from(self.event[i]).to_string()];
            rec.extend(self.row(i).iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn detect_delimiter(path: &Path) -> Result<u8, DataError> {
    let mut first = String::new();
    BufReader::new(File::open(path)?).read_line(&mut first)?;
    if first.trim().is_empty() {
        return Err(DataError::Empty);
    }
    Ok(if first.contains('\t') { b'\t' } else { b',' })
}

fn parse_indicator(cell: &str, row: usize, col: &str) -> Result<u8, DataError> {
    let v: f64 = cell.trim().parse().map_err(|_| DataError::NonNumericCell { row, col: col.to_string() })?;
    if v == 0.0 {
        Ok(0)
    } else if v == 1.0 {
        Ok(1)
    } else {
        Err(DataError::InvalidIndicator { row, col: col.to_string(), value: v })
    }
}

/// Reads a comma- or tab-delimited file with a header line.
///
/// Row numbers in errors are zero-based data rows (the header is not counted).
pub fn load_dataset<P: AsRef<Path>>(path: P, schema: &ColumnSchema) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    let delim = detect_delimiter(path)?;
    let mut rdr = csv::ReaderBuilder::new().delimiter(delim).trim(csv::Trim::All).from_path(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let find =
        |name: &str| header.iter().position(|h| h == name).ok_or_else(|| DataError::MissingColumn(name.to_string()));
    let treat_col = find(&schema.treat)?;
    let time_col = find(&schema.time)?;
    let event_col = find(&schema.event)?;
    let cov_names: Vec<String> = match &schema.covariates {
        Some(c) => c.clone(),
        None => header
            .iter()
            .enumerate()
            .filter(|(k, _)| ![treat_col, time_col, event_col].contains(k))
            .map(|(_, h)| h.clone())
            .collect(),
    };
    let cov_cols = cov_names.iter().map(|c| find(c)).collect::<Result<Vec<_>, _>>()?;

    let p = cov_cols.len();
    let (mut x, mut treat, mut time, mut event) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let cell = |k: usize| rec.get(k).unwrap_or("");
        treat.push(parse_indicator(cell(treat_col), row, &schema.treat)?);
        event.push(parse_indicator(cell(event_col), row, &schema.event)? == 1);
        let u: f64 = cell(time_col).parse().map_err(|_| DataError::NonNumericCell { row, col: schema.time.clone() })?;
        time.push(u);
        for (&k, name) in cov_cols.iter().zip(&cov_names) {
            let v: f64 = cell(k).parse().map_err(|_| DataError::NonNumericCell { row, col: name.clone() })?;
            x.push(v);
        }
    }
    if treat.is_empty() {
        return Err(DataError::Empty);
    }
    Dataset::with_names(x, p, treat, time, event, cov_names)
}

/// Which one-sided limit to evaluate a step function at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Value at `t`, including any jump at `t`.
    Right,
    /// Limit from the left: excludes a jump exactly at `t`.
    Left,
}

/// Right-continuous step function `f(t) = values[k]` for `knots[k] <= t < knots[k+1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    knots: Vec<f64>,
    values: Vec<f64>,
    before: f64,
}

impl StepFunction {
    /// Panics if `knots` is not strictly increasing or lengths differ.
    pub fn new(knots: Vec<f64>, values: Vec<f64>, before: f64) -> Self {
        assert_eq!(knots.len(), values.len(), "knots and values must have equal length");
        assert!(knots.windows(2).all(|w| w[0] < w[1]), "knots must be strictly increasing");
        Self { knots, values, before }
    }

    pub fn zero() -> Self {
        Self { knots: Vec::new(), values: Vec::new(), before: 0.0 }
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value_before_first_knot(&self) -> f64 {
        self.before
    }

    pub fn eval(&self, t: f64, side: Side) -> f64 {
        let k = match side {
            Side::Right => self.knots.partition_point(|&s| s <= t),
            Side::Left => self.knots.partition_point(|&s| s < t),
        };
        if k == 0 {
            self.before
        } else {
            self.values[k - 1]
        }
    }

    /// Jump sizes at each knot.
    pub fn increments(&self) -> Vec<f64> {
        let mut prev = self.before;
        self.values
            .iter()
            .map(|&v| {
                let d = v - prev;
                prev = v;
                d
            })
            .collect()
    }
}

/// Free-function form of [`StepFunction::eval`].
pub fn eval_step(f: &StepFunction, t: f64, side: Side) -> f64 {
    f.eval(t, side)
}

/// Writes `(time, value)` pairs as two-column delimited text.
pub fn write_two_column<W: Write>(mut out: W, header: (&str, &str), rows: &[(f64, f64)]) -> std::io::Result<()> {
    writeln!(out, "{},{}", header.0, header.1)?;
    for (t, v) in rows {
        writeln!(out, "{t},{v}")?;
    }
    Ok(())
}
