//! Tabular datasets, CSV ingestion and affine standardization.

use std::fs::File;
use std::path::Path;

use log::warn;
use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Affine map from original units to model units:
/// `x' = (x - x_center) / x_scale`, `y' = (y - y_center) / y_scale`.
#[derive(Clone, Debug, PartialEq)]
pub struct Scaling {
    pub x_center: Vec<f64>,
    pub x_scale: Vec<f64>,
    pub y_center: f64,
    pub y_scale: f64,
    /// Columns left unscaled because their standard deviation was zero.
    pub constant_columns: Vec<usize>,
}

impl Scaling {
    pub fn identity(d: usize) -> Self {
        Self {
            x_center: vec![0.0; d],
            x_scale: vec![1.0; d],
            y_center: 0.0,
            y_scale: 1.0,
            constant_columns: Vec::new(),
        }
    }

    pub fn apply_x(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.x_center.len() {
            return Err(Error::DimensionMismatch {
                what: "columns",
                expected: self.x_center.len(),
                got: x.ncols(),
            });
        }
        Ok(DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
            (x[(i, j)] - self.x_center[j]) / self.x_scale[j]
        }))
    }

    pub fn apply_y(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|v| (v - self.y_center) / self.y_scale).collect()
    }

    /// Maps model-unit responses back to original units.
    pub fn inverse_y(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|v| v * self.y_scale + self.y_center).collect()
    }

    // self after inner: original -> inner -> self
    fn compose(&self, inner: &Scaling) -> Scaling {
        let d = self.x_center.len();
        Scaling {
            x_center: (0..d).map(|j| inner.x_center[j] + inner.x_scale[j] * self.x_center[j]).collect(),
            x_scale: (0..d).map(|j| inner.x_scale[j] * self.x_scale[j]).collect(),
            y_center: inner.y_center + inner.y_scale * self.y_center,
            y_scale: inner.y_scale * self.y_scale,
            constant_columns: self.constant_columns.clone(),
        }
    }
}

/// Which parts of the data [`Dataset::standardize`] transforms.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StandardizeOptions {
    pub scale_x: bool,
    pub center_y: bool,
    pub scale_y: bool,
}

impl StandardizeOptions {
    pub fn all() -> Self {
        Self {
            scale_x: true,
            center_y: true,
            scale_y: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: Vec<f64>,
    pub columns: Vec<String>,
    pub target: String,
    /// Map from the original units to the units of `x` and `y`.
    pub scaling: Scaling,
}

fn mean_sd(v: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = v.clone().count() as f64;
    let mean = v.clone().sum::<f64>() / n;
    let var = v.map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: Vec<f64>, columns: Vec<String>, target: String) -> Result<Self> {
        if y.len() != x.nrows() {
            return Err(Error::DimensionMismatch {
                what: "response",
                expected: x.nrows(),
                got: y.len(),
            });
        }
        if columns.len() != x.ncols() {
            return Err(Error::DimensionMismatch {
                what: "column names",
                expected: x.ncols(),
                got: columns.len(),
            });
        }
        if x.nrows() < 2 {
            return Err(Error::InvalidInput(format!("dataset needs at least 2 rows, got {}", x.nrows())));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("dataset contains non-finite values".into()));
        }
        let d = x.ncols();
        Ok(Self {
            x,
            y,
            columns,
            target,
            scaling: Scaling::identity(d),
        })
    }

    /// Columns named `x1..xd` and target `y`.
    pub fn with_default_names(x: DMatrix<f64>, y: Vec<f64>) -> Result<Self> {
        let columns = (1..=x.ncols()).map(|j| format!("x{j}")).collect();
        Self::new(x, y, columns, "y".into())
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    /// Sample mean/sd scaling of the current values. Zero-sd columns are left
    /// unscaled (only centered) and listed in `constant_columns`.
    pub fn fit_scaling(&self, opts: StandardizeOptions) -> Scaling {
        let mut s = Scaling::identity(self.d());
        if opts.scale_x {
            for j in 0..self.d() {
                let (mean, sd) = mean_sd(self.x.column(j).iter().copied());
                s.x_center[j] = mean;
                if sd > 0.0 {
                    s.x_scale[j] = sd;
                } else {
                    warn!("column '{}' is constant and is left unscaled", self.columns[j]);
                    s.constant_columns.push(j);
                }
            }
        }
        let (mean, sd) = mean_sd(self.y.iter().copied());
        if opts.center_y {
            s.y_center = mean;
        }
        if opts.scale_y {
            if sd > 0.0 {
                s.y_scale = sd;
            } else {
                warn!("target '{}' is constant and is left unscaled", self.target);
            }
        }
        s
    }

    /// Applies `step` (fitted on some dataset in the same units as `self`).
    pub fn transformed(&self, step: &Scaling) -> Result<Dataset> {
        Ok(Dataset {
            x: step.apply_x(&self.x)?,
            y: step.apply_y(&self.y),
            columns: self.columns.clone(),
            target: self.target.clone(),
            scaling: step.compose(&self.scaling),
        })
    }

    pub fn standardize(&self, opts: StandardizeOptions) -> Dataset {
        let step = self.fit_scaling(opts);
        self.transformed(&step).expect("scaling fitted on the same columns")
    }

    /// Rows `rows` (in the given order), keeping the scaling metadata.
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(rows.iter()),
            y: rows.iter().map(|&i| self.y[i]).collect(),
            columns: self.columns.clone(),
            target: self.target.clone(),
            scaling: self.scaling.clone(),
        }
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.display().to_string()),
        _ => Error::Io(e),
    })
}

fn ingest(path: &Path, row: usize, column: &str, message: impl Into<String>) -> Error {
    Error::Ingest {
        path: path.display().to_string(),
        row,
        column: column.to_string(),
        message: message.into(),
    }
}

// Header plus numeric rows restricted to `wanted` (indices into the header).
fn read_numeric(path: &Path, wanted: &[usize]) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_reader(open(path)?);
    let header: Vec<String> = r.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let mut vals = Vec::with_capacity(wanted.len());
        for &c in wanted {
            let name = header.get(c).map_or("?", |s| s.as_str());
            let cell = rec.get(c).ok_or_else(|| ingest(path, row, name, "missing cell"))?.trim();
            if cell.is_empty() {
                return Err(ingest(path, row, name, "blank cell"));
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| ingest(path, row, name, format!("'{cell}' is not a number")))?;
            if !v.is_finite() {
                return Err(ingest(path, row, name, format!("'{cell}' is not finite")));
            }
            vals.push(v);
        }
        rows.push(vals);
    }
    Ok((header, rows))
}

fn header_of(path: &Path) -> Result<Vec<String>> {
    let mut r = csv::Reader::from_reader(open(path)?);
    Ok(r.headers()?.iter().map(|h| h.trim().to_string()).collect())
}

/// Loads a dataset whose predictors are all columns other than `target`, in
/// file order.
pub fn load_csv(path: &Path, target: &str) -> Result<Dataset> {
    let header = header_of(path)?;
    let t = header
        .iter()
        .position(|h| h == target)
        .ok_or_else(|| ingest(path, 0, target, "target column not found"))?;
    let features: Vec<usize> = (0..header.len()).filter(|&c| c != t).collect();
    let mut wanted = features.clone();
    wanted.push(t);
    let (_, rows) = read_numeric(path, &wanted)?;
    let d = features.len();
    let n = rows.len();
    let x = DMatrix::from_fn(n, d, |i, j| rows[i][j]);
    let y = rows.iter().map(|r| r[d]).collect();
    let columns = features.iter().map(|&c| header[c].clone()).collect();
    Dataset::new(x, y, columns, target.to_string())
}

/// Loads the named predictor columns (in that order) from a CSV file; other
/// columns are ignored.
pub fn load_features(path: &Path, columns: &[String]) -> Result<DMatrix<f64>> {
    let header = header_of(path)?;
    let wanted = columns
        .iter()
        .map(|c| {
            header
                .iter()
                .position(|h| h == c)
                .ok_or_else(|| ingest(path, 0, c, "column not found"))
        })
        .collect::<Result<Vec<_>>>()?;
    let (_, rows) = read_numeric(path, &wanted)?;
    Ok(DMatrix::from_fn(rows.len(), columns.len(), |i, j| rows[i][j]))
}

/// Writes predictors then target, with a header row.
pub fn write_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = dataset.columns.clone();
    header.push(dataset.target.clone());
    w.write_record(&header)?;
    for i in 0..dataset.n() {
        let mut rec: Vec<String> = dataset.x.row(i).iter().map(|v| v.to_string()).collect();
        rec.push(dataset.y[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
