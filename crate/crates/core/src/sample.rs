//! Paired observations `(Yᵢ, Xᵢ)` and their CSV representation.
//!
//! The CSV dialect is comma separated with a required header whose first
//! column is `y` followed by `x1, …, xd`.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// An i.i.d. sample of `n` responses with `d`-dimensional predictors.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    y: Vec<f64>,
    x: DMatrix<f64>,
    max_norm: f64,
}

impl Sample {
    /// Validates shapes and finiteness. Row `i` of `x` is `Xᵢ`.
    pub fn new(y: Vec<f64>, x: DMatrix<f64>) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::InvalidSample(
                "sample size must be at least 1".into(),
            ));
        }
        if x.ncols() == 0 {
            return Err(Error::InvalidSample("dimension must be at least 1".into()));
        }
        if x.nrows() != y.len() {
            return Err(Error::InvalidSample(format!(
                "{} responses but {} predictor rows",
                y.len(),
                x.nrows()
            )));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSample(format!(
                "non-finite response at row {i}"
            )));
        }
        if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
            let (row, col) = (pos % x.nrows(), pos / x.nrows());
            return Err(Error::InvalidSample(format!(
                "non-finite predictor at row {row}, column {col}"
            )));
        }
        let max_norm = x.row_iter().map(|r| r.norm()).fold(0.0, f64::max);
        Ok(Self { y, x, max_norm })
    }

    /// Builds a sample from row vectors.
    pub fn from_rows(y: Vec<f64>, rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidSample("ragged predictor rows".into()));
        }
        let x = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
        Self::new(y, x)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// The `n × d` predictor matrix.
    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    /// Largest Euclidean row norm, an empirical witness for the bound `G`.
    pub fn max_predictor_norm(&self) -> f64 {
        self.max_norm
    }

    pub fn read_csv_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(file)
    }

    /// Parses the `y,x1,…,xd` CSV layout. Errors name the offending line
    /// (1-based, header is line 1) and column.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers().map_err(|e| csv_error(&e, "header"))?.clone();
        validate_header(&headers)?;
        let d = headers.len() - 1;

        let mut y = Vec::new();
        let mut flat = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| csv_error(&e, "-"))?;
            let line = record.position().map_or(0, |p| p.line());
            if record.len() != headers.len() {
                return Err(Error::Csv {
                    line,
                    column: "-".into(),
                    message: format!("expected {} fields, found {}", headers.len(), record.len()),
                });
            }
            for (col, cell) in record.iter().enumerate() {
                let value: f64 = cell.parse().map_err(|_| Error::Csv {
                    line,
                    column: headers[col].to_string(),
                    message: format!("cannot parse {cell:?} as a number"),
                })?;
                if !value.is_finite() {
                    return Err(Error::Csv {
                        line,
                        column: headers[col].to_string(),
                        message: format!("non-finite value {cell:?}"),
                    });
                }
                if col == 0 {
                    y.push(value);
                } else {
                    flat.push(value);
                }
            }
        }
        if y.is_empty() {
            return Err(Error::Csv {
                line: 2,
                column: "-".into(),
                message: "no data rows".into(),
            });
        }
        let x = DMatrix::from_row_slice(y.len(), d, &flat);
        Self::new(y, x)
    }

    /// Writes the sample in the layout accepted by [`Sample::read_csv`].
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec!["y".to_string()];
        header.extend((1..=self.d()).map(|j| format!("x{j}")));
        wtr.write_record(&header).map_err(io_error)?;
        for i in 0..self.n() {
            let mut row = Vec::with_capacity(self.d() + 1);
            row.push(self.y[i].to_string());
            row.extend((0..self.d()).map(|j| self.x[(i, j)].to_string()));
            wtr.write_record(&row).map_err(io_error)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn validate_header(headers: &csv::StringRecord) -> Result<()> {
    if headers.len() < 2 {
        return Err(Error::Csv {
            line: 1,
            column: "header".into(),
            message: "expected columns y,x1,...,xd with d >= 1".into(),
        });
    }
    for (col, name) in headers.iter().enumerate() {
        let expected = if col == 0 {
            "y".to_string()
        } else {
            format!("x{col}")
        };
        if name != expected {
            return Err(Error::Csv {
                line: 1,
                column: name.to_string(),
                message: format!("header column {} must be {expected:?}", col + 1),
            });
        }
    }
    Ok(())
}

fn csv_error(err: &csv::Error, column: &str) -> Error {
    let line = err.position().map_or(1, |p| p.line());
    Error::Csv {
        line,
        column: column.to_string(),
        message: err.to_string(),
    }
}

fn io_error(err: csv::Error) -> Error {
    Error::Io(err.to_string())
}
