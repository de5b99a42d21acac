//! Observed data: a predictor matrix `Z` and a response `y`.

use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Predictors (`n x p`, one observation per row) paired with a response.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub z: Array2<f64>,
    pub y: Array1<f64>,
}

/// Constants removed by [`center_dataset`], kept for prediction on the raw scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Centering {
    pub col_means: Array1<f64>,
    pub y_mean: f64,
}

impl Dataset {
    /// Validates shape and finiteness. Needs at least three observations.
    pub fn new(z: Array2<f64>, y: Array1<f64>) -> Result<Self> {
        let (n, p) = z.dim();
        check_len(n, y.len(), "response length vs predictor rows")?;
        if n < 3 {
            return Err(Error::InvalidInput(format!(
                "need at least 3 observations, got {n}"
            )));
        }
        if p == 0 {
            return Err(Error::InvalidInput("need at least one predictor".into()));
        }
        if let Some(((row, col), _)) = z.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::MissingValue {
                row,
                column: format!("#{col}"),
            });
        }
        if let Some((row, _)) = y.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::MissingValue {
                row,
                column: "response".into(),
            });
        }
        Ok(Self { z, y })
    }

    pub fn n(&self) -> usize {
        self.z.nrows()
    }

    pub fn p(&self) -> usize {
        self.z.ncols()
    }

    /// Rows selected by `idx`, in that order.
    pub fn select_rows(&self, idx: &[usize]) -> Result<Self> {
        Self::new(self.z.select(Axis(0), idx), self.y.select(Axis(0), idx))
    }
}

/// Subtracts column means from `Z` and the mean from `y`.
pub fn center_dataset(raw: &Dataset) -> Result<(Dataset, Centering)> {
    let n = raw.n();
    if n < 3 {
        return Err(Error::InvalidInput(format!(
            "need at least 3 observations, got {n}"
        )));
    }
    let col_means = raw
        .z
        .mean_axis(Axis(0))
        .expect("non-empty matrix has column means");
    let y_mean = raw.y.sum() / n as f64;
    let z = &raw.z - &col_means.view().insert_axis(Axis(0));
    let y = raw.y.mapv(|v| v - y_mean);
    Ok((
        Dataset { z, y },
        Centering { col_means, y_mean },
    ))
}

/// A CSV table with a header row and one observation per line.
#[derive(Clone, Debug)]
pub struct Table {
    pub columns: Vec<String>,
    pub values: Array2<f64>,
}

impl Table {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_path(path)?;
        Self::from_reader(&mut reader)
    }

    pub fn from_reader<R: std::io::Read>(reader: &mut csv::Reader<R>) -> Result<Self> {
        let columns: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
        let mut flat = Vec::new();
        let mut rows = 0;
        for (row, record) in reader.records().enumerate() {
            let record = record?;
            check_len(columns.len(), record.len(), "csv record width")?;
            for (col, field) in record.iter().enumerate() {
                let value = field
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::MissingValue {
                        row: row + 1,
                        column: columns[col].clone(),
                    })?;
                flat.push(value);
            }
            rows += 1;
        }
        let values = Array2::from_shape_vec((rows, columns.len()), flat)
            .expect("every record has the header width");
        Ok(Self { columns, values })
    }

    /// Splits the table into predictors (every other column) and the named response.
    pub fn into_dataset(self, response: &str) -> Result<(Dataset, Vec<String>)> {
        let target = self
            .columns
            .iter()
            .position(|c| c == response)
            .ok_or_else(|| Error::InvalidInput(format!("no column named '{response}'")))?;
        let keep: Vec<usize> = (0..self.columns.len()).filter(|&j| j != target).collect();
        let names = keep.iter().map(|&j| self.columns[j].clone()).collect();
        let z = self.values.select(Axis(1), &keep);
        let y = self.values.column(target).to_owned();
        Ok((Dataset::new(z, y)?, names))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn centers_two_point_example() {
        let raw = Dataset {
            z: array![[1.0], [3.0], [2.0]],
            y: array![0.0, 2.0, 1.0],
        };
        let (c, k) = center_dataset(&raw).unwrap();
        assert_eq!(c.z, array![[-1.0], [1.0], [0.0]]);
        assert_eq!(c.y, array![-1.0, 1.0, 0.0]);
        assert_eq!(k.col_means, array![2.0]);
        assert_eq!(k.y_mean, 1.0);
    }

    #[test]
    fn centering_is_idempotent() {
        let raw = Dataset::new(array![[-1.0, 2.0], [0.0, -4.0], [1.0, 2.0]], array![1.0, 0.0, -1.0])
            .unwrap();
        let (c, k) = center_dataset(&raw).unwrap();
        assert_eq!(c, raw);
        assert!(k.col_means.iter().all(|&m| m == 0.0));
        assert_eq!(k.y_mean, 0.0);
    }

    #[test]
    fn constant_column_becomes_zero() {
        let raw = Dataset::new(array![[5.0, 1.0], [5.0, 2.0], [5.0, 6.0]], array![1.0, 2.0, 3.0])
            .unwrap();
        let (c, _) = center_dataset(&raw).unwrap();
        assert!(c.z.column(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_tiny_and_non_finite_inputs() {
        assert!(Dataset::new(array![[1.0], [2.0]], array![0.0, 1.0]).is_err());
        assert!(matches!(
            Dataset::new(array![[1.0], [f64::NAN], [2.0]], array![0.0, 1.0, 2.0]),
            Err(Error::MissingValue { row: 1, .. })
        ));
    }

    #[test]
    fn csv_reports_missing_cells() {
        let text = "a,b,y\n1,2,3\n4,,6\n";
        let mut r = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        match Table::from_reader(&mut r) {
            Err(Error::MissingValue { row, column }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "b");
            }
            other => panic!("expected missing value error, got {other:?}"),
        }
    }

    #[test]
    fn csv_splits_response_column() {
        let text = "a,y,b\n1,10,2\n3,11,4\n5,12,7\n";
        let mut r = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let (d, names) = Table::from_reader(&mut r).unwrap().into_dataset("y").unwrap();
        assert_eq!(names, vec!["a", "b"]);
        assert_eq!(d.y, array![10.0, 11.0, 12.0]);
        assert_eq!(d.z, array![[1.0, 2.0], [3.0, 4.0], [5.0, 7.0]]);
    }
}
