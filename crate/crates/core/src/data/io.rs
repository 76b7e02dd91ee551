use std::collections::HashMap;
use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::MediationDataset;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

/// Maps CSV column names to model roles.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub exposure: String,
    pub outcome: String,
    pub mediators: Vec<String>,
    #[serde(default)]
    pub covariates: Vec<String>,
}

impl Schema {
    fn validate(&self) -> Result<()> {
        if self.mediators.is_empty() {
            return Err(Error::Schema("schema names no mediator columns".into()));
        }
        let mut seen = HashMap::new();
        let roles = std::iter::once(&self.exposure)
            .chain(std::iter::once(&self.outcome))
            .chain(&self.mediators)
            .chain(&self.covariates);
        for name in roles {
            if seen.insert(name.as_str(), ()).is_some() {
                return Err(Error::Schema(format!("column {name:?} is assigned more than one role")));
            }
        }
        Ok(())
    }
}

fn open(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).from_reader(file))
}

/// Column names from the header row of a CSV file.
pub fn read_header(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let mut rdr = open(path.as_ref())?;
    Ok(rdr.headers()?.iter().map(str::to_owned).collect())
}

fn parse_cell<T: Real>(raw: &str, row: usize, column: &str) -> Result<T> {
    let bad = || Error::BadCell { row, column: column.to_owned(), value: raw.to_owned() };
    let v: T = raw.trim().parse().map_err(|_| bad())?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

/// Reads a dataset; `row` in cell errors is the 1-based data row (header excluded).
pub fn load_dataset<T: Real>(path: impl AsRef<Path>, schema: &Schema) -> Result<MediationDataset<T>> {
    schema.validate()?;
    let mut rdr = open(path.as_ref())?;
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let mut index = HashMap::new();
    for (i, h) in headers.iter().enumerate() {
        if index.insert(h.as_str(), i).is_some() {
            return Err(Error::Schema(format!("duplicate column {h:?} in header")));
        }
    }
    let find = |name: &String| -> Result<usize> {
        index
            .get(name.as_str())
            .copied()
            .ok_or_else(|| Error::Schema(format!("column {name:?} not found")))
    };
    let exp_idx = find(&schema.exposure)?;
    let out_idx = find(&schema.outcome)?;
    let med_idx = schema.mediators.iter().map(find).collect::<Result<Vec<_>>>()?;
    let cov_idx = schema.covariates.iter().map(find).collect::<Result<Vec<_>>>()?;

    let mut a = Vec::new();
    let mut y = Vec::new();
    let mut m_cols: Vec<Vec<T>> = vec![Vec::new(); med_idx.len()];
    let mut x_cols: Vec<Vec<T>> = vec![Vec::new(); cov_idx.len()];
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row = r + 1;
        let cell = |i: usize| -> Result<T> { parse_cell(record.get(i).unwrap_or(""), row, &headers[i]) };
        a.push(cell(exp_idx)?);
        y.push(cell(out_idx)?);
        for (col, &i) in m_cols.iter_mut().zip(&med_idx) {
            col.push(cell(i)?);
        }
        for (col, &i) in x_cols.iter_mut().zip(&cov_idx) {
            col.push(cell(i)?);
        }
    }
    let n = a.len();
    let data = MediationDataset::with_names(
        Matrix::from_columns(n, x_cols),
        a,
        Matrix::from_columns(n, m_cols),
        y,
        schema.mediators.clone(),
        schema.covariates.clone(),
    )?;
    Ok(data.with_role_names(schema.exposure.clone(), schema.outcome.clone()))
}

/// Writes covariates, exposure, mediators and outcome (in that column order).
///
/// Values use the shortest representation that parses back to the same bits,
/// so `load_dataset(save_dataset(d))` reproduces `d` exactly.
pub fn save_dataset<T: Real>(path: impl AsRef<Path>, data: &MediationDataset<T>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut wtr = csv::Writer::from_writer(file);
    let mut header: Vec<&str> = data.covariate_names().iter().map(String::as_str).collect();
    header.push(data.exposure_name());
    header.extend(data.mediator_names().iter().map(String::as_str));
    header.push(data.outcome_name());
    wtr.write_record(&header)?;
    let mut row = Vec::with_capacity(header.len());
    for i in 0..data.n() {
        row.clear();
        row.extend((0..data.p()).map(|l| data.x()[(i, l)].to_string()));
        row.push(data.a()[i].to_string());
        row.extend((0..data.q()).map(|j| data.m()[(i, j)].to_string()));
        row.push(data.y()[i].to_string());
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads a square numeric matrix stored with a header row (e.g. a covariance).
pub fn load_matrix<T: Real>(path: impl AsRef<Path>) -> Result<Matrix<T>> {
    let mut rdr = open(path.as_ref())?;
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let mut rows = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row = headers
            .iter()
            .enumerate()
            .map(|(i, h)| parse_cell(record.get(i).unwrap_or(""), r + 1, h))
            .collect::<Result<Vec<T>>>()?;
        rows.push(row);
    }
    let n = rows.len();
    Ok(Matrix::from_fn(n, headers.len(), |r, c| rows[r][c]))
}

pub fn save_matrix<T: Real>(path: impl AsRef<Path>, names: &[String], mat: &Matrix<T>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut wtr = csv::Writer::from_writer(file);
    wtr.write_record(names)?;
    for r in 0..mat.rows() {
        wtr.write_record(mat.row(r).iter().map(|v| v.to_string()))?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
