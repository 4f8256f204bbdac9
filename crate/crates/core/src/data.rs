//! Column-oriented table of real-valued samples with CSV input/output.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Named columns of equal length. Rows are units, columns are variables.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetTable {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    index: HashMap<String, usize>,
}

impl DatasetTable {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::Input(format!(
                "{} column names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        let rows = columns.first().map_or(0, Vec::len);
        let mut index = HashMap::with_capacity(names.len());
        for (i, (name, col)) in names.iter().zip(&columns).enumerate() {
            if col.len() != rows {
                return Err(Error::Input(format!(
                    "column `{name}` has {} rows, expected {rows}",
                    col.len()
                )));
            }
            if index.insert(name.clone(), i).is_some() {
                return Err(Error::Input(format!("duplicate column `{name}`")));
            }
        }
        Ok(Self {
            names,
            columns,
            index,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.index
            .get(name)
            .map(|&i| self.columns[i].as_slice())
            .ok_or_else(|| Error::Input(format!("missing column `{name}`")))
    }

    /// Returns the names in `wanted` that are not columns of this table.
    pub fn missing<'a, I>(&self, wanted: I) -> Vec<String>
    where
        I: IntoIterator<Item = &'a String>,
    {
        wanted
            .into_iter()
            .filter(|n| !self.index.contains_key(n.as_str()))
            .cloned()
            .collect()
    }

    /// New table with the given columns, in the given order.
    pub fn select(&self, names: &[String]) -> Result<Self> {
        let missing = self.missing(names);
        if !missing.is_empty() {
            return Err(Error::Input(format!("missing columns: {}", missing.join(", "))));
        }
        let columns = names
            .iter()
            .map(|n| self.columns[self.index[n]].clone())
            .collect();
        Self::new(names.to_vec(), columns)
    }

    /// Appends the columns of `other` (same row count, disjoint names).
    pub fn join(&self, other: &DatasetTable) -> Result<Self> {
        if other.n_cols() > 0 && self.n_cols() > 0 && other.n_rows() != self.n_rows() {
            return Err(Error::Input(format!(
                "cannot join tables with {} and {} rows",
                self.n_rows(),
                other.n_rows()
            )));
        }
        let mut names = self.names.clone();
        let mut columns = self.columns.clone();
        names.extend(other.names.iter().cloned());
        columns.extend(other.columns.iter().cloned());
        Self::new(names, columns)
    }

    /// Row-major matrix (rows × columns).
    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n_rows(), self.n_cols(), |r, c| self.columns[c][r])
    }

    pub fn from_matrix(names: Vec<String>, m: &DMatrix<f64>) -> Result<Self> {
        let columns = (0..m.ncols()).map(|c| m.column(c).iter().copied().collect()).collect();
        Self::new(names, columns)
    }

    pub fn all_finite(&self) -> bool {
        self.columns.iter().flatten().all(|v| v.is_finite())
    }

    /// Z-scores every column with its own mean and (population) standard
    /// deviation. Constant columns are only centered.
    pub fn standardized(&self) -> Self {
        let columns = self
            .columns
            .iter()
            .map(|c| {
                let (mean, sd) = mean_sd(c);
                let scale = if sd > 0.0 { sd } else { 1.0 };
                c.iter().map(|v| (v - mean) / scale).collect()
            })
            .collect();
        Self {
            names: self.names.clone(),
            columns,
            index: self.index.clone(),
        }
    }

    /// Hash of column names, row count and per-column mean/sd. Identifies a
    /// dataset without retaining its rows.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.n_rows() as u64).to_le_bytes());
        for (name, col) in self.names.iter().zip(&self.columns) {
            let (mean, sd) = mean_sd(col);
            h.update((name.len() as u64).to_le_bytes());
            h.update(name.as_bytes());
            h.update(mean.to_le_bytes());
            h.update(sd.to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let names: Vec<String> = rdr.headers()?.iter().map(|s| s.trim().to_string()).collect();
        let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != names.len() {
                return Err(Error::Input(format!(
                    "row {} has {} fields, expected {}",
                    row + 1,
                    rec.len(),
                    names.len()
                )));
            }
            for (c, field) in rec.iter().enumerate() {
                let v: f64 = field.trim().parse().map_err(|_| {
                    Error::Input(format!(
                        "row {}, column `{}`: `{field}` is not a number",
                        row + 1,
                        names[c]
                    ))
                })?;
                if !v.is_finite() {
                    return Err(Error::Input(format!(
                        "row {}, column `{}`: non-finite value",
                        row + 1,
                        names[c]
                    )));
                }
                columns[c].push(v);
            }
        }
        Self::new(names, columns)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(&self.names)?;
        let mut buf = Vec::with_capacity(self.n_cols());
        for r in 0..self.n_rows() {
            buf.clear();
            // `{}` on f64 prints the shortest representation that round-trips.
            buf.extend(self.columns.iter().map(|c| format!("{}", c[r])));
            wtr.write_record(&buf)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(f))
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

/// Mean and population standard deviation.
pub fn mean_sd(x: &[f64]) -> (f64, f64) {
    if x.is_empty() {
        return (0.0, 0.0);
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn variance(x: &[f64]) -> f64 {
    let (_, sd) = mean_sd(x);
    sd * sd
}

/// Linear-interpolated empirical quantile of already sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}
