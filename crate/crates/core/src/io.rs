//! Matrix CSV files and model bundles.
//!
//! Matrix files are plain comma-separated rows with no header. Values are
//! written with 17 significant digits so a write/read round trip is exact.
//! Time series are stored with one row per state component and one column
//! per time step.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model_data::{ModelKind, VarModel};
use crate::report::fmt_real;
use crate::{Error, Matrix, Result};

fn parse_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Parse { path: path.display().to_string(), reason: reason.into() }
}

pub fn write_matrix<W: Write>(m: &Matrix, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for i in 0..m.nrows() {
        w.write_record(m.row(i).iter().map(|v| fmt_real(*v)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_matrix_file(m: &Matrix, path: &Path) -> Result<()> {
    write_matrix(m, BufWriter::new(File::create(path)?))
}

/// Reads a rectangular matrix of finite reals.
pub fn read_matrix_file(path: &Path) -> Result<Matrix> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| parse_err(path, e.to_string()))?;
    let mut data = Vec::new();
    let mut ncols = None;
    let mut nrows = 0;
    for (i, record) in r.records().enumerate() {
        let record = record.map_err(|e| parse_err(path, e.to_string()))?;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match ncols {
            None => ncols = Some(record.len()),
            Some(n) if n != record.len() => {
                return Err(parse_err(path, format!("row {} has {} fields, expected {n}", i + 1, record.len())))
            }
            _ => {}
        }
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(path, format!("row {}, column {}: {field:?} is not a number", i + 1, j + 1)))?;
            if !v.is_finite() {
                return Err(parse_err(path, format!("row {}, column {}: non-finite value", i + 1, j + 1)));
            }
            data.push(v);
        }
        nrows += 1;
    }
    let ncols = ncols.ok_or_else(|| parse_err(path, "file is empty"))?;
    Ok(Matrix::from_row_slice(nrows, ncols, &data))
}

/// Contents of `meta.json` in a model bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub p: usize,
    pub seed: Option<u64>,
    pub kind: ModelKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nnz: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
    pub spectral_radius: f64,
}

/// Writes `A.csv`, `Q.csv` and `meta.json` into `dir`, creating it if needed.
pub fn write_model_bundle(model: &VarModel, meta: &ModelMeta, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_matrix_file(model.a(), &dir.join("A.csv"))?;
    write_matrix_file(model.q(), &dir.join("Q.csv"))?;
    write_json(meta, &dir.join("meta.json"))
}

pub fn read_model_bundle(dir: &Path) -> Result<(VarModel, ModelMeta)> {
    let a = read_matrix_file(&dir.join("A.csv"))?;
    let q = read_matrix_file(&dir.join("Q.csv"))?;
    let meta_path = dir.join("meta.json");
    let meta: ModelMeta = serde_json::from_reader(File::open(&meta_path)?)
        .map_err(|e| parse_err(&meta_path, e.to_string()))?;
    if meta.p != a.nrows() {
        return Err(parse_err(&meta_path, format!("p = {} but A.csv is {}×{}", meta.p, a.nrows(), a.ncols())));
    }
    Ok((VarModel::new(a, q)?, meta))
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}
