//! Input parsing, digests and atomic output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use super::CliError;
use crate::discrete::DiscreteJoint;

/// `sha256:<hex>` of the given bytes.
pub fn digest(bytes: &[u8]) -> String {
    let hash = Sha256::digest(bytes);
    let hex: String = hash.iter().map(|b| format!("{b:02x}")).collect();
    format!("sha256:{hex}")
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

/// Parsed JSON document and the digest of its bytes.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<(T, String), CliError> {
    let bytes = read_bytes(path)?;
    let value = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok((value, digest(&bytes)))
}

#[derive(Deserialize)]
struct PairPmfDoc {
    p: Vec<Vec<f64>>,
}

/// Two-way pmf `{"p": [[p(x0,y0), ...], ...]}` with rows indexed by `x`.
pub fn read_pair_pmf(path: &Path) -> Result<(DiscreteJoint, String), CliError> {
    let (doc, digest): (PairPmfDoc, String) = read_json(path)?;
    let rows = doc.p.len();
    let cols = doc.p.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 || doc.p.iter().any(|r| r.len() != cols) {
        return Err(CliError::Input(format!("{}: pmf must be a nonempty rectangular array", path.display())));
    }
    let flat: Vec<f64> = doc.p.into_iter().flatten().collect();
    Ok((DiscreteJoint::new(DMatrix::from_row_slice(rows, cols, &flat))?, digest))
}

/// Data CSV with a header row; one column per feature, one row per draw.
pub fn read_data_csv(path: &Path) -> Result<(DMatrix<f64>, String), CliError> {
    let bytes = read_bytes(path)?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes.as_slice());
    let width = reader
        .headers()
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
        .len();
    let mut values = Vec::new();
    let mut rows = 0;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                CliError::Input(format!("{}: row {}, column {}: `{field}` is not a number", path.display(), i + 1, j + 1))
            })?;
            values.push(v);
        }
        rows += 1;
    }
    if rows == 0 || width == 0 {
        return Err(CliError::Input(format!("{}: no data rows", path.display())));
    }
    Ok((DMatrix::from_row_slice(rows, width, &values), digest(&bytes)))
}

/// Unbiased sample covariance of the rows of `data`.
pub fn sample_covariance(data: &DMatrix<f64>) -> Result<DMatrix<f64>, CliError> {
    let n = data.nrows();
    if n < 2 {
        return Err(CliError::Input("need at least 2 data rows".into()));
    }
    let mean = data.row_mean();
    let centered = DMatrix::from_fn(n, data.ncols(), |i, j| data[(i, j)] - mean[j]);
    Ok(centered.transpose() * &centered / (n - 1) as f64)
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory followed by a rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let fail = |e: std::io::Error| CliError::Input(format!("cannot write {}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(fail)?;
    tmp.write_all(contents.as_bytes()).map_err(fail)?;
    tmp.as_file().sync_all().map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}
