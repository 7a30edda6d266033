//! Matrix CSV files: a `rows,cols` header line followed by one line per row.
//! Values are written in Rust's shortest round-trip decimal form, so a
//! write/read cycle is bit-exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::DenseMatrix;

pub fn matrix_to_csv(m: &DenseMatrix) -> String {
    let mut out = format!("{},{}\n", m.nrows(), m.ncols());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            if c > 0 {
                out.push(',');
            }
            write!(out, "{}", m[(r, c)]).expect("write to string");
        }
        out.push('\n');
    }
    out
}

pub fn matrix_from_csv(text: &str) -> Result<DenseMatrix> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Parse("empty matrix file".into()))?;
    let dims: Vec<usize> = header
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Parse(format!("bad header {header:?}: {e}")))?;
    let [rows, cols] = dims[..] else {
        return Err(Error::Parse(format!("header must be rows,cols; got {header:?}")));
    };
    let mut data = Vec::with_capacity(rows * cols);
    for (r, line) in lines.enumerate() {
        let before = data.len();
        for tok in line.split(',') {
            let v: f64 = tok.trim().parse().map_err(|e| Error::Parse(format!("row {r}: bad value {tok:?}: {e}")))?;
            if !v.is_finite() {
                return Err(Error::Parse(format!("row {r}: non-finite value")));
            }
            data.push(v);
        }
        if data.len() - before != cols {
            return Err(Error::Parse(format!("row {r}: expected {cols} values, got {}", data.len() - before)));
        }
    }
    if data.len() != rows * cols {
        return Err(Error::Parse(format!("expected {rows} rows, got {}", data.len() / cols.max(1))));
    }
    Ok(DenseMatrix::from_row_slice(rows, cols, &data))
}

pub fn write_matrix(path: &Path, m: &DenseMatrix) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, matrix_to_csv(m))?;
    Ok(())
}

pub fn read_matrix(path: &Path) -> Result<DenseMatrix> {
    matrix_from_csv(&fs::read_to_string(path)?)
}
