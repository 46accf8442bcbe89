//! Dense row-major matrix of `f64` plus the text matrix file format
//! (`rows cols` on the first line, then one whitespace-separated row per line).

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            data: vec![0.0; rows * cols],
            rows,
            cols,
        }
    }

    pub fn from_flat(data: Vec<f64>, rows: usize, cols: usize) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimMismatch(format!(
                "flat data of {} values cannot form a {}x{} matrix",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Matrix { data, rows, cols })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::DimMismatch(format!(
                    "row {} has {} values, expected {}",
                    i,
                    r.len(),
                    cols
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            data,
            rows: rows.len(),
            cols,
        })
    }

    /// Empty matrix that rows of width `cols` can be appended to.
    pub fn with_cols(cols: usize) -> Self {
        Matrix {
            data: Vec::new(),
            rows: 0,
            cols,
        }
    }

    pub fn push_row(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.cols, "row width mismatch");
        self.data.extend_from_slice(row);
        self.rows += 1;
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Row-wise horizontal concatenation. All parts must have the same row count.
    pub fn hconcat(parts: &[&Matrix]) -> Result<Matrix> {
        let rows = parts.first().map_or(0, |m| m.rows());
        for m in parts {
            if m.rows() != rows {
                return Err(Error::DimMismatch(format!(
                    "cannot concatenate matrices with {} and {} rows",
                    rows,
                    m.rows()
                )));
            }
        }
        let cols: usize = parts.iter().map(|m| m.cols()).sum();
        let mut out = Matrix::with_cols(cols);
        let mut row = Vec::with_capacity(cols);
        for r in 0..rows {
            row.clear();
            for m in parts {
                row.extend_from_slice(m.row(r));
            }
            out.push_row(&row);
        }
        Ok(out)
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!(self.rows, other.rows);
        assert_eq!(self.cols, other.cols);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Read the text matrix format: first line `rows cols`, then `rows` lines of
/// `cols` decimal floats.
pub fn read_matrix_text<R: BufRead>(reader: R) -> Result<Matrix> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::format("empty matrix file"))?
        .map_err(|e| Error::Io(e.to_string()))?;
    let mut it = header.split_whitespace();
    let rows: usize = it
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::format("matrix header must start with the row count"))?;
    let cols: usize = it
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::format("matrix header must give the column count"))?;
    if it.next().is_some() {
        return Err(Error::format("matrix header has trailing tokens"));
    }
    let mut m = Matrix::with_cols(cols);
    let mut row = Vec::with_capacity(cols);
    for r in 0..rows {
        let line = lines
            .next()
            .ok_or_else(|| Error::format(format!("matrix ends early at row {r} of {rows}")))?
            .map_err(|e| Error::Io(e.to_string()))?;
        row.clear();
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::format(format!("row {r}: bad float '{tok}'")))?;
            row.push(v);
        }
        if row.len() != cols {
            return Err(Error::format(format!(
                "row {r} has {} values, expected {cols}",
                row.len()
            )));
        }
        m.push_row(&row);
    }
    if !m.all_finite() {
        return Err(Error::format("matrix contains non-finite values"));
    }
    Ok(m)
}

/// Write the text matrix format. Floats are printed with shortest
/// round-trip formatting, so write/read is lossless.
pub fn write_matrix_text<W: Write>(mut w: W, m: &Matrix) -> Result<()> {
    writeln!(w, "{} {}", m.rows(), m.cols()).map_err(|e| Error::Io(e.to_string()))?;
    for r in 0..m.rows() {
        let line = m
            .row(r)
            .iter()
            .map(|v| format!("{v:?}"))
            .collect::<Vec<_>>()
            .join(" ");
        writeln!(w, "{line}").map_err(|e| Error::Io(e.to_string()))?;
    }
    Ok(())
}
