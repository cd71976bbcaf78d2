//! Dense nonnegative matrix type and its CSV interchange format.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array2, ArrayView1};
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::RngSeed;

/// A dense row-major matrix of finite, nonnegative `f64` values.
///
/// Construction validates the invariants (positive dimensions, no negative or
/// non-finite entries); after that the matrix is immutable, so values can be
/// shared freely between threads.
#[derive(Debug, Clone, PartialEq)]
pub struct NonNegMatrix {
    inner: Array2<f64>,
}

impl NonNegMatrix {
    /// Wraps an `ndarray` array, checking every invariant.
    pub fn from_array(inner: Array2<f64>) -> Result<Self> {
        let (rows, cols) = inner.dim();
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyMatrix { rows, cols });
        }
        for ((r, c), &v) in inner.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::NonFiniteEntry { row: r, col: c });
            }
            if v < 0.0 {
                return Err(Error::NegativeEntry { row: r, col: c, value: v });
            }
        }
        Ok(NonNegMatrix { inner })
    }

    /// Builds a matrix from a row-major value slice.
    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DataLength { rows, cols, len: data.len() });
        }
        let arr = Array2::from_shape_vec((rows, cols), data)
            .map_err(|_| Error::DataLength { rows, cols, len: 0 })?;
        Self::from_array(arr)
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyMatrix { rows, cols });
        }
        Ok(NonNegMatrix { inner: Array2::zeros((rows, cols)) })
    }

    /// Fills a matrix with i.i.d. uniform samples from `[lo, hi)`.
    ///
    /// `lo == hi` degenerates to a constant matrix. Entries are drawn in
    /// row-major order from the stream of `seed`, so a fixed seed reproduces
    /// the matrix exactly.
    ///
    /// # Panics
    ///
    /// Panics if `lo > hi` or `lo < 0` (callers own these preconditions).
    pub fn uniform(rows: usize, cols: usize, lo: f64, hi: f64, seed: RngSeed) -> Self {
        assert!(lo <= hi, "uniform range is inverted: [{lo}, {hi})");
        assert!(lo >= 0.0, "uniform range must be nonnegative, got lo = {lo}");
        let mut rng = seed.rng();
        let inner = if lo == hi {
            Array2::from_elem((rows, cols), lo)
        } else {
            Array2::from_shape_simple_fn((rows, cols), || rng.random_range(lo..hi))
        };
        NonNegMatrix { inner }
    }

    pub fn rows(&self) -> usize {
        self.inner.nrows()
    }

    pub fn cols(&self) -> usize {
        self.inner.ncols()
    }

    /// Total number of elements (`N_t` in the model-quality statistics).
    pub fn n_elements(&self) -> usize {
        self.rows() * self.cols()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.inner[(row, col)]
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.inner
    }

    pub fn into_array(self) -> Array2<f64> {
        self.inner
    }

    pub fn column(&self, col: usize) -> ArrayView1<'_, f64> {
        self.inner.column(col)
    }

    /// Square root of the sum of squared entries.
    pub fn frobenius_norm(&self) -> f64 {
        frobenius_norm(&self.inner)
    }

    /// Reads a matrix from the plain CSV interchange format: one row per
    /// line, comma-separated decimal values, no header. Negative entries,
    /// non-numeric fields, and ragged rows are rejected with the offending
    /// line number.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse_csv(&text, &path.display().to_string())
    }

    /// Parses the CSV interchange format from a string. `name` is used in
    /// error messages in place of a file path.
    pub fn parse_csv(text: &str, name: &str) -> Result<Self> {
        let mut data = Vec::new();
        let mut cols = None;
        let mut rows = 0usize;
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let mut row_len = 0usize;
            for field in line.split(',') {
                let value: f64 = field.trim().parse().map_err(|_| Error::CsvFormat {
                    path: name.to_string(),
                    line: line_no,
                    reason: format!("cannot parse '{}' as a number", field.trim()),
                })?;
                if !value.is_finite() {
                    return Err(Error::CsvFormat {
                        path: name.to_string(),
                        line: line_no,
                        reason: "non-finite value".to_string(),
                    });
                }
                if value < 0.0 {
                    return Err(Error::CsvFormat {
                        path: name.to_string(),
                        line: line_no,
                        reason: format!("negative entry {value} is not allowed"),
                    });
                }
                data.push(value);
                row_len += 1;
            }
            match cols {
                None => cols = Some(row_len),
                Some(expected) if expected != row_len => {
                    return Err(Error::CsvFormat {
                        path: name.to_string(),
                        line: line_no,
                        reason: format!("expected {expected} columns, found {row_len}"),
                    });
                }
                _ => {}
            }
            rows += 1;
        }
        let cols = cols.unwrap_or(0);
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyMatrix { rows, cols });
        }
        Self::from_rows(rows, cols, data)
    }

    /// Writes the matrix in the CSV interchange format.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::new();
        for row in self.inner.rows() {
            let mut first = true;
            for v in row {
                if !first {
                    out.push(',');
                }
                let _ = write!(out, "{v}");
                first = false;
            }
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

/// Frobenius norm of an arbitrary dense array (not restricted to nonnegative
/// values; also used on residuals).
pub fn frobenius_norm(m: &Array2<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}
