//! Compressed-sparse-row matrices for the discrete operators.
//!
//! Rows store column-sorted entries. The `symmetric` flag is only ever set
//! after an exact structural check, so callers may rely on bitwise equality
//! of `(i, j)` and `(j, i)` entries whenever it is `true`.

use crate::accum::CompensatedSum;
use crate::error::{CoreError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    symmetric: bool,
}

impl SparseOperator {
    /// Builds an operator from per-row `(column, value)` lists. Entries in a
    /// row must have distinct columns; they are sorted internally.
    pub fn from_rows(n: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        if rows.len() != n {
            return Err(CoreError::InvalidArgument(format!(
                "expected {n} rows, got {}",
                rows.len()
            )));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for (i, mut row) in rows.into_iter().enumerate() {
            row.sort_unstable_by_key(|&(c, _)| c);
            for pair in row.windows(2) {
                if pair[0].0 == pair[1].0 {
                    return Err(CoreError::InvalidArgument(format!(
                        "duplicate column {} in row {i}",
                        pair[0].0
                    )));
                }
            }
            for (c, v) in row {
                if c >= n {
                    return Err(CoreError::InvalidArgument(format!(
                        "column {c} out of bounds in row {i}"
                    )));
                }
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            n,
            row_ptr,
            col_idx,
            values,
            symmetric: false,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Whether the operator passed the exact symmetry check at construction.
    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        (&self.col_idx[lo..hi], &self.values[lo..hi])
    }

    /// Diagonal as a dense vector (zero where the pattern has no entry).
    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            if let Ok(k) = cols.binary_search(&i) {
                d[i] = vals[k];
            }
        }
        d
    }

    /// Max absolute row sum.
    pub fn infinity_norm(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// y = A·x.
    ///
    /// # Panics
    /// If `x` or `y` does not have length `dim()`.
    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n, "input length mismatch");
        assert_eq!(y.len(), self.n, "output length mismatch");
        for i in 0..self.n {
            let lo = self.row_ptr[i];
            let hi = self.row_ptr[i + 1];
            let mut s = 0.0;
            for (c, v) in self.col_idx[lo..hi].iter().zip(&self.values[lo..hi]) {
                s += v * x[*c];
            }
            y[i] = s;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.apply_into(x, &mut y);
        y
    }

    /// y = A·x with compensated accumulation: every product enters the row
    /// sum exactly, so the entrywise error is at the final-rounding level
    /// even when O(h⁻⁴) stencil terms cancel down to O(1).
    pub fn apply_compensated(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n, "input length mismatch");
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let lo = self.row_ptr[i];
            let hi = self.row_ptr[i + 1];
            let mut acc = CompensatedSum::new();
            for (c, v) in self.col_idx[lo..hi].iter().zip(&self.values[lo..hi]) {
                acc.add_prod(*v, x[*c]);
            }
            y[i] = acc.value();
        }
        y
    }

    /// Exact sparse-sparse product `self · rhs`.
    ///
    /// For a fixed output entry the contributions are accumulated in
    /// ascending order of the inner index, so multiplying a bitwise-symmetric
    /// operator by itself yields a bitwise-symmetric result.
    pub fn matmul(&self, rhs: &SparseOperator) -> Result<SparseOperator> {
        if self.n != rhs.n {
            return Err(CoreError::InvalidArgument(format!(
                "dimension mismatch in sparse product: {} vs {}",
                self.n, rhs.n
            )));
        }
        let n = self.n;
        let mut acc = vec![0.0; n];
        let mut stamp = vec![usize::MAX; n];
        let mut touched: Vec<usize> = Vec::new();

        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);

        for i in 0..n {
            touched.clear();
            let (ks, kvals) = self.row(i);
            for (k, vik) in ks.iter().zip(kvals) {
                let (js, jvals) = rhs.row(*k);
                for (j, vkj) in js.iter().zip(jvals) {
                    if stamp[*j] != i {
                        stamp[*j] = i;
                        acc[*j] = 0.0;
                        touched.push(*j);
                    }
                    acc[*j] += vik * vkj;
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                col_idx.push(j);
                values.push(acc[j]);
            }
            row_ptr.push(col_idx.len());
        }
        Ok(SparseOperator {
            n,
            row_ptr,
            col_idx,
            values,
            symmetric: false,
        })
    }

    /// Returns the operator with its symmetry flag set, after verifying that
    /// the pattern and values are exactly transpose-invariant.
    pub fn into_symmetric(self) -> Result<SparseOperator> {
        if !self.is_symmetric_exact() {
            return Err(CoreError::InvalidArgument(
                "operator is not exactly symmetric".into(),
            ));
        }
        Ok(SparseOperator {
            symmetric: true,
            ..self
        })
    }

    /// Checks `A[i][j] == A[j][i]` bitwise for every stored entry.
    pub fn is_symmetric_exact(&self) -> bool {
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (j, v) in cols.iter().zip(vals) {
                let (tcols, tvals) = self.row(*j);
                match tcols.binary_search(&i) {
                    Ok(k) if tvals[k].to_bits() == v.to_bits() => {}
                    _ => return false,
                }
            }
        }
        true
    }

    /// `self + diag(d)`, inserting diagonal entries where the pattern lacks
    /// them. Symmetry is preserved.
    pub fn add_diagonal(&self, d: &[f64]) -> Result<SparseOperator> {
        if d.len() != self.n {
            return Err(CoreError::InvalidArgument(format!(
                "diagonal length {} does not match dimension {}",
                d.len(),
                self.n
            )));
        }
        let mut row_ptr = Vec::with_capacity(self.n + 1);
        let mut col_idx = Vec::with_capacity(self.nnz());
        let mut values = Vec::with_capacity(self.nnz());
        row_ptr.push(0);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            let mut placed = false;
            for (c, v) in cols.iter().zip(vals) {
                if *c == i {
                    col_idx.push(*c);
                    values.push(v + d[i]);
                    placed = true;
                } else {
                    if !placed && *c > i {
                        col_idx.push(i);
                        values.push(d[i]);
                        placed = true;
                    }
                    col_idx.push(*c);
                    values.push(*v);
                }
            }
            if !placed {
                col_idx.push(i);
                values.push(d[i]);
            }
            row_ptr.push(col_idx.len());
        }
        Ok(SparseOperator {
            n: self.n,
            row_ptr,
            col_idx,
            values,
            symmetric: self.symmetric,
        })
    }

    /// Symmetric diagonal scaling `diag(d) · self · diag(d)`. The scale
    /// factor `d[i]·d[j]` is rounded once before multiplying, so a symmetric
    /// input stays bitwise symmetric.
    pub fn scale_symmetric(&self, d: &[f64]) -> Result<SparseOperator> {
        if d.len() != self.n {
            return Err(CoreError::InvalidArgument(format!(
                "scaling length {} does not match dimension {}",
                d.len(),
                self.n
            )));
        }
        let mut out = self.clone();
        for i in 0..self.n {
            let lo = out.row_ptr[i];
            let hi = out.row_ptr[i + 1];
            for idx in lo..hi {
                let j = out.col_idx[idx];
                out.values[idx] *= d[i] * d[j];
            }
        }
        Ok(out)
    }
}
