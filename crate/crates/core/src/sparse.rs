use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Symmetric sparse matrix: explicit diagonal plus off-diagonal entries in
/// CSR layout (each undirected entry stored in both rows).
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymmetric {
    n: usize,
    diag: Vec<f64>,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseSymmetric {
    /// Builds from a diagonal and off-diagonal `(i, j, value)` entries given
    /// once per unordered pair. Repeated pairs are summed.
    pub fn from_entries(diag: Vec<f64>, entries: &[(usize, usize, f64)]) -> Result<Self> {
        let n = diag.len();
        let mut counts = vec![0usize; n];
        for &(i, j, _) in entries {
            if i >= n || j >= n || i == j {
                return Err(Error::InvalidArgument(format!("bad off-diagonal entry ({i}, {j}) for n = {n}")));
            }
            counts[i] += 1;
            counts[j] += 1;
        }
        let mut row_ptr = vec![0usize; n + 1];
        for i in 0..n {
            row_ptr[i + 1] = row_ptr[i] + counts[i];
        }
        let mut fill = row_ptr[..n].to_vec();
        let mut cols = vec![0usize; row_ptr[n]];
        let mut vals = vec![0.0; row_ptr[n]];
        for &(i, j, v) in entries {
            cols[fill[i]] = j;
            vals[fill[i]] = v;
            fill[i] += 1;
            cols[fill[j]] = i;
            vals[fill[j]] = v;
            fill[j] += 1;
        }

        // Sort each row by column and merge duplicates, summing in input order.
        let mut out_ptr = vec![0usize; n + 1];
        let mut out_cols = Vec::with_capacity(cols.len());
        let mut out_vals = Vec::with_capacity(vals.len());
        let mut row: Vec<(usize, usize, f64)> = Vec::new();
        for i in 0..n {
            row.clear();
            row.extend((row_ptr[i]..row_ptr[i + 1]).map(|p| (cols[p], p, vals[p])));
            row.sort_by_key(|&(c, p, _)| (c, p));
            for &(c, _, v) in &row {
                if out_cols.len() > out_ptr[i] && *out_cols.last().unwrap() == c {
                    *out_vals.last_mut().unwrap() += v;
                } else {
                    out_cols.push(c);
                    out_vals.push(v);
                }
            }
            out_ptr[i + 1] = out_cols.len();
        }
        Ok(Self {
            n,
            diag,
            row_ptr: out_ptr,
            cols: out_cols,
            vals: out_vals,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn nnz_offdiag(&self) -> usize {
        self.cols.len()
    }

    /// Off-diagonal entries of row `i` as `(column, value)`, ascending columns.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |p| (self.cols[p], self.vals[p]))
    }

    /// `y = A x`
    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let mut acc = self.diag[i] * x[i];
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[p] * x[self.cols[p]];
            }
            y[i] = acc;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        let mut y = vec![0.0; self.n];
        self.apply_into(x, &mut y);
        Ok(y)
    }

    /// `Y = A X` for an `n × s` block.
    pub fn apply_block(&self, x: &DMatrix<f64>, y: &mut DMatrix<f64>) {
        let s = x.ncols();
        // Row-major copies make each vertex's block row contiguous.
        let xt = x.transpose();
        let xr = xt.as_slice();
        let mut yr = vec![0.0; self.n * s];
        for i in 0..self.n {
            let out = &mut yr[i * s..(i + 1) * s];
            let d = self.diag[i];
            for (o, v) in out.iter_mut().zip(&xr[i * s..(i + 1) * s]) {
                *o = d * v;
            }
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let w = self.vals[p];
                let j = self.cols[p];
                for (o, v) in out.iter_mut().zip(&xr[j * s..(j + 1) * s]) {
                    *o += w * v;
                }
            }
        }
        *y = DMatrix::from_row_slice(self.n, s, &yr);
    }

    /// `S A S` for the diagonal scaling `S = diag(scale)`.
    pub fn scaled(&self, scale: &[f64]) -> Self {
        let mut out = self.clone();
        for i in 0..self.n {
            out.diag[i] *= scale[i] * scale[i];
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                out.vals[p] *= scale[i] * scale[self.cols[p]];
            }
        }
        out
    }

    /// Gershgorin upper bound on the largest eigenvalue.
    pub fn gershgorin_upper(&self) -> f64 {
        (0..self.n)
            .map(|i| self.diag[i] + self.row(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            m[(i, i)] = self.diag[i];
            for (j, v) in self.row(i) {
                m[(i, j)] += v;
            }
        }
        m
    }
}
