//! Compressed sparse row matrices over `f64`.
//!
//! Only the handful of kernels the embedding pipeline needs: assembly from
//! triplets, transpose, sparse-sparse products with a drop threshold, and
//! products against dense (column-major) blocks.

use nalgebra::DMatrix;
use rayon::prelude::*;

/// Column indices are stored as `u32`: the dense products are bound by
/// memory traffic, and four bytes less per entry is measurable.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CsrMatrix {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n as u32).collect(),
            values: vec![1.0; n],
        }
    }

    /// Assembles a matrix from `(row, col, value)` triplets. Duplicates are
    /// summed; explicit zeros are kept out of the structure.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nrows];
        for &(i, j, v) in triplets {
            assert!(i < nrows && j < ncols, "triplet ({i}, {j}) out of bounds");
            rows[i].push((j, v));
        }
        Self::from_rows(ncols, rows)
    }

    /// Builds a matrix from unsorted per-row entry lists.
    pub fn from_rows(ncols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        assert!(ncols <= u32::MAX as usize + 1, "{ncols} columns exceed the index range");
        let nrows = rows.len();
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for mut row in rows {
            row.sort_unstable_by_key(|e| e.0);
            let mut k = 0;
            while k < row.len() {
                let col = row[k].0;
                let mut acc = 0.0;
                while k < row.len() && row[k].0 == col {
                    acc += row[k].1;
                    k += 1;
                }
                if acc != 0.0 {
                    indices.push(col as u32);
                    values.push(acc);
                }
            }
            indptr.push(indices.len());
        }
        CsrMatrix {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let rows = (0..m.nrows())
            .map(|i| {
                (0..m.ncols())
                    .filter_map(|j| {
                        let v = m[(i, j)];
                        (v != 0.0).then_some((j, v))
                    })
                    .collect()
            })
            .collect();
        Self::from_rows(m.ncols(), rows)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let r = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        if j >= self.ncols {
            return 0.0;
        }
        match cols.binary_search(&(j as u32)) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j as usize, v))
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.nrows)
            .map(|i| self.row(i).1.iter().sum())
            .collect()
    }

    /// Applies `f` to every stored value, keeping the sparsity pattern.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = f(*v));
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map_values(|v| v * s)
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &j in &self.indices {
            counts[j as usize + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let slot = next[j as usize];
                indices[slot] = i as u32;
                values[slot] = v;
                next[j as usize] += 1;
            }
        }
        CsrMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            indptr,
            indices,
            values,
        }
    }

    /// Entrywise sum of two matrices of equal shape.
    pub fn add(&self, other: &CsrMatrix) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let rows = (0..self.nrows)
            .map(|i| {
                let (ca, va) = self.row(i);
                let (cb, vb) = other.row(i);
                ca.iter()
                    .map(|&j| j as usize)
                    .zip(va.iter().copied())
                    .chain(cb.iter().map(|&j| j as usize).zip(vb.iter().copied()))
                    .collect()
            })
            .collect();
        Self::from_rows(self.ncols, rows)
    }

    /// Sparse product `self * other`; entries with magnitude below
    /// `drop_below` are removed from the result.
    pub fn mul_sparse(&self, other: &CsrMatrix, drop_below: f64) -> Self {
        assert_eq!(self.ncols, other.nrows, "inner dimensions differ");
        let ncols = other.ncols;
        let rows: Vec<(Vec<u32>, Vec<f64>)> = (0..self.nrows)
            .into_par_iter()
            .map_init(
                || (vec![0.0f64; ncols], vec![false; ncols], Vec::<u32>::new()),
                |(acc, seen, touched), i| {
                    let (ca, va) = self.row(i);
                    for (&k, &a) in ca.iter().zip(va) {
                        let (cb, vb) = other.row(k as usize);
                        for (&j, &b) in cb.iter().zip(vb) {
                            let j = j as usize;
                            if !seen[j] {
                                seen[j] = true;
                                touched.push(j as u32);
                            }
                            acc[j] += a * b;
                        }
                    }
                    touched.sort_unstable();
                    let mut cols = Vec::with_capacity(touched.len());
                    let mut vals = Vec::with_capacity(touched.len());
                    for &j in touched.iter() {
                        let v = acc[j as usize];
                        if v != 0.0 && v.abs() >= drop_below {
                            cols.push(j);
                            vals.push(v);
                        }
                        acc[j as usize] = 0.0;
                        seen[j as usize] = false;
                    }
                    touched.clear();
                    (cols, vals)
                },
            )
            .collect();
        let mut indptr = Vec::with_capacity(self.nrows + 1);
        indptr.push(0);
        let total = rows.iter().map(|r| r.0.len()).sum();
        let mut indices = Vec::with_capacity(total);
        let mut values = Vec::with_capacity(total);
        for (c, v) in rows {
            indices.extend(c);
            values.extend(v);
            indptr.push(indices.len());
        }
        CsrMatrix {
            nrows: self.nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    /// Dense product `self * x`, parallel over the rows of `self`.
    pub fn mul_dense(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(self.ncols, x.nrows(), "inner dimensions differ");
        let w = x.ncols();
        // one pass over the matrix, reading rows of x contiguously
        let xt = x.transpose();
        let xs = xt.as_slice();
        let mut out_t = DMatrix::zeros(w, self.nrows);
        if w > 0 {
            out_t.as_mut_slice().par_chunks_mut(w).enumerate().for_each(|(i, acc)| {
                let (cols, vals) = self.row(i);
                for (&k, &v) in cols.iter().zip(vals) {
                    let k = k as usize;
                    for (a, &b) in acc.iter_mut().zip(&xs[k * w..(k + 1) * w]) {
                        *a += v * b;
                    }
                }
            });
        }
        out_t.transpose()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.ncols, x.len());
        (0..self.nrows)
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).map(|(&k, &v)| v * x[k as usize]).sum()
            })
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            m[(i, j)] = v;
        }
        m
    }
}

/// Dense-times-sparse product `x * s` where `s_t` holds the transpose of `s`.
/// Parallel over output columns, which are contiguous in column-major storage.
pub fn dense_mul_sparse_t(x: &DMatrix<f64>, s_t: &CsrMatrix) -> DMatrix<f64> {
    assert_eq!(x.ncols(), s_t.ncols(), "inner dimensions differ");
    let nrows = x.nrows();
    let mut out = DMatrix::zeros(nrows, s_t.nrows());
    if nrows == 0 {
        return out;
    }
    out.as_mut_slice()
        .par_chunks_mut(nrows)
        .enumerate()
        .for_each(|(j, col)| {
            let (ks, vals) = s_t.row(j);
            for (&k, &v) in ks.iter().zip(vals) {
                let xk = x.column(k as usize);
                for (slot, &xv) in col.iter_mut().zip(xk.iter()) {
                    *slot += v * xv;
                }
            }
        });
    out
}
