//! Compressed sparse row storage for the symmetric operators used throughout
//! the crate (grid Laplacians, P1 mass and stiffness matrices and their
//! principal submatrices).

use std::io::Write;

use crate::error::{Error, Result};

/// Square sparse matrix in CSR form. Columns within a row are sorted and
/// unique.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    order: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseOperator {
    /// Assembles from `(row, col, value)` triplets. Duplicate entries are
    /// summed.
    pub fn from_triplets<I>(order: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut entries: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        for &(r, c, _) in &entries {
            let bad = r.max(c);
            if bad >= order {
                return Err(Error::IndexOutOfRange { index: bad, order });
            }
        }
        entries.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

        let mut row_ptr = vec![0usize; order + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            last = Some((r, c));
            row_ptr[r + 1] += 1;
            col_idx.push(c);
            values.push(v);
        }
        for i in 0..order {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            order,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Diagonal matrix.
    pub fn from_diagonal(diag: &[f64]) -> Self {
        let order = diag.len();
        Self {
            order,
            row_ptr: (0..=order).collect(),
            col_idx: (0..order).collect(),
            values: diag.to_vec(),
        }
    }

    pub fn identity(order: usize) -> Self {
        Self::from_diagonal(&vec![1.0; order])
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[span.clone()], &self.values[span])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.order).map(|i| self.get(i, i)).collect()
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.order).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.order);
        debug_assert_eq!(y.len(), self.order);
        for (i, yi) in y.iter_mut().enumerate() {
            let span = self.row_ptr[i]..self.row_ptr[i + 1];
            let mut acc = 0.0;
            for (&j, &v) in self.col_idx[span.clone()].iter().zip(&self.values[span]) {
                acc += v * x[j];
            }
            *yi = acc;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.order];
        self.apply(x, &mut y);
        y
    }

    /// `xᵀ A x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.mul_vec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// Max absolute difference between `A` and `Aᵀ` entries.
    pub fn symmetry_defect(&self) -> f64 {
        self.triplets()
            .map(|(i, j, v)| (v - self.get(j, i)).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.symmetry_defect() <= tol
    }

    /// Row sums `A·1`.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.order).map(|i| self.row(i).1.iter().sum()).collect()
    }

    /// Principal submatrix on the sorted, duplicate-free index list `indices`,
    /// in local numbering.
    pub fn principal_submatrix(&self, indices: &[usize]) -> Result<Self> {
        const NONE: usize = usize::MAX;
        let mut local = vec![NONE; self.order];
        for (k, &g) in indices.iter().enumerate() {
            if g >= self.order {
                return Err(Error::IndexOutOfRange {
                    index: g,
                    order: self.order,
                });
            }
            local[g] = k;
        }
        let mut row_ptr = Vec::with_capacity(indices.len() + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for &g in indices {
            let (cols, vals) = self.row(g);
            let start = col_idx.len();
            for (&j, &v) in cols.iter().zip(vals) {
                let l = local[j];
                if l != NONE {
                    col_idx.push(l);
                    values.push(v);
                }
            }
            // Local order follows global order only when `indices` is sorted.
            let mut pairs: Vec<(usize, f64)> = col_idx[start..]
                .iter()
                .copied()
                .zip(values[start..].iter().copied())
                .collect();
            pairs.sort_unstable_by_key(|p| p.0);
            for (k, (c, v)) in pairs.into_iter().enumerate() {
                col_idx[start + k] = c;
                values[start + k] = v;
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            order: indices.len(),
            row_ptr,
            col_idx,
            values,
        })
    }

    /// `A + diag(d)`.
    pub fn add_diagonal(&self, d: &[f64]) -> Self {
        assert_eq!(d.len(), self.order);
        let has_full_diagonal = (0..self.order).all(|i| self.row(i).0.binary_search(&i).is_ok());
        if has_full_diagonal {
            let mut out = self.clone();
            for i in 0..self.order {
                let span = out.row_ptr[i]..out.row_ptr[i + 1];
                let k = out.col_idx[span.clone()].binary_search(&i).unwrap();
                out.values[span.start + k] += d[i];
            }
            return out;
        }
        Self::from_triplets(
            self.order,
            self.triplets()
                .chain(d.iter().enumerate().map(|(i, &v)| (i, i, v))),
        )
        .expect("indices already validated")
    }

    /// `A + s·B` for operators of the same order.
    pub fn add_scaled(&self, s: f64, other: &Self) -> Self {
        assert_eq!(self.order, other.order);
        Self::from_triplets(
            self.order,
            self.triplets()
                .chain(other.triplets().map(|(i, j, v)| (i, j, s * v))),
        )
        .expect("indices already validated")
    }

    /// Symmetric diagonal scaling `½(D A + A D)` with `D = diag(d)`; entry
    /// `(i, j)` becomes `½(d_i + d_j)·a_ij`.
    pub fn symmetric_diagonal_scaling(&self, d: &[f64]) -> Self {
        assert_eq!(d.len(), self.order);
        let mut out = self.clone();
        for i in 0..self.order {
            for k in out.row_ptr[i]..out.row_ptr[i + 1] {
                let j = out.col_idx[k];
                out.values[k] *= 0.5 * (d[i] + d[j]);
            }
        }
        out
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// Frobenius-style bound `max_i Σ_j |a_ij|`, an upper bound on the
    /// spectral radius.
    pub fn gershgorin_bound(&self) -> f64 {
        (0..self.order)
            .map(|i| self.row(i).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Writes the full (non-symmetric-packed) coordinate MatrixMarket form.
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.order, self.order, self.nnz())?;
        for (i, j, v) in self.triplets() {
            writeln!(w, "{} {} {:.17e}", i + 1, j + 1, v)?;
        }
        Ok(())
    }

    /// Dense copy, for small oracle computations.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.order]; self.order];
        for (i, j, v) in self.triplets() {
            d[i][j] = v;
        }
        d
    }

    pub(crate) fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub(crate) fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub(crate) fn values(&self) -> &[f64] {
        &self.values
    }
}
