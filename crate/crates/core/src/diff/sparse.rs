use alloc::vec::Vec;

use super::tensor::Tensor;
use crate::error::{bail, Result};

/// Square CSR matrix used for message passing.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Build from `(row, col, value)` triplets. Triplets must be sorted by
    /// row then column and contain no duplicates.
    pub fn from_sorted_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        let mut row = 0;
        let mut last: Option<(usize, usize)> = None;
        for &(r, c, v) in triplets {
            if r >= n || c >= n {
                bail!(Input, "triplet ({}, {}) outside {}x{}", r, c, n, n);
            }
            if let Some(prev) = last {
                if (r, c) <= prev {
                    bail!(Input, "triplets not strictly sorted at ({}, {})", r, c);
                }
            }
            last = Some((r, c));
            while row < r {
                row_ptr.push(col_idx.len());
                row += 1;
            }
            col_idx.push(c);
            values.push(v);
        }
        while row < n {
            row_ptr.push(col_idx.len());
            row += 1;
        }
        Ok(SparseMatrix { n, row_ptr, col_idx, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Entries `(col, value)` of row `r`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        self.col_idx[a..b].iter().copied().zip(self.values[a..b].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|&(cc, _)| cc == c).map_or(0.0, |(_, v)| v)
    }

    pub fn to_dense(&self) -> Tensor {
        let mut out = Tensor::zeros(self.n, self.n);
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                out.set(r, c, v);
            }
        }
        out
    }

    /// `S · X`
    pub fn mul_dense(&self, x: &Tensor) -> Result<Tensor> {
        if x.rows() != self.n {
            bail!(Shape, "sparse {}x{} times {}x{}", self.n, self.n, x.rows(), x.cols());
        }
        let mut out = Tensor::zeros(self.n, x.cols());
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                let src = x.row(c);
                for (o, s) in out.row_mut(r).iter_mut().zip(src) {
                    *o += v * s;
                }
            }
        }
        Ok(out)
    }

    /// `out += Sᵀ · Y`
    pub(crate) fn mul_transpose_acc(&self, y: &Tensor, out: &mut Tensor) {
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                let (src_row, dst_row) = (r, c);
                for k in 0..y.cols() {
                    let add = v * y.get(src_row, k);
                    out.row_mut(dst_row)[k] += add;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn csr_roundtrip_and_product() {
        let s = SparseMatrix::from_sorted_triplets(3, &[(0, 0, 1.0), (0, 2, 2.0), (2, 1, 3.0)]).unwrap();
        assert_eq!(s.nnz(), 3);
        assert_eq!(s.get(0, 2), 2.0);
        assert_eq!(s.get(1, 1), 0.0);
        let x = Tensor::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        assert_eq!(s.mul_dense(&x).unwrap().data(), &[7.0, 0.0, 6.0]);
        let mut t = Tensor::zeros(3, 1);
        s.mul_transpose_acc(&x, &mut t);
        assert_eq!(t, s.to_dense().transpose().matmul(&x).unwrap());
    }

    #[test]
    fn rejects_unsorted() {
        assert!(SparseMatrix::from_sorted_triplets(2, &[(1, 0, 1.0), (0, 0, 1.0)]).is_err());
    }
}
