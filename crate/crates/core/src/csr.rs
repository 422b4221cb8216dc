//! Rectangular CSR matrices for sparse node features.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dense::{axpy, DenseMat};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsrMat<T = f64> {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> CsrMat<T> {
    /// Keeps the nonzero entries of `m`.
    pub fn from_dense(m: &DenseMat<T>) -> Self {
        let mut row_ptr = Vec::with_capacity(m.rows() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for r in 0..m.rows() {
            for (c, &v) in m.row(r).iter().enumerate() {
                if v != T::zero() {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            rows: m.rows(),
            cols: m.cols(),
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn to_dense(&self) -> DenseMat<T> {
        let mut out = DenseMat::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            for (c, v) in self.row_entries(r) {
                out.set(r, c, v);
            }
        }
        out
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn row_entries(&self, r: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn map_values(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            values: self.values.iter().map(|&v| f(v)).collect(),
            ..self.clone()
        }
    }

    pub fn scale(&self, s: T) -> Self {
        self.map_values(|v| v * s)
    }

    pub fn cast<U: Scalar>(&self) -> CsrMat<U> {
        CsrMat {
            rows: self.rows,
            cols: self.cols,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            values: self
                .values
                .iter()
                .map(|v| U::from_f64(v.as_f64()))
                .collect(),
        }
    }

    /// Inverted dropout over the stored entries. Zero entries stay zero
    /// whatever their mask would have been, so only stored entries draw.
    pub fn dropout<R: Rng + ?Sized>(&self, rate: f64, rng: &mut R) -> Self {
        let keep = T::from_f64(1.0 / (1.0 - rate));
        let values = self
            .values
            .iter()
            .map(|&v| {
                if rng.gen::<f64>() < rate {
                    T::zero()
                } else {
                    v * keep
                }
            })
            .collect();
        Self {
            values,
            ..self.clone()
        }
    }

    /// `self · rhs`.
    pub fn matmul(&self, rhs: &DenseMat<T>) -> Result<DenseMat<T>> {
        if self.cols != rhs.rows() {
            return Err(Error::shape(
                "sparse_matmul",
                format!("{:?} x {:?}", self.shape(), rhs.shape()),
            ));
        }
        let mut out = DenseMat::zeros(self.rows, rhs.cols());
        for r in 0..self.rows {
            let row = out.row_mut(r);
            for (c, v) in self.row_entries(r) {
                if v != T::zero() {
                    axpy(row, v, rhs.row(c));
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · rhs`.
    pub fn matmul_tn(&self, rhs: &DenseMat<T>) -> Result<DenseMat<T>> {
        if self.rows != rhs.rows() {
            return Err(Error::shape(
                "sparse_matmul_tn",
                format!("{:?}ᵀ x {:?}", self.shape(), rhs.shape()),
            ));
        }
        let mut out = DenseMat::zeros(self.cols, rhs.cols());
        for r in 0..self.rows {
            let g = rhs.row(r);
            for (c, v) in self.row_entries(r) {
                if v != T::zero() {
                    axpy(out.row_mut(c), v, g);
                }
            }
        }
        Ok(out)
    }
}
