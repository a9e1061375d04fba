//! Dense row-major matrices with an optional gradient accumulator.

use crate::error::{Error, Result};
use alloc::vec;
use alloc::vec::Vec;

/// A dense row-major `rows x cols` matrix of f64 values.
///
/// Parameters additionally carry an optional gradient buffer of identical
/// shape, filled in by [`crate::tape::Tape::backward`] via the model binding
/// and consumed by the optimizer.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Tensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    #[cfg_attr(feature = "serde", serde(skip))]
    grad: Option<Vec<f64>>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor { rows, cols, data: vec![0.0; rows * cols], grad: None }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Tensor { rows, cols, data: vec![value; rows * cols], grad: None }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                op: "Tensor::from_vec",
                expected: (rows, cols),
                got: (data.len(), 1),
            });
        }
        Ok(Tensor { rows, cols, data, grad: None })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |v| v.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::ShapeMismatch {
                    op: "Tensor::from_rows",
                    expected: (1, c),
                    got: (1, row.len()),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Tensor { rows: r, cols: c, data, grad: None })
    }

    /// Single-row tensor from a slice.
    pub fn row_vector(values: &[f64]) -> Self {
        Tensor { rows: 1, cols: values.len(), data: values.to_vec(), grad: None }
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

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Copy of a single row as a new 1 x cols tensor.
    pub fn row_tensor(&self, r: usize) -> Tensor {
        Tensor::row_vector(self.row(r))
    }

    /// Stack a subset of rows (by index) into a new tensor.
    pub fn select_rows(&self, indices: &[usize]) -> Tensor {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Tensor { rows: indices.len(), cols: self.cols, data, grad: None }
    }

    /// Repeat a 1 x cols row `n` times.
    pub fn tile_rows(&self, n: usize) -> Tensor {
        debug_assert_eq!(self.rows, 1);
        let mut data = Vec::with_capacity(n * self.cols);
        for _ in 0..n {
            data.extend_from_slice(&self.data);
        }
        Tensor { rows: n, cols: self.cols, data, grad: None }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
            grad: None,
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn check_finite(&self, context: &'static str) -> Result<()> {
        if self.all_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite { context })
        }
    }

    /// Squared L2 norm over all entries.
    pub fn sum_squares(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        libm::sqrt(self.sum_squares())
    }

    /// Squared Euclidean distance between two same-length rows.
    pub fn row_distance_sq(a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
    }

    // ── gradient accumulator ────────────────────────────────────────────

    pub fn grad(&self) -> Option<&[f64]> {
        self.grad.as_deref()
    }

    /// Replace the gradient buffer; length must match the data.
    pub fn set_grad(&mut self, grad: Vec<f64>) {
        assert_eq!(grad.len(), self.data.len(), "grad shape must mirror data");
        self.grad = Some(grad);
    }

    pub fn clear_grad(&mut self) {
        self.grad = None;
    }

    /// Gradient buffer, allocating zeros on first use.
    pub fn grad_mut(&mut self) -> &mut [f64] {
        if self.grad.is_none() {
            self.grad = Some(vec![0.0; self.data.len()]);
        }
        self.grad.as_deref_mut().unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_checks_length() {
        assert!(Tensor::from_vec(2, 2, vec![1.0; 3]).is_err());
        let t = Tensor::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(t.get(1, 0), 3.0);
    }

    #[test]
    fn grad_mirrors_shape() {
        let mut t = Tensor::zeros(2, 3);
        t.grad_mut()[4] = 1.5;
        assert_eq!(t.grad().unwrap().len(), 6);
        t.clear_grad();
        assert!(t.grad().is_none());
    }

    #[test]
    fn finiteness_check() {
        let mut t = Tensor::zeros(1, 2);
        assert!(t.check_finite("test").is_ok());
        t.set(0, 1, f64::NAN);
        assert!(t.check_finite("test").is_err());
    }

    #[test]
    fn tile_and_select() {
        let base = Tensor::row_vector(&[1.0, 2.0]);
        let tiled = base.tile_rows(3);
        assert_eq!(tiled.shape(), (3, 2));
        assert_eq!(tiled.row(2), &[1.0, 2.0]);
        let picked = tiled.select_rows(&[2, 0]);
        assert_eq!(picked.shape(), (2, 2));
    }
}
