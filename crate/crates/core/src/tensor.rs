//! Dense N-dimensional arrays.
//!
//! Data is contiguous in row-major order (last index fastest), which fixes the
//! element ordering used by the binary model format. Public operations verify
//! that their outputs are finite; NaN or infinity surfaces as an error instead
//! of propagating through a training run.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<S> {
    shape: Vec<usize>,
    data: Vec<S>,
}

impl<S: Scalar> Tensor<S> {
    /// All-zero tensor. Panics on an empty shape or a zero extent; shapes are
    /// construction-time constants everywhere this is called.
    pub fn zeros(shape: &[usize]) -> Self {
        assert!(!shape.is_empty() && shape.iter().all(|&d| d > 0), "zeros: extents must be positive, got {shape:?}");
        Tensor { shape: shape.to_vec(), data: vec![S::ZERO; shape.iter().product()] }
    }

    pub fn filled(shape: &[usize], value: S) -> Self {
        let mut t = Self::zeros(shape);
        t.data.fill(value);
        t
    }

    pub fn from_vec(shape: &[usize], data: Vec<S>) -> Result<Self> {
        if shape.is_empty() || shape.iter().any(|&d| d == 0) {
            return Err(Error::InvalidShape { op: "from_vec", detail: format!("extents must be positive, got {shape:?}") });
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::InvalidShape {
                op: "from_vec",
                detail: format!("shape {shape:?} holds {expected} elements, data has {}", data.len()),
            });
        }
        Ok(Tensor { shape: shape.to_vec(), data })
    }

    /// Element-wise construction in row-major order.
    pub fn from_fn(shape: &[usize], mut f: impl FnMut(&[usize]) -> S) -> Self {
        let mut t = Self::zeros(shape);
        let mut idx = vec![0usize; shape.len()];
        for i in 0..t.data.len() {
            t.unravel_into(i, &mut idx);
            t.data[i] = f(&idx);
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<S> {
        self.data
    }

    /// Row-major linear offset of a multi-index.
    pub fn linear_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        let mut lin = 0;
        for (i, (&x, &d)) in idx.iter().zip(&self.shape).enumerate() {
            debug_assert!(x < d, "index {idx:?} out of shape {:?} at axis {i}", self.shape);
            lin = lin * d + x;
        }
        lin
    }

    /// Inverse of [`linear_index`](Self::linear_index).
    pub fn unravel(&self, mut lin: usize) -> Vec<usize> {
        let mut idx = vec![0usize; self.shape.len()];
        for axis in (0..self.shape.len()).rev() {
            idx[axis] = lin % self.shape[axis];
            lin /= self.shape[axis];
        }
        idx
    }

    fn unravel_into(&self, mut lin: usize, idx: &mut [usize]) {
        for axis in (0..self.shape.len()).rev() {
            idx[axis] = lin % self.shape[axis];
            lin /= self.shape[axis];
        }
    }

    pub fn at(&self, idx: &[usize]) -> S {
        self.data[self.linear_index(idx)]
    }

    pub fn at_mut(&mut self, idx: &[usize]) -> &mut S {
        let lin = self.linear_index(idx);
        &mut self.data[lin]
    }

    /// Same data, new shape; element count must match.
    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if shape.is_empty() || expected != self.data.len() {
            return Err(Error::ShapeMismatch { op: "reshape", lhs: self.shape.clone(), rhs: shape.to_vec() });
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn validate_finite(&self, op: &str) -> Result<()> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite { op: op.to_string() })
        }
    }

    /// Matrix product of two rank-2 tensors.
    pub fn matmul(&self, rhs: &Tensor<S>) -> Result<Tensor<S>> {
        if self.rank() != 2 || rhs.rank() != 2 || self.shape[1] != rhs.shape[0] {
            return Err(Error::ShapeMismatch { op: "matmul", lhs: self.shape.clone(), rhs: rhs.shape.clone() });
        }
        let (m, k, n) = (self.shape[0], self.shape[1], rhs.shape[1]);
        let mut out = Tensor::zeros(&[m, n]);
        S::gemm(m, k, n, S::ONE, &self.data, &rhs.data, S::ZERO, &mut out.data);
        out.validate_finite("matmul")?;
        Ok(out)
    }

    /// `self @ rhs^T` for rank-2 tensors: `[m,k] x [n,k] -> [m,n]`.
    pub fn matmul_nt(&self, rhs: &Tensor<S>) -> Result<Tensor<S>> {
        if self.rank() != 2 || rhs.rank() != 2 || self.shape[1] != rhs.shape[1] {
            return Err(Error::ShapeMismatch { op: "matmul_nt", lhs: self.shape.clone(), rhs: rhs.shape.clone() });
        }
        let (m, k, n) = (self.shape[0], self.shape[1], rhs.shape[0]);
        let mut out = Tensor::zeros(&[m, n]);
        S::gemm_strided(m, k, n, S::ONE, &self.data, k, 1, &rhs.data, 1, k, S::ZERO, &mut out.data);
        out.validate_finite("matmul_nt")?;
        Ok(out)
    }

    /// `self^T @ rhs` for rank-2 tensors: `[k,m] x [k,n] -> [m,n]`.
    pub fn matmul_tn(&self, rhs: &Tensor<S>) -> Result<Tensor<S>> {
        if self.rank() != 2 || rhs.rank() != 2 || self.shape[0] != rhs.shape[0] {
            return Err(Error::ShapeMismatch { op: "matmul_tn", lhs: self.shape.clone(), rhs: rhs.shape.clone() });
        }
        let (m, k, n) = (self.shape[1], self.shape[0], rhs.shape[1]);
        let mut out = Tensor::zeros(&[m, n]);
        S::gemm_strided(m, k, n, S::ONE, &self.data, 1, m, &rhs.data, n, 1, S::ZERO, &mut out.data);
        out.validate_finite("matmul_tn")?;
        Ok(out)
    }

    /// Rank-2 transpose.
    pub fn transpose2(&self) -> Result<Tensor<S>> {
        if self.rank() != 2 {
            return Err(Error::InvalidShape { op: "transpose2", detail: format!("rank 2 required, got {:?}", self.shape) });
        }
        let (r, c) = (self.shape[0], self.shape[1]);
        let mut out = Tensor::zeros(&[c, r]);
        for i in 0..r {
            for j in 0..c {
                out.data[j * r + i] = self.data[i * c + j];
            }
        }
        Ok(out)
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Result<Tensor<S>> {
        let data: Vec<S> = self.data.iter().map(|&v| f(v)).collect();
        let out = Tensor { shape: self.shape.clone(), data };
        out.validate_finite("map")?;
        Ok(out)
    }

    fn zip(&self, rhs: &Tensor<S>, op: &'static str, f: impl Fn(S, S) -> S) -> Result<Tensor<S>> {
        if self.shape != rhs.shape {
            return Err(Error::ShapeMismatch { op, lhs: self.shape.clone(), rhs: rhs.shape.clone() });
        }
        let data: Vec<S> = self.data.iter().zip(&rhs.data).map(|(&a, &b)| f(a, b)).collect();
        let out = Tensor { shape: self.shape.clone(), data };
        out.validate_finite(op)?;
        Ok(out)
    }

    pub fn add(&self, rhs: &Tensor<S>) -> Result<Tensor<S>> {
        self.zip(rhs, "add", |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Tensor<S>) -> Result<Tensor<S>> {
        self.zip(rhs, "sub", |a, b| a - b)
    }

    /// Element-wise (Hadamard) product.
    pub fn mul(&self, rhs: &Tensor<S>) -> Result<Tensor<S>> {
        self.zip(rhs, "mul", |a, b| a * b)
    }

    /// In-place element-wise accumulation, used for gradient sums.
    pub fn add_assign(&mut self, rhs: &Tensor<S>) -> Result<()> {
        if self.shape != rhs.shape {
            return Err(Error::ShapeMismatch { op: "add_assign", lhs: self.shape.clone(), rhs: rhs.shape.clone() });
        }
        for (a, &b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn scale(&self, factor: S) -> Result<Tensor<S>> {
        self.map(|v| v * factor)
    }

    /// Sum over one axis; the axis disappears from the shape. Reducing the
    /// only axis of a vector yields shape `[1]`.
    pub fn reduce_sum(&self, axis: usize) -> Result<Tensor<S>> {
        self.reduce(axis, "reduce_sum", S::ZERO, |acc, v| acc + v)
    }

    /// Maximum over one axis.
    pub fn reduce_max(&self, axis: usize) -> Result<Tensor<S>> {
        self.reduce(axis, "reduce_max", S::from_f64(f64::NEG_INFINITY), |acc, v| acc.max(v))
    }

    fn reduce(&self, axis: usize, op: &'static str, init: S, f: impl Fn(S, S) -> S) -> Result<Tensor<S>> {
        if axis >= self.shape.len() {
            return Err(Error::InvalidShape { op, detail: format!("axis {axis} out of range for shape {:?}", self.shape) });
        }
        let outer: usize = self.shape[..axis].iter().product();
        let mid = self.shape[axis];
        let inner: usize = self.shape[axis + 1..].iter().product();
        let mut out_shape: Vec<usize> = self.shape.clone();
        out_shape.remove(axis);
        if out_shape.is_empty() {
            out_shape.push(1);
        }
        let mut out = vec![init; outer * inner];
        for o in 0..outer {
            for m in 0..mid {
                let base = (o * mid + m) * inner;
                for i in 0..inner {
                    out[o * inner + i] = f(out[o * inner + i], self.data[base + i]);
                }
            }
        }
        let t = Tensor { shape: out_shape, data: out };
        t.validate_finite(op)?;
        Ok(t)
    }

    /// Sum of every element.
    pub fn sum(&self) -> S {
        self.data.iter().fold(S::ZERO, |acc, &v| acc + v)
    }

    /// Largest element.
    pub fn max_value(&self) -> S {
        self.data.iter().fold(S::from_f64(f64::NEG_INFINITY), |acc, &v| acc.max(v))
    }

    /// Copy into another precision.
    pub fn cast<T: Scalar>(&self) -> Tensor<T> {
        Tensor { shape: self.shape.clone(), data: self.data.iter().map(|v| T::from_f64(v.to_f64())).collect() }
    }
}
