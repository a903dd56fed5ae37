use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Fully-connected layer `y = W x + b` on a flat input vector.
#[derive(Debug, Clone)]
pub struct Dense<S> {
    /// `[out, in]`, row-major.
    pub weights: Tensor<S>,
    /// `[out]`.
    pub bias: Tensor<S>,
}

#[derive(Debug, Clone)]
pub struct DenseCache<S> {
    pub(crate) input: Tensor<S>,
}

impl<S: Scalar> Dense<S> {
    pub fn new(weights: Tensor<S>, bias: Tensor<S>) -> Result<Self> {
        if weights.rank() != 2 || bias.shape() != [weights.shape()[0]] {
            return Err(Error::ShapeMismatch { op: "dense", lhs: weights.shape().to_vec(), rhs: bias.shape().to_vec() });
        }
        Ok(Dense { weights, bias })
    }

    pub fn in_units(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn out_units(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        if input != [self.in_units()] {
            return Err(Error::ShapeMismatch { op: "dense", lhs: input.to_vec(), rhs: vec![self.in_units()] });
        }
        Ok(vec![self.out_units()])
    }

    pub fn forward(&self, input: Tensor<S>) -> Result<(Tensor<S>, DenseCache<S>)> {
        self.output_shape(input.shape())?;
        let (m, k) = (self.out_units(), self.in_units());
        let mut out = self.bias.data().to_vec();
        S::gemm(m, k, 1, S::ONE, self.weights.data(), input.data(), S::ONE, &mut out);
        let out = Tensor::from_vec(&[m], out)?;
        out.validate_finite("dense_forward")?;
        Ok((out, DenseCache { input }))
    }

    pub fn backward(&self, cache: &DenseCache<S>, grad_out: &Tensor<S>) -> Result<(Tensor<S>, Tensor<S>, Tensor<S>)> {
        if grad_out.shape() != [self.out_units()] {
            return Err(Error::ShapeMismatch { op: "dense_backward", lhs: grad_out.shape().to_vec(), rhs: vec![self.out_units()] });
        }
        let (m, k) = (self.out_units(), self.in_units());
        // d_weights = g [m,1] @ x^T [1,k]
        let mut dw = vec![S::ZERO; m * k];
        S::gemm(m, 1, k, S::ONE, grad_out.data(), cache.input.data(), S::ZERO, &mut dw);
        let dw = Tensor::from_vec(self.weights.shape(), dw)?;
        let db = grad_out.clone();
        // d_input = W^T [k,m] @ g [m,1]
        let mut dx = vec![S::ZERO; k];
        S::gemm_strided(k, m, 1, S::ONE, self.weights.data(), 1, k, grad_out.data(), 1, 1, S::ZERO, &mut dx);
        let dx = Tensor::from_vec(&[k], dx)?;
        dx.validate_finite("dense_backward")?;
        dw.validate_finite("dense_backward")?;
        Ok((dx, dw, db))
    }
}
