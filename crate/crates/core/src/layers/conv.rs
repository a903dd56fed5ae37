use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// 2-D convolution (cross-correlation, no kernel flip) with "same" zero
/// padding and stride 1, so spatial extents are preserved.
#[derive(Debug, Clone)]
pub struct Conv2d<S> {
    /// `[c_out, c_in, k, k]`, odd `k`.
    pub weights: Tensor<S>,
    /// `[c_out]`.
    pub bias: Tensor<S>,
}

#[derive(Debug, Clone)]
pub struct ConvCache<S> {
    pub(crate) input: Tensor<S>,
}

impl<S: Scalar> Conv2d<S> {
    pub fn new(weights: Tensor<S>, bias: Tensor<S>) -> Result<Self> {
        if weights.rank() != 4 || weights.shape()[2] != weights.shape()[3] || weights.shape()[2] % 2 == 0 {
            return Err(Error::InvalidShape {
                op: "conv2d",
                detail: format!("weights must be [c_out, c_in, k, k] with odd k, got {:?}", weights.shape()),
            });
        }
        if bias.shape() != [weights.shape()[0]] {
            return Err(Error::ShapeMismatch { op: "conv2d bias", lhs: weights.shape().to_vec(), rhs: bias.shape().to_vec() });
        }
        Ok(Conv2d { weights, bias })
    }

    pub fn out_channels(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn kernel(&self) -> usize {
        self.weights.shape()[2]
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        if input.len() != 3 || input[0] != self.in_channels() {
            return Err(Error::ShapeMismatch { op: "conv2d", lhs: input.to_vec(), rhs: self.weights.shape().to_vec() });
        }
        Ok(vec![self.out_channels(), input[1], input[2]])
    }

    pub fn forward(&self, input: Tensor<S>) -> Result<(Tensor<S>, ConvCache<S>)> {
        let out_shape = self.output_shape(input.shape())?;
        let (h, w) = (input.shape()[1], input.shape()[2]);
        let k = self.kernel();
        let ckk = self.in_channels() * k * k;
        let col = im2col(&input, k);
        let mut out = vec![S::ZERO; self.out_channels() * h * w];
        S::gemm(self.out_channels(), ckk, h * w, S::ONE, self.weights.data(), &col, S::ZERO, &mut out);
        for (c, row) in out.chunks_exact_mut(h * w).enumerate() {
            let b = self.bias.data()[c];
            for v in row {
                *v += b;
            }
        }
        let out = Tensor::from_vec(&out_shape, out)?;
        out.validate_finite("conv2d_forward")?;
        Ok((out, ConvCache { input }))
    }

    /// Gradients of the forward map: input, weights, bias.
    pub fn backward(&self, cache: &ConvCache<S>, grad_out: &Tensor<S>) -> Result<(Tensor<S>, Tensor<S>, Tensor<S>)> {
        let expected = self.output_shape(cache.input.shape())?;
        if grad_out.shape() != expected {
            return Err(Error::ShapeMismatch { op: "conv2d_backward", lhs: grad_out.shape().to_vec(), rhs: expected });
        }
        let (h, w) = (cache.input.shape()[1], cache.input.shape()[2]);
        let hw = h * w;
        let k = self.kernel();
        let ckk = self.in_channels() * k * k;
        let col = im2col(&cache.input, k);

        // d_weights = grad_out_mat [c_out, hw] @ col^T [hw, ckk]
        let mut dw = vec![S::ZERO; self.out_channels() * ckk];
        S::gemm_strided(self.out_channels(), hw, ckk, S::ONE, grad_out.data(), hw, 1, &col, 1, hw, S::ZERO, &mut dw);
        let dw = Tensor::from_vec(self.weights.shape(), dw)?;

        let mut db = Tensor::zeros(self.bias.shape());
        for (c, row) in grad_out.data().chunks_exact(hw).enumerate() {
            db.data_mut()[c] = row.iter().fold(S::ZERO, |acc, &v| acc + v);
        }

        // d_col = weights^T [ckk, c_out] @ grad_out_mat [c_out, hw]
        let mut dcol = vec![S::ZERO; ckk * hw];
        S::gemm_strided(ckk, self.out_channels(), hw, S::ONE, self.weights.data(), 1, ckk, grad_out.data(), hw, 1, S::ZERO, &mut dcol);
        let dx = col2im(&dcol, cache.input.shape(), k);

        dx.validate_finite("conv2d_backward")?;
        dw.validate_finite("conv2d_backward")?;
        db.validate_finite("conv2d_backward")?;
        Ok((dx, dw, db))
    }
}

/// Unroll `[c, h, w]` into a `[c*k*k, h*w]` patch matrix for same padding and
/// stride 1. Out-of-bounds source pixels contribute zero.
fn im2col<S: Scalar>(input: &Tensor<S>, k: usize) -> Vec<S> {
    let (c_in, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let pad = (k / 2) as isize;
    let hw = h * w;
    let mut col = vec![S::ZERO; c_in * k * k * hw];
    let data = input.data();
    for c in 0..c_in {
        let plane = &data[c * hw..(c + 1) * hw];
        for ky in 0..k {
            let dy = ky as isize - pad;
            for kx in 0..k {
                let dx = kx as isize - pad;
                let row = &mut col[((c * k + ky) * k + kx) * hw..((c * k + ky) * k + kx + 1) * hw];
                let x0 = 0.max(-dx) as usize;
                let x1 = (w as isize).min(w as isize - dx) as usize;
                if x0 >= x1 {
                    continue;
                }
                for y in 0..h {
                    let sy = y as isize + dy;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let src_start = sy as usize * w + (x0 as isize + dx) as usize;
                    row[y * w + x0..y * w + x1].copy_from_slice(&plane[src_start..src_start + (x1 - x0)]);
                }
            }
        }
    }
    col
}

/// Adjoint of [`im2col`]: scatter-add patch-matrix gradients back onto the
/// input grid.
fn col2im<S: Scalar>(dcol: &[S], input_shape: &[usize], k: usize) -> Tensor<S> {
    let (c_in, h, w) = (input_shape[0], input_shape[1], input_shape[2]);
    let pad = (k / 2) as isize;
    let hw = h * w;
    let mut dx = Tensor::zeros(input_shape);
    let out = dx.data_mut();
    for c in 0..c_in {
        for ky in 0..k {
            let dy = ky as isize - pad;
            for kx in 0..k {
                let dxo = kx as isize - pad;
                let row = &dcol[((c * k + ky) * k + kx) * hw..((c * k + ky) * k + kx + 1) * hw];
                let x0 = 0.max(-dxo) as usize;
                let x1 = (w as isize).min(w as isize - dxo) as usize;
                if x0 >= x1 {
                    continue;
                }
                for y in 0..h {
                    let sy = y as isize + dy;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let dst_start = c * hw + sy as usize * w + (x0 as isize + dxo) as usize;
                    for (d, &g) in out[dst_start..dst_start + (x1 - x0)].iter_mut().zip(&row[y * w + x0..y * w + x1]) {
                        *d += g;
                    }
                }
            }
        }
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn conv(weights: Tensor<f64>, bias: Tensor<f64>) -> Conv2d<f64> {
        Conv2d::new(weights, bias).unwrap()
    }

    /// Direct nested-loop convolution, the reference for the gemm path.
    fn naive_conv(input: &Tensor<f64>, weights: &Tensor<f64>, bias: &Tensor<f64>) -> Tensor<f64> {
        let (c_in, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
        let (c_out, k) = (weights.shape()[0], weights.shape()[2]);
        let pad = (k / 2) as isize;
        Tensor::from_fn(&[c_out, h, w], |idx| {
            let (o, y, x) = (idx[0], idx[1] as isize, idx[2] as isize);
            let mut acc = bias.data()[o];
            for c in 0..c_in {
                for ky in 0..k {
                    for kx in 0..k {
                        let sy = y + ky as isize - pad;
                        let sx = x + kx as isize - pad;
                        if sy >= 0 && sy < h as isize && sx >= 0 && sx < w as isize {
                            acc += weights.at(&[o, c, ky, kx]) * input.at(&[c, sy as usize, sx as usize]);
                        }
                    }
                }
            }
            acc
        })
    }

    #[test]
    fn all_ones_3x3_input_all_ones_kernel() {
        let l = conv(Tensor::filled(&[1, 1, 5, 5], 1.0), Tensor::zeros(&[1]));
        let x = Tensor::filled(&[1, 3, 3], 1.0);
        let (y, _) = l.forward(x).unwrap();
        assert_eq!(y.shape(), &[1, 3, 3]);
        assert!(y.data().iter().all(|&v| v == 9.0));
    }

    #[test]
    fn delta_kernel_is_identity() {
        let mut w = Tensor::zeros(&[1, 1, 5, 5]);
        *w.at_mut(&[0, 0, 2, 2]) = 1.0;
        let l = conv(w, Tensor::zeros(&[1]));
        let mut rng = RngStream::new(1);
        let x: Tensor<f64> = Tensor::from_fn(&[1, 4, 4], |_| rng.uniform());
        let (y, _) = l.forward(x.clone()).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn zero_input_broadcasts_bias() {
        let mut rng = RngStream::new(2);
        let w = Tensor::from_fn(&[2, 1, 5, 5], |_| rng.normal());
        let b = Tensor::from_vec(&[2], vec![0.3, -0.7]).unwrap();
        let l = conv(w, b);
        let (y, _) = l.forward(Tensor::zeros(&[1, 3, 3])).unwrap();
        for c in 0..2 {
            let expect = if c == 0 { 0.3 } else { -0.7 };
            for y_ in 0..3 {
                for x_ in 0..3 {
                    assert_eq!(y.at(&[c, y_, x_]), expect);
                }
            }
        }
    }

    #[test]
    fn gemm_path_matches_naive_oracle() {
        let mut rng = RngStream::new(3);
        let w: Tensor<f64> = Tensor::from_fn(&[3, 2, 5, 5], |_| rng.normal());
        let b: Tensor<f64> = Tensor::from_fn(&[3], |_| rng.normal());
        let x: Tensor<f64> = Tensor::from_fn(&[2, 6, 7], |_| rng.normal());
        let l = conv(w.clone(), b.clone());
        let (y, _) = l.forward(x.clone()).unwrap();
        let expect = naive_conv(&x, &w, &b);
        for (a, e) in y.data().iter().zip(expect.data()) {
            assert!((a - e).abs() < 1e-12, "{a} vs {e}");
        }
    }

    #[test]
    fn channel_mismatch_rejected() {
        let l = conv(Tensor::filled(&[1, 2, 5, 5], 0.0), Tensor::zeros(&[1]));
        assert!(l.forward(Tensor::<f64>::zeros(&[3, 4, 4])).is_err());
    }

    #[test]
    fn bias_gradient_sums_spatial() {
        let mut rng = RngStream::new(4);
        let l = conv(Tensor::from_fn(&[2, 1, 3, 3], |_| rng.normal()), Tensor::zeros(&[2]));
        let x: Tensor<f64> = Tensor::from_fn(&[1, 4, 4], |_| rng.normal());
        let (_, cache) = l.forward(x).unwrap();
        let g: Tensor<f64> = Tensor::from_fn(&[2, 4, 4], |_| rng.normal());
        let (_, _, db) = l.backward(&cache, &g).unwrap();
        for c in 0..2 {
            let sum: f64 = (0..4).flat_map(|y| (0..4).map(move |x| (y, x))).map(|(y, x)| g.at(&[c, y, x])).sum();
            assert!((db.data()[c] - sum).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_grad_out_gives_zero_grads() {
        let mut rng = RngStream::new(5);
        let l = conv(Tensor::from_fn(&[2, 2, 5, 5], |_| rng.normal()), Tensor::zeros(&[2]));
        let x: Tensor<f64> = Tensor::from_fn(&[2, 4, 4], |_| rng.normal());
        let (_, cache) = l.forward(x).unwrap();
        let (dx, dw, db) = l.backward(&cache, &Tensor::zeros(&[2, 4, 4])).unwrap();
        assert!(dx.data().iter().all(|&v| v == 0.0));
        assert!(dw.data().iter().all(|&v| v == 0.0));
        assert!(db.data().iter().all(|&v| v == 0.0));
    }
}
