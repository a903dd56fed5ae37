use super::BackwardRule;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Rectified linear unit, `max(x, 0)` element-wise.
#[derive(Debug, Clone, Copy)]
pub struct Relu;

#[derive(Debug, Clone)]
pub struct ReluCache<S> {
    pub(crate) input: Tensor<S>,
}

impl Relu {
    pub fn forward<S: Scalar>(&self, input: Tensor<S>) -> Result<(Tensor<S>, ReluCache<S>)> {
        let out = input.map(|v| v.max(S::ZERO))?;
        Ok((out, ReluCache { input }))
    }

    /// Backward under the selected rule; see [`BackwardRule`].
    pub fn backward<S: Scalar>(&self, cache: &ReluCache<S>, grad_out: &Tensor<S>, rule: BackwardRule) -> Result<Tensor<S>> {
        if grad_out.shape() != cache.input.shape() {
            return Err(Error::ShapeMismatch {
                op: "relu_backward",
                lhs: grad_out.shape().to_vec(),
                rhs: cache.input.shape().to_vec(),
            });
        }
        let mut out = grad_out.clone();
        for (g, &x) in out.data_mut().iter_mut().zip(cache.input.data()) {
            let fwd_open = x > S::ZERO;
            let grad_open = *g > S::ZERO;
            let pass = match rule {
                BackwardRule::TrueGradient => fwd_open,
                BackwardRule::Deconvnet => grad_open,
                BackwardRule::Guided => fwd_open && grad_open,
            };
            if !pass {
                *g = S::ZERO;
            }
        }
        Ok(out)
    }
}

/// Numerically shifted softmax over a flat vector.
#[derive(Debug, Clone, Copy)]
pub struct Softmax;

#[derive(Debug, Clone)]
pub struct SoftmaxCache<S> {
    pub(crate) output: Tensor<S>,
}

impl Softmax {
    pub fn forward<S: Scalar>(&self, input: &Tensor<S>) -> Result<(Tensor<S>, SoftmaxCache<S>)> {
        if input.rank() != 1 {
            return Err(Error::InvalidShape { op: "softmax", detail: format!("vector required, got {:?}", input.shape()) });
        }
        let shift = input.max_value();
        let exps = input.map(|v| (v - shift).exp())?;
        let total = exps.sum();
        let out = exps.map(|v| v / total)?;
        Ok((out.clone(), SoftmaxCache { output: out }))
    }

    /// Full Jacobian-vector product `p_i * (g_i - <g, p>)`.
    pub fn backward<S: Scalar>(&self, cache: &SoftmaxCache<S>, grad_out: &Tensor<S>) -> Result<Tensor<S>> {
        let p = &cache.output;
        if grad_out.shape() != p.shape() {
            return Err(Error::ShapeMismatch { op: "softmax_backward", lhs: grad_out.shape().to_vec(), rhs: p.shape().to_vec() });
        }
        let dot = grad_out.data().iter().zip(p.data()).fold(S::ZERO, |acc, (&g, &pv)| acc + g * pv);
        let mut out = grad_out.clone();
        for (o, &pv) in out.data_mut().iter_mut().zip(p.data()) {
            *o = pv * (*o - dot);
        }
        Ok(out)
    }
}

/// Element-wise logistic sigmoid.
#[derive(Debug, Clone, Copy)]
pub struct Sigmoid;

#[derive(Debug, Clone)]
pub struct SigmoidCache<S> {
    pub(crate) output: Tensor<S>,
}

impl Sigmoid {
    pub fn forward<S: Scalar>(&self, input: &Tensor<S>) -> Result<(Tensor<S>, SigmoidCache<S>)> {
        let out = input.map(|v| S::ONE / (S::ONE + (-v).exp()))?;
        Ok((out.clone(), SigmoidCache { output: out }))
    }

    pub fn backward<S: Scalar>(&self, cache: &SigmoidCache<S>, grad_out: &Tensor<S>) -> Result<Tensor<S>> {
        grad_out.zip_with(&cache.output, "sigmoid_backward", |g, y| g * y * (S::ONE - y))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(vals: &[f64]) -> Tensor<f64> {
        Tensor::from_vec(&[vals.len()], vals.to_vec()).unwrap()
    }

    #[test]
    fn relu_rules_follow_their_definitions() {
        let relu = Relu;
        // (x, g) -> (true-gradient, deconvnet, guided)
        let cases = [
            (2.0, 3.0, (3.0, 3.0, 3.0)),
            (-2.0, 3.0, (0.0, 3.0, 0.0)),
            (2.0, -3.0, (-3.0, 0.0, 0.0)),
            (-2.0, -3.0, (0.0, 0.0, 0.0)),
        ];
        for (x, g, (tg, dc, gd)) in cases {
            let (_, cache) = relu.forward(v(&[x])).unwrap();
            let grad = v(&[g]);
            assert_eq!(relu.backward(&cache, &grad, BackwardRule::TrueGradient).unwrap().data()[0], tg);
            assert_eq!(relu.backward(&cache, &grad, BackwardRule::Deconvnet).unwrap().data()[0], dc);
            assert_eq!(relu.backward(&cache, &grad, BackwardRule::Guided).unwrap().data()[0], gd);
        }
    }

    #[test]
    fn rules_agree_when_everything_positive() {
        let relu = Relu;
        let (_, cache) = relu.forward(v(&[0.5, 1.5, 2.5])).unwrap();
        let g = v(&[0.1, 0.2, 0.3]);
        let a = relu.backward(&cache, &g, BackwardRule::TrueGradient).unwrap();
        let b = relu.backward(&cache, &g, BackwardRule::Deconvnet).unwrap();
        let c = relu.backward(&cache, &g, BackwardRule::Guided).unwrap();
        assert_eq!(a, b);
        assert_eq!(b, c);
    }

    #[test]
    fn softmax_equal_logits_uniform() {
        let (p, _) = Softmax.forward(&v(&[1.0; 8])).unwrap();
        for &x in p.data() {
            assert!((x - 0.125).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_hand_computed_case() {
        let (p, _) = Softmax.forward(&v(&[0.0, 3f64.ln()])).unwrap();
        assert!((p.data()[0] - 0.25).abs() < 1e-12);
        assert!((p.data()[1] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn softmax_shift_invariant_and_normalized() {
        let x = v(&[0.3, -1.2, 2.5, 0.0]);
        let shifted = x.map(|v| v + 123.0).unwrap();
        let (p, _) = Softmax.forward(&x).unwrap();
        let (q, _) = Softmax.forward(&shifted).unwrap();
        assert!((p.sum() - 1.0).abs() < 1e-6);
        for (a, b) in p.data().iter().zip(q.data()) {
            assert!((a - b).abs() < 1e-6);
            assert!(*a > 0.0 && *a < 1.0);
        }
    }

    #[test]
    fn sigmoid_forward_backward_shapes() {
        let (y, cache) = Sigmoid.forward(&v(&[0.0, 100.0, -100.0])).unwrap();
        assert!((y.data()[0] - 0.5).abs() < 1e-12);
        assert!(y.data()[1] > 0.999 && y.data()[2] < 0.001);
        let g = Sigmoid.backward(&cache, &v(&[1.0, 1.0, 1.0])).unwrap();
        assert!((g.data()[0] - 0.25).abs() < 1e-12);
    }
}
