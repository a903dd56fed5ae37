//! Forward and backward passes for every layer in the network family:
//! 5x5 same-padding convolution, ReLU, 2x2 max-pooling, dense, softmax,
//! sigmoid, inverted dropout, flatten, and a single-layer LSTM.
//!
//! Layers hold parameters only. A forward pass returns the values the matching
//! backward pass needs as an explicit cache, so a shared immutable model can
//! run many passes concurrently, one cache per in-flight sample.

mod activations;
mod conv;
mod dense;
mod dropout;
mod flatten;
mod lstm;
mod pool;

pub use activations::{Relu, Sigmoid, Softmax};
pub use conv::Conv2d;
pub use dense::Dense;
pub use dropout::Dropout;
pub use flatten::Flatten;
pub use lstm::Lstm;
pub use pool::MaxPool;

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// ReLU backward behavior. Exactly one rule is active per backward pass.
///
/// - `TrueGradient`: pass where the forward input was positive.
/// - `Deconvnet`: pass where the incoming gradient is positive, ignoring the
///   forward sign.
/// - `Guided`: pass only where both are positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackwardRule {
    TrueGradient,
    Deconvnet,
    Guided,
}

/// Per-pass context: training mode enables dropout, which draws its masks
/// from `rng`.
pub struct PassCtx<'a> {
    pub training: bool,
    pub rng: Option<&'a mut RngStream>,
}

impl<'a> PassCtx<'a> {
    pub fn infer() -> PassCtx<'static> {
        PassCtx { training: false, rng: None }
    }

    pub fn train(rng: &'a mut RngStream) -> PassCtx<'a> {
        PassCtx { training: true, rng: Some(rng) }
    }

    fn rng(&mut self, layer: &'static str) -> Result<&mut RngStream> {
        self.rng
            .as_deref_mut()
            .ok_or_else(|| Error::InvalidConfig(format!("{layer}: training pass needs an RNG stream")))
    }
}

/// One layer of a model: parameters plus the forward/backward rules.
#[derive(Debug, Clone)]
pub enum Layer<S> {
    Conv2d(Conv2d<S>),
    Relu(Relu),
    MaxPool(MaxPool),
    Dense(Dense<S>),
    Softmax(Softmax),
    Sigmoid(Sigmoid),
    Dropout(Dropout),
    Flatten(Flatten),
    Lstm(Lstm<S>),
}

/// Values recorded by one forward pass of one layer.
#[derive(Debug, Clone)]
pub enum LayerCache<S> {
    Conv2d(conv::ConvCache<S>),
    Relu(activations::ReluCache<S>),
    MaxPool(pool::PoolCache),
    Dense(dense::DenseCache<S>),
    Softmax(activations::SoftmaxCache<S>),
    Sigmoid(activations::SigmoidCache<S>),
    Dropout(dropout::DropoutCache<S>),
    Flatten(flatten::FlattenCache),
    Lstm(Box<lstm::LstmCache<S>>),
}

impl<S: Scalar> Layer<S> {
    /// Forward pass that records the cache needed by [`backward`](Self::backward).
    pub fn forward(&self, x: Tensor<S>, ctx: &mut PassCtx<'_>) -> Result<(Tensor<S>, LayerCache<S>)> {
        match self {
            Layer::Conv2d(l) => {
                let (y, c) = l.forward(x)?;
                Ok((y, LayerCache::Conv2d(c)))
            }
            Layer::Relu(l) => {
                let (y, c) = l.forward(x)?;
                Ok((y, LayerCache::Relu(c)))
            }
            Layer::MaxPool(l) => {
                let (y, c) = l.forward(&x)?;
                Ok((y, LayerCache::MaxPool(c)))
            }
            Layer::Dense(l) => {
                let (y, c) = l.forward(x)?;
                Ok((y, LayerCache::Dense(c)))
            }
            Layer::Softmax(l) => {
                let (y, c) = l.forward(&x)?;
                Ok((y, LayerCache::Softmax(c)))
            }
            Layer::Sigmoid(l) => {
                let (y, c) = l.forward(&x)?;
                Ok((y, LayerCache::Sigmoid(c)))
            }
            Layer::Dropout(l) => {
                let (y, c) = if ctx.training && l.p > 0.0 {
                    l.forward_train(x, ctx.rng("dropout")?)?
                } else {
                    l.forward_infer(x)
                };
                Ok((y, LayerCache::Dropout(c)))
            }
            Layer::Flatten(l) => {
                let (y, c) = l.forward(x)?;
                Ok((y, LayerCache::Flatten(c)))
            }
            Layer::Lstm(l) => {
                let mask = if ctx.training && l.recurrent_dropout > 0.0 {
                    Some(l.draw_recurrent_mask(ctx.rng("lstm")?))
                } else {
                    None
                };
                let (y, c) = l.forward(x, mask)?;
                Ok((y, LayerCache::Lstm(Box::new(c))))
            }
        }
    }

    /// Inference-mode forward: dropout is an identity, no cache is kept.
    pub fn forward_infer(&self, x: Tensor<S>) -> Result<Tensor<S>> {
        match self {
            Layer::Conv2d(l) => Ok(l.forward(x)?.0),
            Layer::Relu(l) => Ok(l.forward(x)?.0),
            Layer::MaxPool(l) => Ok(l.forward(&x)?.0),
            Layer::Dense(l) => Ok(l.forward(x)?.0),
            Layer::Softmax(l) => Ok(l.forward(&x)?.0),
            Layer::Sigmoid(l) => Ok(l.forward(&x)?.0),
            Layer::Dropout(l) => Ok(l.forward_infer(x).0),
            Layer::Flatten(l) => Ok(l.forward(x)?.0),
            Layer::Lstm(l) => Ok(l.forward(x, None)?.0),
        }
    }

    /// Backward pass; consumes the cache from the matching forward call.
    /// Returns the gradient with respect to the layer input plus the parameter
    /// gradients in the same order as [`params`](Self::params).
    pub fn backward(
        &self,
        cache: LayerCache<S>,
        grad_out: &Tensor<S>,
        rule: BackwardRule,
    ) -> Result<(Tensor<S>, Vec<Tensor<S>>)> {
        match (self, cache) {
            (Layer::Conv2d(l), LayerCache::Conv2d(c)) => {
                let (dx, dw, db) = l.backward(&c, grad_out)?;
                Ok((dx, vec![dw, db]))
            }
            (Layer::Relu(l), LayerCache::Relu(c)) => Ok((l.backward(&c, grad_out, rule)?, vec![])),
            (Layer::MaxPool(l), LayerCache::MaxPool(c)) => Ok((l.backward(&c, grad_out)?, vec![])),
            (Layer::Dense(l), LayerCache::Dense(c)) => {
                let (dx, dw, db) = l.backward(&c, grad_out)?;
                Ok((dx, vec![dw, db]))
            }
            (Layer::Softmax(l), LayerCache::Softmax(c)) => Ok((l.backward(&c, grad_out)?, vec![])),
            (Layer::Sigmoid(l), LayerCache::Sigmoid(c)) => Ok((l.backward(&c, grad_out)?, vec![])),
            (Layer::Dropout(l), LayerCache::Dropout(c)) => Ok((l.backward(&c, grad_out)?, vec![])),
            (Layer::Flatten(l), LayerCache::Flatten(c)) => Ok((l.backward(&c, grad_out)?, vec![])),
            (Layer::Lstm(l), LayerCache::Lstm(c)) => {
                let (dx, dwi, dwh, db) = l.backward(&c, grad_out)?;
                Ok((dx, vec![dwi, dwh, db]))
            }
            _ => Err(Error::Invalid("layer/cache kind mismatch in backward".into())),
        }
    }

    /// Learnable tensors, weights before biases.
    pub fn params(&self) -> Vec<&Tensor<S>> {
        match self {
            Layer::Conv2d(l) => vec![&l.weights, &l.bias],
            Layer::Dense(l) => vec![&l.weights, &l.bias],
            Layer::Lstm(l) => vec![&l.w_ih, &l.w_hh, &l.bias],
            _ => vec![],
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<S>> {
        match self {
            Layer::Conv2d(l) => vec![&mut l.weights, &mut l.bias],
            Layer::Dense(l) => vec![&mut l.weights, &mut l.bias],
            Layer::Lstm(l) => vec![&mut l.w_ih, &mut l.w_hh, &mut l.bias],
            _ => vec![],
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Layer::Conv2d(_) => "conv2d",
            Layer::Relu(_) => "relu",
            Layer::MaxPool(_) => "maxpool",
            Layer::Dense(_) => "dense",
            Layer::Softmax(_) => "softmax",
            Layer::Sigmoid(_) => "sigmoid",
            Layer::Dropout(_) => "dropout",
            Layer::Flatten(_) => "flatten",
            Layer::Lstm(_) => "lstm",
        }
    }

    /// Output shape this layer produces for `input`, used to validate a
    /// network's shape plan before any tensor is allocated.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match self {
            Layer::Conv2d(l) => l.output_shape(input),
            Layer::MaxPool(l) => l.output_shape(input),
            Layer::Dense(l) => l.output_shape(input),
            Layer::Flatten(_) => Ok(vec![input.iter().product()]),
            Layer::Lstm(l) => l.output_shape(input),
            _ => Ok(input.to_vec()),
        }
    }
}
