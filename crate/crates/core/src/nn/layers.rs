//! Layer stack with per-layer forward/backward state.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ops::{self, Conv2dCtx, MaxPoolCtx};
use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Serializable description of one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum LayerSpec {
    Conv2D {
        in_channels: usize,
        filters: usize,
        kernel: usize,
    },
    MaxPool2D {
        pool: usize,
        stride: usize,
    },
    Dropout {
        rate: f64,
    },
    Relu,
    GlobalAvgPool2D,
    Dense {
        inputs: usize,
        units: usize,
    },
    Softmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    HeUniform,
    GlorotUniform,
}

fn uniform_tensor<T: Scalar, R: Rng + ?Sized>(shape: Vec<usize>, limit: f64, rng: &mut R) -> Tensor<T> {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| T::from_f64_lossy((rng.gen::<f64>() * 2.0 - 1.0) * limit))
        .collect();
    Tensor::new(shape, data).expect("length matches shape").into_param()
}

fn init_limit(init: Init, fan_in: usize, fan_out: usize) -> f64 {
    match init {
        Init::HeUniform => (6.0 / fan_in as f64).sqrt(),
        Init::GlorotUniform => (6.0 / (fan_in + fan_out) as f64).sqrt(),
    }
}

/// A layer together with whatever its backward pass needs from the last
/// forward pass.
#[derive(Debug, Clone)]
pub enum Layer<T> {
    Conv2d {
        weight: Tensor<T>,
        bias: Tensor<T>,
        ctx: Option<Conv2dCtx<T>>,
    },
    MaxPool2d {
        ctx: Option<MaxPoolCtx>,
    },
    Dropout {
        rate: f64,
        mask: Option<Option<Vec<T>>>,
    },
    Relu {
        input: Option<Tensor<T>>,
    },
    GlobalAvgPool {
        input_shape: Option<Vec<usize>>,
    },
    Dense {
        weight: Tensor<T>,
        bias: Tensor<T>,
        input: Option<Tensor<T>>,
    },
    Softmax {
        output: Option<Tensor<T>>,
    },
}

impl<T: Scalar> Layer<T> {
    /// Square-kernel convolution with He-uniform weights and zero bias.
    pub fn conv2d<R: Rng + ?Sized>(in_channels: usize, filters: usize, kernel: usize, rng: &mut R) -> Self {
        let limit = init_limit(
            Init::HeUniform,
            in_channels * kernel * kernel,
            filters * kernel * kernel,
        );
        Layer::Conv2d {
            weight: uniform_tensor(vec![filters, in_channels, kernel, kernel], limit, rng),
            bias: Tensor::zeros(vec![filters]).into_param(),
            ctx: None,
        }
    }

    pub fn dense<R: Rng + ?Sized>(inputs: usize, units: usize, init: Init, rng: &mut R) -> Self {
        let limit = init_limit(init, inputs, units);
        Layer::Dense {
            weight: uniform_tensor(vec![inputs, units], limit, rng),
            bias: Tensor::zeros(vec![units]).into_param(),
            input: None,
        }
    }

    /// Parameter-free layer from its spec.
    pub fn stateless(spec: &LayerSpec) -> Result<Self> {
        Ok(match *spec {
            LayerSpec::MaxPool2D { pool: 2, stride: 2 } => Layer::MaxPool2d { ctx: None },
            LayerSpec::MaxPool2D { pool, stride } => {
                return Err(Error::Config(format!(
                    "only 2x2/2 max pooling is supported, got {pool}/{stride}"
                )))
            }
            LayerSpec::Dropout { rate } => {
                if !(0.0..1.0).contains(&rate) {
                    return Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")));
                }
                Layer::Dropout { rate, mask: None }
            }
            LayerSpec::Relu => Layer::Relu { input: None },
            LayerSpec::GlobalAvgPool2D => Layer::GlobalAvgPool { input_shape: None },
            LayerSpec::Softmax => Layer::Softmax { output: None },
            LayerSpec::Conv2D { .. } | LayerSpec::Dense { .. } => {
                return Err(Error::Config("parameterized layer needs explicit weights".into()))
            }
        })
    }

    pub fn spec(&self) -> LayerSpec {
        match self {
            Layer::Conv2d { weight, .. } => {
                let s = weight.shape();
                LayerSpec::Conv2D {
                    in_channels: s[1],
                    filters: s[0],
                    kernel: s[2],
                }
            }
            Layer::MaxPool2d { .. } => LayerSpec::MaxPool2D { pool: 2, stride: 2 },
            Layer::Dropout { rate, .. } => LayerSpec::Dropout { rate: *rate },
            Layer::Relu { .. } => LayerSpec::Relu,
            Layer::GlobalAvgPool { .. } => LayerSpec::GlobalAvgPool2D,
            Layer::Dense { weight, .. } => {
                let s = weight.shape();
                LayerSpec::Dense {
                    inputs: s[0],
                    units: s[1],
                }
            }
            Layer::Softmax { .. } => LayerSpec::Softmax,
        }
    }

    pub fn forward<R: Rng + ?Sized>(&mut self, x: &Tensor<T>, training: bool, rng: &mut R) -> Result<Tensor<T>> {
        match self {
            Layer::Conv2d { weight, bias, ctx } => {
                let (y, c) = ops::conv2d_forward(x, weight, bias)?;
                *ctx = Some(c);
                Ok(y)
            }
            Layer::MaxPool2d { ctx } => {
                let (y, c) = ops::maxpool2d_forward(x)?;
                *ctx = Some(c);
                Ok(y)
            }
            Layer::Dropout { rate, mask } => {
                let (y, m) = ops::dropout_forward(x, *rate, training, rng)?;
                *mask = Some(m);
                Ok(y)
            }
            Layer::Relu { input } => {
                let y = ops::relu_forward(x);
                *input = Some(x.clone());
                Ok(y)
            }
            Layer::GlobalAvgPool { input_shape } => {
                let y = ops::global_avg_pool_forward(x)?;
                *input_shape = Some(x.shape().to_vec());
                Ok(y)
            }
            Layer::Dense { weight, bias, input } => {
                let y = ops::dense_forward(x, weight, bias)?;
                *input = Some(x.clone());
                Ok(y)
            }
            Layer::Softmax { output } => {
                let y = ops::softmax(x)?;
                *output = Some(y.clone());
                Ok(y)
            }
        }
    }

    /// Propagates `upstream` to the layer input, accumulating parameter
    /// gradients into the weight and bias gradient slots.
    pub fn backward(&mut self, upstream: &Tensor<T>) -> Result<Tensor<T>> {
        match self {
            Layer::Conv2d { weight, bias, ctx } => {
                let (gx, gw, gb) = ops::conv2d_backward(ctx.as_ref(), weight, upstream)?;
                weight.accumulate_grad(gw.data())?;
                bias.accumulate_grad(gb.data())?;
                Ok(gx)
            }
            Layer::MaxPool2d { ctx } => ops::maxpool2d_backward(ctx.as_ref(), upstream),
            Layer::Dropout { mask, .. } => match mask {
                None => Err(Error::State(
                    "dropout backward called without a retained forward context".into(),
                )),
                Some(m) => ops::dropout_backward(m.as_deref(), upstream),
            },
            Layer::Relu { input } => ops::relu_backward(input.as_ref(), upstream),
            Layer::GlobalAvgPool { input_shape } => ops::global_avg_pool_backward(input_shape.as_deref(), upstream),
            Layer::Dense { weight, bias, input } => {
                let (gx, gw, gb) = ops::dense_backward(input.as_ref(), weight, upstream)?;
                weight.accumulate_grad(gw.data())?;
                bias.accumulate_grad(gb.data())?;
                Ok(gx)
            }
            Layer::Softmax { output } => {
                let p = output
                    .as_ref()
                    .ok_or_else(|| Error::State("softmax backward called without a retained forward context".into()))?;
                let [_, k] = p.dims2("softmax output")?;
                let mut g = Vec::with_capacity(p.len());
                for (prow, grow) in p.data().chunks_exact(k).zip(upstream.data().chunks_exact(k)) {
                    let dot: T = prow.iter().zip(grow).map(|(&a, &b)| a * b).sum();
                    g.extend(prow.iter().zip(grow).map(|(&pi, &gi)| pi * (gi - dot)));
                }
                Tensor::new(p.shape().to_vec(), g)
            }
        }
    }

    /// Drops retained forward state.
    pub fn clear_context(&mut self) {
        match self {
            Layer::Conv2d { ctx, .. } => *ctx = None,
            Layer::MaxPool2d { ctx } => *ctx = None,
            Layer::Dropout { mask, .. } => *mask = None,
            Layer::Relu { input } => *input = None,
            Layer::GlobalAvgPool { input_shape } => *input_shape = None,
            Layer::Dense { input, .. } => *input = None,
            Layer::Softmax { output } => *output = None,
        }
    }

    pub fn params(&self) -> Vec<&Tensor<T>> {
        match self {
            Layer::Conv2d { weight, bias, .. } | Layer::Dense { weight, bias, .. } => vec![weight, bias],
            _ => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        match self {
            Layer::Conv2d { weight, bias, .. } | Layer::Dense { weight, bias, .. } => vec![weight, bias],
            _ => Vec::new(),
        }
    }

    fn cast<U: Scalar>(&self) -> Layer<U> {
        match self {
            Layer::Conv2d { weight, bias, .. } => Layer::Conv2d {
                weight: weight.cast(),
                bias: bias.cast(),
                ctx: None,
            },
            Layer::Dense { weight, bias, .. } => Layer::Dense {
                weight: weight.cast(),
                bias: bias.cast(),
                input: None,
            },
            Layer::MaxPool2d { .. } => Layer::MaxPool2d { ctx: None },
            Layer::Dropout { rate, .. } => Layer::Dropout {
                rate: *rate,
                mask: None,
            },
            Layer::Relu { .. } => Layer::Relu { input: None },
            Layer::GlobalAvgPool { .. } => Layer::GlobalAvgPool { input_shape: None },
            Layer::Softmax { .. } => Layer::Softmax { output: None },
        }
    }
}

/// Sequential network ending in a softmax.
#[derive(Debug, Clone)]
pub struct Sequential<T> {
    layers: Vec<Layer<T>>,
}

impl<T: Scalar> Sequential<T> {
    pub fn new(layers: Vec<Layer<T>>) -> Result<Self> {
        if !matches!(layers.last(), Some(Layer::Softmax { .. })) {
            return Err(Error::Config("network must end with a softmax layer".into()));
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(Layer::spec).collect()
    }

    /// Class probabilities `[N, K]`.
    pub fn forward<R: Rng + ?Sized>(&mut self, x: &Tensor<T>, training: bool, rng: &mut R) -> Result<Tensor<T>> {
        let mut h = x.clone();
        for layer in &mut self.layers {
            h = layer.forward(&h, training, rng)?;
        }
        if !h.all_finite() {
            return Err(Error::Numerics("non-finite network output".into()));
        }
        Ok(h)
    }

    /// Backpropagates mean categorical cross-entropy from the probabilities
    /// of the last forward pass. The softmax Jacobian is folded into the
    /// loss gradient, so the softmax layer itself is skipped.
    pub fn backward_cross_entropy(&mut self, probs: &Tensor<T>, labels: &[usize]) -> Result<Tensor<T>> {
        let mut g = ops::softmax_cross_entropy_backward(probs, labels)?;
        let n = self.layers.len();
        for layer in self.layers[..n - 1].iter_mut().rev() {
            g = layer.backward(&g)?;
        }
        Ok(g)
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    pub fn clear_context(&mut self) {
        self.layers.iter_mut().for_each(Layer::clear_context);
    }

    pub fn params(&self) -> Vec<&Tensor<T>> {
        self.layers.iter().flat_map(Layer::params).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.layers.iter_mut().flat_map(Layer::params_mut).collect()
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// Same architecture and weights in another precision.
    pub fn cast<U: Scalar>(&self) -> Sequential<U> {
        Sequential {
            layers: self.layers.iter().map(Layer::cast).collect(),
        }
    }
}
