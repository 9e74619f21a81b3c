//! Convolutional feature extractor: blocks of conv, batch norm, ReLU,
//! dropout and max-pooling, flattened to an `M`-vector.

mod layers;
mod structure;
mod train;

use ndarray::{s, Array1, Array2, Array3, Axis};
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::data::EpochSet;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::seed::{self, Rng};

pub use layers::{
    batchnorm_backward, batchnorm_eval, batchnorm_forward, conv1d_backward, conv1d_forward, dropout_forward,
    maxpool_backward, maxpool_forward, relu, relu_backward, BatchNorm, BatchNormCache, ConvGrads, Mode, Padding,
    BN_EPS, BN_MOMENTUM,
};
pub use structure::{
    count_conv2d_weights, count_dense_weights, count_weights, parse_structure, render_structure, Conv2dLayer,
    ConvBlockSpec, DenseLayer, NetworkSpec, DEFAULT_DROPOUT,
};
pub use train::{train, StopReason, TrainConfig, TrainReport};

const EVAL_CHUNK: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct BlockParams<T> {
    /// `(out_planes, in_planes, kernel)`
    pub weights: Array3<T>,
    pub bias: Array1<T>,
    pub batch_norm: Option<BatchNorm<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct NetworkParams<T> {
    pub blocks: Vec<BlockParams<T>>,
}

/// Gradients of the trainable parameters, block by block.
#[derive(Debug, Clone)]
pub struct BlockGrads<T> {
    pub weights: Array3<T>,
    pub bias: Array1<T>,
    pub gamma: Option<Array1<T>>,
    pub beta: Option<Array1<T>>,
}

impl<T: Real> NetworkParams<T> {
    /// Uniform Glorot init of kernels; zero biases; identity batch norm.
    pub fn init(spec: &NetworkSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = seed::rng(seed);
        let blocks = spec
            .blocks
            .iter()
            .map(|b| {
                let k = b.kernel_size;
                let limit = (6.0 / (b.in_planes * k + b.out_planes * k) as f64).sqrt();
                let dist = Uniform::new_inclusive(-limit, limit).expect("finite limit");
                BlockParams {
                    weights: Array3::from_shape_simple_fn((b.out_planes, b.in_planes, k), || {
                        T::cast(dist.sample(&mut rng))
                    }),
                    bias: Array1::zeros(b.out_planes),
                    batch_norm: b.batch_norm.then(|| BatchNorm::new(b.out_planes)),
                }
            })
            .collect();
        Ok(NetworkParams { blocks })
    }

    pub fn check(&self, spec: &NetworkSpec) -> Result<()> {
        if self.blocks.len() != spec.blocks.len() {
            return Err(Error::Shape(format!(
                "{} parameter blocks for {} spec blocks",
                self.blocks.len(),
                spec.blocks.len()
            )));
        }
        for (i, (p, b)) in self.blocks.iter().zip(&spec.blocks).enumerate() {
            let bn_ok = match &p.batch_norm {
                Some(bn) => b.batch_norm && bn.gamma.len() == b.out_planes,
                None => !b.batch_norm,
            };
            if p.weights.dim() != (b.out_planes, b.in_planes, b.kernel_size) || p.bias.len() != b.out_planes || !bn_ok {
                return Err(Error::Block {
                    block: i,
                    message: "parameter shapes do not match the spec".into(),
                });
            }
            let finite = p.weights.iter().chain(&p.bias).all(|v| v.is_finite());
            if !finite {
                return Err(Error::Block {
                    block: i,
                    message: "non-finite parameters".into(),
                });
            }
        }
        Ok(())
    }

    /// Trainable tensors in a fixed order, for the optimizer.
    pub(crate) fn trainable_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = Vec::new();
        for b in &mut self.blocks {
            out.push(b.weights.as_slice_mut().expect("standard layout"));
            out.push(b.bias.as_slice_mut().expect("standard layout"));
            if let Some(bn) = &mut b.batch_norm {
                out.push(bn.gamma.as_slice_mut().expect("standard layout"));
                out.push(bn.beta.as_slice_mut().expect("standard layout"));
            }
        }
        out
    }
}

impl<T: Real> BlockGrads<T> {
    pub(crate) fn flat(grads: &[BlockGrads<T>]) -> Vec<&[T]> {
        let mut out = Vec::new();
        for g in grads {
            out.push(g.weights.as_slice().expect("standard layout"));
            out.push(g.bias.as_slice().expect("standard layout"));
            if let (Some(gamma), Some(beta)) = (&g.gamma, &g.beta) {
                out.push(gamma.as_slice().expect("standard layout"));
                out.push(beta.as_slice().expect("standard layout"));
            }
        }
        out
    }
}

struct BlockCache<T> {
    input: Array3<T>,
    bn: Option<BatchNormCache<T>>,
    activated: Array3<T>,
    dropout: Option<Array3<T>>,
    pool: Option<(Vec<usize>, usize)>,
}

/// A spec with its parameters and the seed they were initialized from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct Network<T> {
    pub spec: NetworkSpec,
    pub params: NetworkParams<T>,
    pub init_seed: u64,
}

/// `(1/M) * sum (ofe - target)^2`.
pub fn mse_loss<T: Real>(ofe: &[T], target: &[T]) -> Result<f64> {
    if ofe.len() != target.len() || ofe.is_empty() {
        return Err(Error::Shape(format!("loss over {} outputs and {} targets", ofe.len(), target.len())));
    }
    let sum: f64 = ofe.iter().zip(target).map(|(a, b)| (a.as_f64() - b.as_f64()).powi(2)).sum();
    Ok(sum / ofe.len() as f64)
}

impl<T: Real> Network<T> {
    pub fn new(spec: NetworkSpec, init_seed: u64) -> Result<Self> {
        let params = NetworkParams::init(&spec, init_seed)?;
        Ok(Network { spec, params, init_seed })
    }

    pub fn from_parts(spec: NetworkSpec, params: NetworkParams<T>, init_seed: u64) -> Result<Self> {
        spec.validate()?;
        params.check(&spec)?;
        Ok(Network { spec, params, init_seed })
    }

    pub fn output_dim(&self) -> usize {
        self.spec.output_dim
    }

    fn check_input(&self, x: &Array3<T>) -> Result<()> {
        let (_, planes, len) = x.dim();
        if planes != self.spec.input_planes() || len != self.spec.input_len {
            return Err(Error::Block {
                block: 0,
                message: format!(
                    "input is {planes}x{len}, network expects {}x{}",
                    self.spec.input_planes(),
                    self.spec.input_len
                ),
            });
        }
        Ok(())
    }

    fn run(
        &mut self,
        x: &Array3<T>,
        mode: Mode,
        mut rng: Option<&mut Rng>,
        keep_cache: bool,
    ) -> Result<(Array2<T>, Vec<BlockCache<T>>)> {
        self.check_input(x)?;
        let mut caches = Vec::new();
        let mut h = x.clone();
        for (i, (spec, p)) in self.spec.blocks.iter().zip(self.params.blocks.iter_mut()).enumerate() {
            let at = |e: Error| Error::Block {
                block: i,
                message: e.to_string(),
            };
            let mut z = conv1d_forward(&h, &p.weights, &p.bias, spec.padding).map_err(at)?;
            let mut bn_cache = None;
            if let Some(bn) = &mut p.batch_norm {
                let (y, c) = match mode {
                    Mode::Train => batchnorm_forward(&z, bn, Mode::Train).map_err(at)?,
                    Mode::Eval => batchnorm_eval(&z, bn),
                };
                z = y;
                bn_cache = Some(c);
            }
            let activated = relu(&z);
            drop(z);
            let (dropped, mask) = match (&mut rng, spec.dropout_p > 0.0) {
                (Some(r), true) => dropout_forward(&activated, spec.dropout_p, mode, r),
                _ => (activated.clone(), None),
            };
            let (out, pool) = if spec.pool_after {
                let len = dropped.dim().2;
                let (y, idx) = maxpool_forward(&dropped);
                (y, Some((idx, len)))
            } else {
                (dropped, None)
            };
            let input = std::mem::replace(&mut h, out);
            if keep_cache {
                caches.push(BlockCache {
                    input,
                    bn: bn_cache,
                    activated,
                    dropout: mask,
                    pool,
                });
            }
        }
        let batch = h.dim().0;
        let flat = h
            .into_shape_with_order((batch, self.spec.output_dim))
            .map_err(|e| Error::Shape(e.to_string()))?;
        Ok((flat, caches))
    }

    /// Eval-mode OFE rows for a batch `(batch, planes, length)`.
    pub fn forward_batch(&self, x: &Array3<T>) -> Result<Array2<T>> {
        // Eval mode never touches running statistics; cloning keeps `&self`.
        let mut scratch = Network {
            spec: self.spec.clone(),
            params: self.params.clone(),
            init_seed: self.init_seed,
        };
        Ok(scratch.run(x, Mode::Eval, None, false)?.0)
    }

    /// Eval-mode OFE of one epoch matrix.
    pub fn forward(&self, epoch: &Array2<T>) -> Result<Array1<T>> {
        let x = epoch.clone().insert_axis(Axis(0));
        Ok(self.forward_batch(&x)?.row(0).to_owned())
    }

    /// OFE rows for every epoch of a set, in order.
    pub fn features(&self, set: &EpochSet<T>) -> Result<Array2<T>> {
        let mut out = Array2::<T>::zeros((set.len(), self.spec.output_dim));
        let mut scratch = self.clone();
        for (c, chunk) in set.epochs().chunks(EVAL_CHUNK).enumerate() {
            let x = stack(chunk.iter().map(|e| &e.data))?;
            let (f, _) = scratch.run(&x, Mode::Eval, None, false)?;
            out.slice_mut(s![c * EVAL_CHUNK..c * EVAL_CHUNK + chunk.len(), ..]).assign(&f);
        }
        Ok(out)
    }

    /// Mean batch MSE and its gradients. `Mode::Train` uses batch statistics
    /// (updating running estimates) and dropout drawn from `rng`.
    pub fn loss_and_gradients(
        &mut self,
        x: &Array3<T>,
        targets: &Array2<T>,
        mode: Mode,
        rng: Option<&mut Rng>,
    ) -> Result<(f64, Vec<BlockGrads<T>>)> {
        let batch = x.dim().0;
        if targets.dim() != (batch, self.spec.output_dim) {
            return Err(Error::Shape(format!(
                "targets are {:?}, expected ({batch}, {})",
                targets.dim(),
                self.spec.output_dim
            )));
        }
        let (ofe, caches) = self.run(x, mode, rng, true)?;
        let resid = &ofe - targets;
        let m = self.spec.output_dim as f64;
        let loss = resid.iter().map(|v| v.as_f64().powi(2)).sum::<f64>() / (batch as f64 * m);
        let scale = T::cast(2.0 / (batch as f64 * m));
        let last = self.spec.blocks.last().expect("validated").out_planes;
        let out_len = self.spec.output_dim / last;
        let mut grad = (resid * scale)
            .into_shape_with_order((batch, last, out_len))
            .map_err(|e| Error::Shape(e.to_string()))?;
        let mut grads = Vec::with_capacity(caches.len());
        for ((spec, p), cache) in self.spec.blocks.iter().zip(&self.params.blocks).zip(caches).rev() {
            if let Some((idx, len)) = &cache.pool {
                grad = maxpool_backward(&grad, idx, *len);
            }
            if let Some(mask) = &cache.dropout {
                grad *= mask;
            }
            grad = relu_backward(&cache.activated, &grad);
            let (gamma, beta) = match (&p.batch_norm, &cache.bn) {
                (Some(bn), Some(c)) => {
                    let g = batchnorm_backward(c, &bn.gamma, &grad);
                    grad = g.input;
                    (Some(g.gamma), Some(g.beta))
                }
                _ => (None, None),
            };
            let cg = conv1d_backward(&cache.input, &p.weights, spec.padding, &grad);
            grad = cg.input;
            grads.push(BlockGrads {
                weights: cg.weights,
                bias: cg.bias,
                gamma,
                beta,
            });
        }
        grads.reverse();
        Ok((loss, grads))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let net: Network<T> = serde_json::from_str(text)?;
        net.spec.validate()?;
        net.params.check(&net.spec)?;
        Ok(net)
    }
}

pub(crate) fn stack<'a, T: Real>(mats: impl Iterator<Item = &'a Array2<T>>) -> Result<Array3<T>> {
    let views: Vec<_> = mats.map(|m| m.view()).collect();
    ndarray::stack(Axis(0), &views).map_err(|e| Error::Shape(e.to_string()))
}
