//! Batched layer primitives. Activations are `(batch, planes, length)`.

use ndarray::{Array1, Array3};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::seed::Rng;

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Padding {
    Same,
    Valid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

impl Padding {
    pub fn output_len(self, len: usize, kernel: usize) -> Option<usize> {
        match self {
            Padding::Same => Some(len),
            Padding::Valid => len.checked_sub(kernel).map(|v| v + 1),
        }
    }

    fn left(self, kernel: usize) -> usize {
        match self {
            Padding::Same => (kernel - 1) / 2,
            Padding::Valid => 0,
        }
    }
}

/// Range of output positions `t` for which `t + shift` is inside `[0, len)`.
fn overlap(out_len: usize, len: usize, shift: isize) -> (usize, usize) {
    let lo = (-shift).max(0) as usize;
    let hi = (len as isize - shift).clamp(0, out_len as isize) as usize;
    (lo.min(hi), hi)
}

/// Dot product with independent partial sums so the loop vectorizes.
fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let tail: T = ca.remainder().iter().zip(cb.remainder()).map(|(&x, &y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for i in 0..8 {
            acc[i] += x[i] * y[i];
        }
    }
    acc.iter().copied().sum::<T>() + tail
}

/// Cross-correlation plus bias. `weights` is `(out, in, k)`.
pub fn conv1d_forward<T: Real>(
    x: &Array3<T>,
    weights: &Array3<T>,
    bias: &Array1<T>,
    padding: Padding,
) -> Result<Array3<T>> {
    let (batch, planes, len) = x.dim();
    let (out_planes, in_planes, k) = weights.dim();
    if planes != in_planes || bias.len() != out_planes {
        return Err(Error::Shape(format!(
            "conv expects {in_planes} input planes and {out_planes} biases, got {planes} planes and {} biases",
            bias.len()
        )));
    }
    let out_len = padding
        .output_len(len, k)
        .ok_or_else(|| Error::Shape(format!("valid conv with kernel {k} on length {len}")))?;
    let left = padding.left(k) as isize;
    let x = x.as_standard_layout();
    let w = weights.as_standard_layout();
    let xs = x.as_slice().unwrap();
    let ws = w.as_slice().unwrap();
    let mut out = Array3::<T>::zeros((batch, out_planes, out_len));
    let os = out.as_slice_mut().unwrap();
    for b in 0..batch {
        for o in 0..out_planes {
            let orow = &mut os[(b * out_planes + o) * out_len..][..out_len];
            orow.fill(bias[o]);
            for i in 0..in_planes {
                let xrow = &xs[(b * planes + i) * len..][..len];
                for kk in 0..k {
                    let wv = ws[(o * in_planes + i) * k + kk];
                    let shift = kk as isize - left;
                    let (lo, hi) = overlap(out_len, len, shift);
                    let src = &xrow[(lo as isize + shift) as usize..(hi as isize + shift) as usize];
                    for (dst, &s) in orow[lo..hi].iter_mut().zip(src) {
                        *dst += wv * s;
                    }
                }
            }
        }
    }
    Ok(out)
}

pub struct ConvGrads<T> {
    pub input: Array3<T>,
    pub weights: Array3<T>,
    pub bias: Array1<T>,
}

pub fn conv1d_backward<T: Real>(
    x: &Array3<T>,
    weights: &Array3<T>,
    padding: Padding,
    grad_out: &Array3<T>,
) -> ConvGrads<T> {
    let (batch, planes, len) = x.dim();
    let (out_planes, in_planes, k) = weights.dim();
    let out_len = grad_out.dim().2;
    let left = padding.left(k) as isize;
    let x = x.as_standard_layout();
    let w = weights.as_standard_layout();
    let g = grad_out.as_standard_layout();
    let (xs, ws, gs) = (x.as_slice().unwrap(), w.as_slice().unwrap(), g.as_slice().unwrap());
    let mut gx = Array3::<T>::zeros((batch, planes, len));
    let mut gw = Array3::<T>::zeros((out_planes, in_planes, k));
    let mut gb = Array1::<T>::zeros(out_planes);
    {
        let gxs = gx.as_slice_mut().unwrap();
        let gws = gw.as_slice_mut().unwrap();
        for b in 0..batch {
            for o in 0..out_planes {
                let grow = &gs[(b * out_planes + o) * out_len..][..out_len];
                gb[o] += grow.iter().copied().sum::<T>();
                for i in 0..in_planes {
                    let xrow = &xs[(b * planes + i) * len..][..len];
                    let base = (b * planes + i) * len;
                    for kk in 0..k {
                        let widx = (o * in_planes + i) * k + kk;
                        let wv = ws[widx];
                        let shift = kk as isize - left;
                        let (lo, hi) = overlap(out_len, len, shift);
                        let s0 = (lo as isize + shift) as usize;
                        let s1 = (hi as isize + shift) as usize;
                        gws[widx] += dot(&grow[lo..hi], &xrow[s0..s1]);
                        for (dst, &gv) in gxs[base + s0..base + s1].iter_mut().zip(&grow[lo..hi]) {
                            *dst += wv * gv;
                        }
                    }
                }
            }
        }
    }
    ConvGrads {
        input: gx,
        weights: gw,
        bias: gb,
    }
}

pub fn relu<T: Real>(x: &Array3<T>) -> Array3<T> {
    x.mapv(|v| v.max(T::zero()))
}

/// Gradient through ReLU given its output.
pub fn relu_backward<T: Real>(output: &Array3<T>, grad: &Array3<T>) -> Array3<T> {
    let mut g = grad.clone();
    g.zip_mut_with(output, |gv, &y| {
        if y <= T::zero() {
            *gv = T::zero();
        }
    });
    g
}

/// Window 2, stride 2, ceil mode. Returns the pooled map and the source
/// index of each maximum (first on ties).
pub fn maxpool_forward<T: Real>(x: &Array3<T>) -> (Array3<T>, Vec<usize>) {
    let (batch, planes, len) = x.dim();
    let out_len = len.div_ceil(2);
    let x = x.as_standard_layout();
    let mut out = Array3::<T>::zeros((batch, planes, out_len));
    let mut argmax = Vec::with_capacity(batch * planes * out_len);
    if len > 0 {
        for (src, dst) in x.as_slice().unwrap().chunks(len).zip(out.as_slice_mut().unwrap().chunks_mut(out_len)) {
            for (j, d) in dst.iter_mut().enumerate() {
                let a = 2 * j;
                let best = if a + 1 < len && src[a + 1] > src[a] { a + 1 } else { a };
                *d = src[best];
                argmax.push(best);
            }
        }
    }
    (out, argmax)
}

pub fn maxpool_backward<T: Real>(grad: &Array3<T>, argmax: &[usize], input_len: usize) -> Array3<T> {
    let (batch, planes, out_len) = grad.dim();
    let grad = grad.as_standard_layout();
    let mut gx = Array3::<T>::zeros((batch, planes, input_len));
    if out_len > 0 {
        let rows = grad.as_slice().unwrap().chunks(out_len);
        let idx = argmax.chunks(out_len);
        for ((g, i), dst) in rows.zip(idx).zip(gx.as_slice_mut().unwrap().chunks_mut(input_len)) {
            for (&gv, &k) in g.iter().zip(i) {
                dst[k] += gv;
            }
        }
    }
    gx
}

/// Calls `f(plane, row)` for every `(batch, plane)` row of a standard-layout array.
fn for_rows<T: Real>(x: &Array3<T>, mut f: impl FnMut(usize, &[T])) {
    let (_, planes, len) = x.dim();
    if len == 0 {
        return;
    }
    for (r, row) in x.as_slice().expect("standard layout").chunks(len).enumerate() {
        f(r % planes, row);
    }
}

fn for_rows_mut<T: Real>(x: &mut Array3<T>, mut f: impl FnMut(usize, &mut [T])) {
    let (_, planes, len) = x.dim();
    if len == 0 {
        return;
    }
    for (r, row) in x.as_slice_mut().expect("standard layout").chunks_mut(len).enumerate() {
        f(r % planes, row);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct BatchNorm<T> {
    pub gamma: Array1<T>,
    pub beta: Array1<T>,
    pub running_mean: Array1<T>,
    pub running_var: Array1<T>,
}

impl<T: Real> BatchNorm<T> {
    pub fn new(planes: usize) -> Self {
        BatchNorm {
            gamma: Array1::ones(planes),
            beta: Array1::zeros(planes),
            running_mean: Array1::zeros(planes),
            running_var: Array1::ones(planes),
        }
    }
}

pub struct BatchNormCache<T> {
    pub xhat: Array3<T>,
    pub inv_std: Array1<T>,
    pub mode: Mode,
}

/// Per-plane normalization over batch and time. Train mode uses batch
/// statistics and updates the running estimates in place.
pub fn batchnorm_forward<T: Real>(
    x: &Array3<T>,
    bn: &mut BatchNorm<T>,
    mode: Mode,
) -> Result<(Array3<T>, BatchNormCache<T>)> {
    let (batch, planes, len) = x.dim();
    if bn.gamma.len() != planes {
        return Err(Error::Shape(format!("batch norm over {} planes, input has {planes}", bn.gamma.len())));
    }
    let (mean, var) = match mode {
        Mode::Train => {
            if batch < 2 {
                return Err(Error::Shape("batch norm in train mode needs a batch of at least 2".into()));
            }
            let n = T::cast((batch * len) as f64);
            let x = x.as_standard_layout().into_owned();
            let mut mean = Array1::<T>::zeros(planes);
            for_rows(&x, |p, row| mean[p] += row.iter().copied().sum::<T>());
            mean /= n;
            let mut var = Array1::<T>::zeros(planes);
            for_rows(&x, |p, row| {
                let m = mean[p];
                var[p] += row.iter().map(|&v| (v - m) * (v - m)).sum::<T>();
            });
            var /= n;
            let m = T::cast(BN_MOMENTUM);
            let unbiased = n / (n - T::one());
            for p in 0..planes {
                bn.running_mean[p] = (T::one() - m) * bn.running_mean[p] + m * mean[p];
                bn.running_var[p] = (T::one() - m) * bn.running_var[p] + m * var[p] * unbiased;
            }
            (mean, var)
        }
        Mode::Eval => return Ok(batchnorm_eval(x, bn)),
    };
    Ok(normalize(x, bn, &mean, &var, mode))
}

/// Eval-mode normalization with the running statistics; never mutates.
pub fn batchnorm_eval<T: Real>(x: &Array3<T>, bn: &BatchNorm<T>) -> (Array3<T>, BatchNormCache<T>) {
    normalize(x, bn, &bn.running_mean, &bn.running_var, Mode::Eval)
}

fn normalize<T: Real>(
    x: &Array3<T>,
    bn: &BatchNorm<T>,
    mean: &Array1<T>,
    var: &Array1<T>,
    mode: Mode,
) -> (Array3<T>, BatchNormCache<T>) {
    let eps = T::cast(BN_EPS);
    let inv_std = var.mapv(|v| T::one() / (v + eps).sqrt());
    let mut xhat = x.as_standard_layout().into_owned();
    for_rows_mut(&mut xhat, |p, row| {
        let (m, s) = (mean[p], inv_std[p]);
        row.iter_mut().for_each(|v| *v = (*v - m) * s);
    });
    let mut out = xhat.clone();
    for_rows_mut(&mut out, |p, row| {
        let (g, b) = (bn.gamma[p], bn.beta[p]);
        row.iter_mut().for_each(|v| *v = *v * g + b);
    });
    (out, BatchNormCache { xhat, inv_std, mode })
}

pub struct BatchNormGrads<T> {
    pub input: Array3<T>,
    pub gamma: Array1<T>,
    pub beta: Array1<T>,
}

pub fn batchnorm_backward<T: Real>(cache: &BatchNormCache<T>, gamma: &Array1<T>, grad: &Array3<T>) -> BatchNormGrads<T> {
    let (batch, planes, len) = grad.dim();
    let mut g_gamma = Array1::<T>::zeros(planes);
    let mut g_beta = Array1::<T>::zeros(planes);
    let grad = grad.as_standard_layout().into_owned();
    let xhat_rows: Vec<&[T]> = cache.xhat.as_slice().expect("standard layout").chunks(len.max(1)).collect();
    let mut r = 0;
    for_rows(&grad, |p, g| {
        let xh = xhat_rows[r];
        g_gamma[p] += g.iter().zip(xh).map(|(&a, &b)| a * b).sum::<T>();
        g_beta[p] += g.iter().copied().sum::<T>();
        r += 1;
    });
    let mut gx = grad.clone();
    let n = T::cast((batch * len) as f64);
    let mut r = 0;
    for_rows_mut(&mut gx, |p, row| {
        let s = gamma[p] * cache.inv_std[p];
        match cache.mode {
            Mode::Eval => row.iter_mut().for_each(|v| *v = *v * s),
            Mode::Train => {
                let xh = xhat_rows[r];
                let mean_g = g_beta[p] / n;
                let mean_gx = g_gamma[p] / n;
                for (v, &x) in row.iter_mut().zip(xh) {
                    *v = s * (*v - mean_g - x * mean_gx);
                }
            }
        }
        r += 1;
    });
    BatchNormGrads {
        input: gx,
        gamma: g_gamma,
        beta: g_beta,
    }
}

/// Inverted dropout. Returns the output and the per-element multiplier
/// (`0` or `1/(1-p)`), or `None` when the layer is the identity.
pub fn dropout_forward<T: Real>(x: &Array3<T>, p: f64, mode: Mode, rng: &mut Rng) -> (Array3<T>, Option<Array3<T>>) {
    if mode == Mode::Eval || p == 0.0 {
        return (x.clone(), None);
    }
    let keep = T::cast(1.0 / (1.0 - p));
    let mask = x.mapv(|_| if rng.random::<f64>() < p { T::zero() } else { keep });
    (x * &mask, Some(mask))
}
