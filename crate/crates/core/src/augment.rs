//! Training-set augmentation: per-epoch zero-meaning, random amplification,
//! polarity inversion, circular time rotation and Gaussian noise injection.
//!
//! Each random quantity except the noise is drawn once per epoch and applied
//! to every channel alike.

use ndarray::{Array2, Axis};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Epoch, EpochSet, Origin};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::seed::{self, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub amp_low: f64,
    pub amp_high: f64,
    /// Probability of drawing sign -1.
    pub flip_probability: f64,
    /// Shifts are drawn from `-h..=h`; `None` means `h = N / 2`.
    pub rotation_half_range: Option<usize>,
    pub noise_sd: f64,
    pub copies_per_epoch: usize,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            amp_low: 0.2,
            amp_high: 5.0,
            flip_probability: 0.5,
            rotation_half_range: None,
            noise_sd: 0.01,
            copies_per_epoch: 9,
            seed: 0,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self, samples: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.amp_low > 0.0 && self.amp_low <= self.amp_high && self.amp_high.is_finite()) {
            return bad(format!("need 0 < amp_low <= amp_high, got {} and {}", self.amp_low, self.amp_high));
        }
        if !(0.0..=1.0).contains(&self.flip_probability) {
            return bad(format!("flip_probability {} outside [0, 1]", self.flip_probability));
        }
        if self.rotation_half_range.is_some_and(|h| h > samples) {
            return bad(format!("rotation_half_range exceeds epoch length {samples}"));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return bad(format!("noise_sd {} must be >= 0", self.noise_sd));
        }
        Ok(())
    }

    fn half_range(&self, samples: usize) -> usize {
        self.rotation_half_range.unwrap_or(samples / 2)
    }
}

/// Every intermediate of one augmentation pass.
#[derive(Debug, Clone)]
pub struct AugmentTrace<T> {
    pub zero_meaned: Epoch<T>,
    pub scale: f64,
    pub sign: i8,
    pub shift: i64,
    /// Output of the rotation step, before noise.
    pub pre_noise: Epoch<T>,
    pub output: Epoch<T>,
}

pub fn zero_mean<T: Real>(epoch: &Epoch<T>) -> Epoch<T> {
    let mut data = epoch.data.clone();
    for mut row in data.axis_iter_mut(Axis(0)) {
        let mean = row.iter().map(|v| v.as_f64()).sum::<f64>() / row.len() as f64;
        let m = T::cast(mean);
        row.mapv_inplace(|v| v - m);
    }
    epoch.with_data(data)
}

pub fn scale<T: Real>(epoch: &Epoch<T>, factor: f64) -> Epoch<T> {
    let f = T::cast(factor);
    epoch.with_data(epoch.data.mapv(|v| v * f))
}

pub fn random_scale<T: Real>(epoch: &Epoch<T>, cfg: &AugmentConfig, rng: &mut Rng) -> (Epoch<T>, f64) {
    let ra = rng.random_range(cfg.amp_low..=cfg.amp_high);
    (scale(epoch, ra), ra)
}

pub fn invert<T: Real>(epoch: &Epoch<T>, sign: i8) -> Epoch<T> {
    if sign < 0 {
        epoch.with_data(epoch.data.mapv(|v| -v))
    } else {
        epoch.clone()
    }
}

pub fn polarity_invert<T: Real>(epoch: &Epoch<T>, cfg: &AugmentConfig, rng: &mut Rng) -> (Epoch<T>, i8) {
    let sign = if rng.random_bool(cfg.flip_probability) { -1 } else { 1 };
    (invert(epoch, sign), sign)
}

/// Circular shift of every channel: sample `j` moves to `(j + shift) mod N`.
pub fn rotate<T: Real>(epoch: &Epoch<T>, shift: i64) -> Epoch<T> {
    let n = epoch.samples();
    let s = shift.rem_euclid(n as i64) as usize;
    let mut out = Array2::<T>::zeros(epoch.data.raw_dim());
    for (src, mut dst) in epoch.data.rows().into_iter().zip(out.rows_mut()) {
        for (j, &v) in src.iter().enumerate() {
            dst[(j + s) % n] = v;
        }
    }
    epoch.with_data(out)
}

pub fn time_rotate<T: Real>(epoch: &Epoch<T>, cfg: &AugmentConfig, rng: &mut Rng) -> (Epoch<T>, i64) {
    let h = cfg.half_range(epoch.samples()) as i64;
    let rr = rng.random_range(-h..=h);
    (rotate(epoch, rr), rr)
}

/// Adds i.i.d. `N(0, noise_sd)` to every sample. A full matrix of standard
/// normals is always drawn, so the stream position does not depend on `noise_sd`.
pub fn noise_inject<T: Real>(epoch: &Epoch<T>, cfg: &AugmentConfig, rng: &mut Rng) -> Epoch<T> {
    let mut data = epoch.data.clone();
    for v in data.iter_mut() {
        let z: f64 = StandardNormal.sample(rng);
        *v += T::cast(cfg.noise_sd * z);
    }
    epoch.with_data(data)
}

pub fn augment_epoch_traced<T: Real>(epoch: &Epoch<T>, cfg: &AugmentConfig, rng: &mut Rng) -> AugmentTrace<T> {
    let x1 = zero_mean(epoch);
    let (x2, ra) = random_scale(&x1, cfg, rng);
    let (x3, rp) = polarity_invert(&x2, cfg, rng);
    let (x4, rr) = time_rotate(&x3, cfg, rng);
    let x5 = noise_inject(&x4, cfg, rng);
    AugmentTrace {
        zero_meaned: x1,
        scale: ra,
        sign: rp,
        shift: rr,
        pre_noise: x4,
        output: x5,
    }
}

pub fn augment_epoch<T: Real>(epoch: &Epoch<T>, cfg: &AugmentConfig, rng: &mut Rng) -> Epoch<T> {
    augment_epoch_traced(epoch, cfg, rng).output
}

/// RNG for copy `copy` of epoch `index`; `augment_set` uses exactly these streams.
pub fn substream(seed: u64, index: usize, copy: usize) -> Rng {
    seed::rng(seed::derive(seed::derive(seed, index as u64), copy as u64))
}

/// The input epochs unchanged, followed by `copies_per_epoch` augmented
/// variants of each (grouped by source epoch). Augmented epochs carry their
/// draws in [`Origin::Augmented`].
pub fn augment_set<T: Real>(train: &EpochSet<T>, cfg: &AugmentConfig) -> Result<EpochSet<T>> {
    cfg.validate(train.samples())?;
    let mut epochs = Vec::with_capacity(train.len() * (1 + cfg.copies_per_epoch));
    epochs.extend(train.iter().cloned());
    for (i, ep) in train.iter().enumerate() {
        for j in 0..cfg.copies_per_epoch {
            let mut rng = substream(cfg.seed, i, j);
            let trace = augment_epoch_traced(ep, cfg, &mut rng);
            let mut out = trace.output;
            out.origin = Origin::Augmented {
                source: i,
                scale: trace.scale,
                sign: trace.sign,
                shift: trace.shift,
            };
            epochs.push(out);
        }
    }
    EpochSet::partial(epochs, train.num_classes())
}
