//! Synthetic motor-imagery-like epochs: white Gaussian background plus
//! class-dependent sinusoids at the mu and beta band centers, each with a
//! fresh uniform phase per epoch and channel.

use std::f64::consts::PI;

use ndarray::Array2;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Epoch, EpochSet};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub num_classes: usize,
    pub epochs_per_class: usize,
    pub channels: usize,
    pub samples: usize,
    pub sampling_rate: f64,
    pub mu_band: (f64, f64),
    pub beta_band: (f64, f64),
    /// `[class][channel]` amplitude of the mu-band component.
    pub mu_gains: Vec<Vec<f64>>,
    /// `[class][channel]` amplitude of the beta-band component.
    pub beta_gains: Vec<Vec<f64>>,
    pub noise_sd: f64,
    pub seed: u64,
    pub subject_id: String,
}

impl SyntheticSpec {
    /// Class `k` carries `gain` in both bands on channel `(k - 1) % channels`,
    /// all other gains are zero; unit background noise.
    pub fn lateralized(
        num_classes: usize,
        epochs_per_class: usize,
        channels: usize,
        samples: usize,
        sampling_rate: f64,
        gain: f64,
        seed: u64,
    ) -> Self {
        let gains: Vec<Vec<f64>> = (0..num_classes)
            .map(|k| (0..channels).map(|c| if c == k % channels { gain } else { 0.0 }).collect())
            .collect();
        SyntheticSpec {
            num_classes,
            epochs_per_class,
            channels,
            samples,
            sampling_rate,
            mu_band: (8.0, 12.0),
            beta_band: (18.0, 26.0),
            mu_gains: gains.clone(),
            beta_gains: gains,
            noise_sd: 1.0,
            seed,
            subject_id: "synthetic".into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 || self.epochs_per_class == 0 || self.channels == 0 || self.samples == 0 {
            return Err(Error::InvalidConfig(
                "synthetic spec needs >= 2 classes and non-zero epochs, channels, samples".into(),
            ));
        }
        if !(self.sampling_rate > 0.0) {
            return Err(Error::InvalidConfig("sampling rate must be positive".into()));
        }
        let nyquist = self.sampling_rate / 2.0;
        for &(lo, hi) in [self.mu_band, self.beta_band].iter() {
            if !(lo > 0.0 && lo < hi && hi < nyquist) {
                return Err(Error::InvalidBand {
                    low_hz: lo,
                    high_hz: hi,
                    sampling_rate: self.sampling_rate,
                });
            }
        }
        for gains in [&self.mu_gains, &self.beta_gains] {
            if gains.len() != self.num_classes || gains.iter().any(|g| g.len() != self.channels) {
                return Err(Error::InvalidConfig(format!(
                    "gain maps must be {} classes x {} channels",
                    self.num_classes, self.channels
                )));
            }
            if gains.iter().flatten().any(|&g| !(g >= 0.0 && g.is_finite())) {
                return Err(Error::InvalidConfig("gains must be finite and >= 0".into()));
            }
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::InvalidConfig("noise_sd must be >= 0".into()));
        }
        Ok(())
    }
}

/// Epochs are emitted with interleaved labels `1, 2, ..., C, 1, 2, ...`.
pub fn generate_synthetic<T: Real>(spec: &SyntheticSpec) -> Result<EpochSet<T>> {
    spec.validate()?;
    let mut rng = seed::rng(spec.seed);
    let noise = Normal::new(0.0, spec.noise_sd).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let f_mu = (spec.mu_band.0 + spec.mu_band.1) / 2.0;
    let f_beta = (spec.beta_band.0 + spec.beta_band.1) / 2.0;
    let dt = 1.0 / spec.sampling_rate;

    let total = spec.num_classes * spec.epochs_per_class;
    let mut epochs = Vec::with_capacity(total);
    for i in 0..total {
        let class = i % spec.num_classes;
        let mut data = Array2::<T>::zeros((spec.channels, spec.samples));
        for c in 0..spec.channels {
            let phase_mu = rng.random_range(0.0..2.0 * PI);
            let phase_beta = rng.random_range(0.0..2.0 * PI);
            let g_mu = spec.mu_gains[class][c];
            let g_beta = spec.beta_gains[class][c];
            for j in 0..spec.samples {
                let t = j as f64 * dt;
                let v = noise.sample(&mut rng)
                    + g_mu * (2.0 * PI * f_mu * t + phase_mu).sin()
                    + g_beta * (2.0 * PI * f_beta * t + phase_beta).sin();
                data[[c, j]] = T::cast(v);
            }
        }
        epochs.push(Epoch::new(spec.subject_id.clone(), class + 1, spec.sampling_rate, data));
    }
    EpochSet::new(epochs, spec.num_classes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_above_nyquist_errors() {
        let spec = SyntheticSpec::lateralized(2, 2, 2, 64, 40.0, 1.0, 0);
        assert!(matches!(generate_synthetic::<f64>(&spec), Err(Error::InvalidBand { .. })));
    }

    #[test]
    fn same_seed_identical_different_seed_differs() {
        let spec = SyntheticSpec::lateralized(2, 3, 2, 50, 250.0, 2.0, 9);
        let a: EpochSet<f64> = generate_synthetic(&spec).unwrap();
        let b: EpochSet<f64> = generate_synthetic(&spec).unwrap();
        assert_eq!(a, b);
        let c: EpochSet<f64> = generate_synthetic(&SyntheticSpec { seed: 10, ..spec }).unwrap();
        for (x, y) in a.iter().zip(c.iter()) {
            assert_ne!(x.data, y.data);
        }
    }

    #[test]
    fn shape_and_labels() {
        let spec = SyntheticSpec::lateralized(3, 4, 5, 32, 128.0, 1.0, 1);
        let set: EpochSet<f32> = generate_synthetic(&spec).unwrap();
        assert_eq!(set.len(), 12);
        assert_eq!(set.channels(), 5);
        assert_eq!(set.samples(), 32);
        assert_eq!(set.class_counts(), vec![4, 4, 4]);
    }

    #[test]
    fn negative_gain_rejected() {
        let mut spec = SyntheticSpec::lateralized(2, 2, 2, 64, 250.0, 1.0, 0);
        spec.mu_gains[0][1] = -1.0;
        assert!(matches!(generate_synthetic::<f64>(&spec), Err(Error::InvalidConfig(_))));
    }
}
