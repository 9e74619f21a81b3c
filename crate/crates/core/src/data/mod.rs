//! Epochs, epoch sets, splitting, file formats and the synthetic generator.

mod io;
mod split;
mod synthetic;

pub use io::{load_epochs, read_binary, read_csv, save_epochs, write_binary, write_csv, CsvOptions, Format};
pub use split::{split_dataset, stratified_subsample, Split, SplitSpec};
pub use synthetic::{generate_synthetic, SyntheticSpec};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Whether an epoch was recorded or produced by augmentation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub enum Origin {
    #[default]
    Original,
    /// Augmented copy of epoch `source` (index into the set it was derived from),
    /// with the draws that produced it.
    Augmented {
        source: usize,
        scale: f64,
        sign: i8,
        shift: i64,
    },
}

/// One labeled trial: `channels × samples` amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct Epoch<T> {
    pub subject_id: String,
    /// 1-based class label.
    pub label: usize,
    pub sampling_rate: f64,
    pub data: Array2<T>,
    pub origin: Origin,
}

impl<T: Real> Epoch<T> {
    pub fn new(subject_id: impl Into<String>, label: usize, sampling_rate: f64, data: Array2<T>) -> Self {
        Epoch {
            subject_id: subject_id.into(),
            label,
            sampling_rate,
            data,
            origin: Origin::Original,
        }
    }

    pub fn channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn samples(&self) -> usize {
        self.data.ncols()
    }

    /// Same metadata, new data matrix.
    pub fn with_data(&self, data: Array2<T>) -> Self {
        Epoch {
            subject_id: self.subject_id.clone(),
            label: self.label,
            sampling_rate: self.sampling_rate,
            data,
            origin: self.origin,
        }
    }

    /// SHA-256 over label, shape and sample bits; identifies an epoch's
    /// content regardless of which set holds it.
    pub fn digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update((self.label as u64).to_le_bytes());
        h.update((self.channels() as u64).to_le_bytes());
        h.update((self.samples() as u64).to_le_bytes());
        for v in self.data.iter() {
            h.update(v.as_f64().to_le_bytes());
        }
        h.finalize().into()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// A homogeneous collection of epochs sharing channel count, length and
/// sampling rate, labeled in `1..=num_classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochSet<T> {
    epochs: Vec<Epoch<T>>,
    num_classes: usize,
}

impl<T: Real> EpochSet<T> {
    /// Validates homogeneity, labels, and that every class is represented.
    pub fn new(epochs: Vec<Epoch<T>>, num_classes: usize) -> Result<Self> {
        let set = Self::partial(epochs, num_classes)?;
        let counts = set.class_counts();
        if let Some(c) = counts.iter().position(|&n| n == 0) {
            return Err(Error::TooFewEpochs {
                class: c + 1,
                count: 0,
                needed: 1,
            });
        }
        Ok(set)
    }

    /// Like [`EpochSet::new`] but tolerates classes with no epochs, as happens
    /// for small held-out partitions.
    pub fn partial(epochs: Vec<Epoch<T>>, num_classes: usize) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 classes, got {num_classes}"
            )));
        }
        let first = epochs.first().ok_or(Error::EmptySet)?;
        let (e, n, sr) = (first.channels(), first.samples(), first.sampling_rate);
        if e == 0 || n == 0 {
            return Err(Error::Shape(format!("epoch shape {e}x{n} is empty")));
        }
        if !(sr > 0.0 && sr.is_finite()) {
            return Err(Error::InvalidConfig(format!("sampling rate {sr} must be positive")));
        }
        for (i, ep) in epochs.iter().enumerate() {
            if ep.channels() != e || ep.samples() != n {
                return Err(Error::Shape(format!(
                    "epoch {i} is {}x{}, expected {e}x{n}",
                    ep.channels(),
                    ep.samples()
                )));
            }
            if ep.sampling_rate != sr {
                return Err(Error::Shape(format!(
                    "epoch {i} sampled at {} Hz, expected {sr} Hz",
                    ep.sampling_rate
                )));
            }
            if ep.label == 0 || ep.label > num_classes {
                return Err(Error::LabelOutOfRange {
                    label: ep.label,
                    num_classes,
                });
            }
        }
        Ok(EpochSet { epochs, num_classes })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.epochs[0].channels()
    }

    pub fn samples(&self) -> usize {
        self.epochs[0].samples()
    }

    pub fn sampling_rate(&self) -> f64 {
        self.epochs[0].sampling_rate
    }

    pub fn epochs(&self) -> &[Epoch<T>] {
        &self.epochs
    }

    pub fn into_epochs(self) -> Vec<Epoch<T>> {
        self.epochs
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Epoch<T>> {
        self.epochs.iter()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.epochs.iter().map(|e| e.label).collect()
    }

    /// Number of epochs per class, indexed by `label - 1`.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for ep in &self.epochs {
            counts[ep.label - 1] += 1;
        }
        counts
    }

    /// Copies the epochs at `indices` into a new set (classes may be missing).
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut epochs = Vec::with_capacity(indices.len());
        for &i in indices {
            let ep = self.epochs.get(i).ok_or_else(|| {
                Error::InvalidConfig(format!("index {i} out of range for {} epochs", self.len()))
            })?;
            epochs.push(ep.clone());
        }
        Self::partial(epochs, self.num_classes)
    }

    /// Applies `f` to every epoch; the results must again form a valid set.
    pub fn try_map<F>(&self, mut f: F) -> Result<Self>
    where
        F: FnMut(&Epoch<T>) -> Result<Epoch<T>>,
    {
        let epochs = self.epochs.iter().map(&mut f).collect::<Result<Vec<_>>>()?;
        Self::partial(epochs, self.num_classes)
    }

    /// Keeps only epochs whose label is in `classes` and renumbers them so that
    /// `classes[k]` becomes label `k + 1`.
    pub fn select_classes(&self, classes: &[usize]) -> Result<Self> {
        let epochs = self
            .epochs
            .iter()
            .filter_map(|ep| {
                classes.iter().position(|&c| c == ep.label).map(|k| {
                    let mut e = ep.clone();
                    e.label = k + 1;
                    e
                })
            })
            .collect();
        Self::partial(epochs, classes.len().max(2))
    }

    /// Maps every label through `f`, producing a set with `num_classes` classes.
    pub fn relabel<F: Fn(usize) -> usize>(&self, num_classes: usize, f: F) -> Result<Self> {
        let epochs = self
            .epochs
            .iter()
            .map(|ep| {
                let mut e = ep.clone();
                e.label = f(ep.label);
                e
            })
            .collect();
        Self::partial(epochs, num_classes)
    }

    /// SHA-256 over class count, shape, labels, subject ids and sample bits.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.num_classes as u64).to_le_bytes());
        h.update((self.channels() as u64).to_le_bytes());
        h.update((self.samples() as u64).to_le_bytes());
        h.update(self.sampling_rate().to_le_bytes());
        for ep in &self.epochs {
            h.update((ep.label as u64).to_le_bytes());
            h.update((ep.subject_id.len() as u64).to_le_bytes());
            h.update(ep.subject_id.as_bytes());
            for v in ep.data.iter() {
                h.update(v.as_f64().to_le_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn count_origin(&self, augmented: bool) -> usize {
        self.epochs
            .iter()
            .filter(|e| matches!(e.origin, Origin::Augmented { .. }) == augmented)
            .count()
    }
}

impl<'a, T> IntoIterator for &'a EpochSet<T> {
    type Item = &'a Epoch<T>;
    type IntoIter = std::slice::Iter<'a, Epoch<T>>;

    fn into_iter(self) -> Self::IntoIter {
        self.epochs.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn ep(label: usize, e: usize, n: usize) -> Epoch<f64> {
        Epoch::new("s", label, 100.0, Array2::zeros((e, n)))
    }

    #[test]
    fn rejects_heterogeneous_shapes() {
        let err = EpochSet::new(vec![ep(1, 3, 8), ep(2, 2, 8)], 2).unwrap_err();
        assert!(matches!(err, Error::Shape(_)));
    }

    #[test]
    fn rejects_label_out_of_range() {
        let err = EpochSet::new(vec![ep(1, 3, 8), ep(3, 3, 8)], 2).unwrap_err();
        assert!(matches!(err, Error::LabelOutOfRange { label: 3, .. }));
    }

    #[test]
    fn requires_every_class() {
        let err = EpochSet::new(vec![ep(1, 3, 8), ep(1, 3, 8)], 2).unwrap_err();
        assert!(matches!(err, Error::TooFewEpochs { class: 2, .. }));
        assert!(EpochSet::partial(vec![ep(1, 3, 8)], 2).is_ok());
    }

    #[test]
    fn empty_is_rejected() {
        assert!(matches!(EpochSet::<f64>::new(vec![], 2), Err(Error::EmptySet)));
    }

    #[test]
    fn fingerprint_tracks_content() {
        let a = EpochSet::new(vec![ep(1, 2, 4), ep(2, 2, 4)], 2).unwrap();
        let mut b = a.clone();
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.epochs[0].data[[0, 0]] = 1.0;
        assert_ne!(a.fingerprint(), b.fingerprint());
    }

    #[test]
    fn select_classes_renumbers() {
        let set = EpochSet::new(vec![ep(1, 1, 2), ep(2, 1, 2), ep(3, 1, 2), ep(3, 1, 2)], 3).unwrap();
        let sub = set.select_classes(&[3, 1]).unwrap();
        assert_eq!(sub.labels(), vec![2, 1, 1]);
    }
}
