use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::EpochSet;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::seed;

/// Holdout fractions for a stratified train/validation/test partition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub test_fraction: f64,
    /// Fraction of the post-test training pool held out for validation.
    pub validation_fraction_of_train: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            test_fraction: 0.2,
            validation_fraction_of_train: 0.1,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "test_fraction {} must lie in (0, 1)",
                self.test_fraction
            )));
        }
        if !(self.validation_fraction_of_train >= 0.0 && self.validation_fraction_of_train < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "validation_fraction_of_train {} must lie in [0, 1)",
                self.validation_fraction_of_train
            )));
        }
        Ok(())
    }
}

/// Disjoint, sorted index lists into an [`EpochSet`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

// Guards floor() against products such as 0.7 * 10 = 6.999999999999999.
fn floor_count(fraction: f64, n: usize) -> usize {
    (fraction * n as f64 + 1e-9).floor() as usize
}

/// Stratified split: per class, `floor(test_fraction * n_c)` epochs go to
/// test, then `floor(validation_fraction * pool_c)` of the remaining pool to
/// validation, and the remainder to train.
pub fn split_dataset<T: Real>(set: &EpochSet<T>, spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    let mut rng = seed::rng(spec.seed);
    let mut split = Split {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
    };
    for class in 1..=set.num_classes() {
        let mut idx: Vec<usize> = set
            .iter()
            .enumerate()
            .filter(|(_, e)| e.label == class)
            .map(|(i, _)| i)
            .collect();
        if idx.len() < 2 {
            return Err(Error::TooFewEpochs {
                class,
                count: idx.len(),
                needed: 2,
            });
        }
        idx.shuffle(&mut rng);
        let n_test = floor_count(spec.test_fraction, idx.len());
        let pool = idx.len() - n_test;
        let n_val = floor_count(spec.validation_fraction_of_train, pool);
        split.test.extend_from_slice(&idx[..n_test]);
        split.validation.extend_from_slice(&idx[n_test..n_test + n_val]);
        split.train.extend_from_slice(&idx[n_test + n_val..]);
    }
    split.train.sort_unstable();
    split.validation.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

/// Picks `total` of `indices` while keeping class proportions: floor quotas
/// per class, leftover slots to the largest fractional remainders (ties to
/// the smaller class). Returns sorted indices.
pub fn stratified_subsample<T: Real>(
    set: &EpochSet<T>,
    indices: &[usize],
    total: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    if total >= indices.len() {
        let mut all = indices.to_vec();
        all.sort_unstable();
        return Ok(all);
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); set.num_classes()];
    for &i in indices {
        let ep = set
            .epochs()
            .get(i)
            .ok_or_else(|| Error::InvalidConfig(format!("index {i} out of range")))?;
        by_class[ep.label - 1].push(i);
    }
    let n = indices.len() as f64;
    let exact: Vec<f64> = by_class.iter().map(|c| total as f64 * c.len() as f64 / n).collect();
    let mut quota: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut left = total - quota.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..quota.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for &c in order.iter().cycle() {
        if left == 0 {
            break;
        }
        if quota[c] < by_class[c].len() {
            quota[c] += 1;
            left -= 1;
        }
    }
    let mut rng = seed::rng(seed);
    let mut out = Vec::with_capacity(total);
    for (members, q) in by_class.iter_mut().zip(quota) {
        members.sort_unstable();
        members.shuffle(&mut rng);
        out.extend_from_slice(&members[..q]);
    }
    out.sort_unstable();
    Ok(out)
}
