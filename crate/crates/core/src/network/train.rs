//! Mini-batch Adam training with validation-based early stopping.

use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{stack, BlockGrads, Mode, Network, NetworkSpec};
use crate::classify::MdnClassifier;
use crate::data::EpochSet;
use crate::error::{Error, Result};
use crate::metrics::divergence;
use crate::scalar::Real;
use crate::seed;
use crate::walsh::WalshCodebook;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub batch_size: usize,
    /// Full passes over the training set.
    pub max_iterations: usize,
    /// Passes without a strict validation-loss improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    /// Compute training-feature divergence before and after training.
    pub track_divergence: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            batch_size: 32,
            max_iterations: 500,
            patience: 20,
            seed: 0,
            track_divergence: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate >= 0.0
            && self.learning_rate.is_finite()
            && self.adam_beta1 > 0.0
            && self.adam_beta1 < 1.0
            && self.adam_beta2 > 0.0
            && self.adam_beta2 < 1.0
            && self.adam_eps > 0.0
            && self.batch_size >= 1
            && self.max_iterations >= 1
            && self.patience >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid train config {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxIterations,
    Patience,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub train_loss: Vec<f64>,
    pub validation_loss: Vec<f64>,
    pub validation_accuracy: Vec<f64>,
    pub stop_iteration: usize,
    pub stop_reason: StopReason,
    /// Iteration whose parameters were returned (1-based).
    pub best_iteration: usize,
    pub best_validation_loss: f64,
    pub initial_divergence: Option<f64>,
    pub final_divergence: Option<f64>,
}

struct Adam<T> {
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    step: i32,
}

impl<T: Real> Adam<T> {
    fn new(net: &mut Network<T>) -> Self {
        let sizes: Vec<usize> = net.params.trainable_mut().iter().map(|s| s.len()).collect();
        Adam {
            m: sizes.iter().map(|&n| vec![T::zero(); n]).collect(),
            v: sizes.iter().map(|&n| vec![T::zero(); n]).collect(),
            step: 0,
        }
    }

    fn update(&mut self, net: &mut Network<T>, grads: &[BlockGrads<T>], cfg: &TrainConfig) {
        self.step += 1;
        let (b1, b2) = (T::cast(cfg.adam_beta1), T::cast(cfg.adam_beta2));
        let c1 = T::one() - b1.powi(self.step);
        let c2 = T::one() - b2.powi(self.step);
        let lr = T::cast(cfg.learning_rate);
        let eps = T::cast(cfg.adam_eps);
        let flat = BlockGrads::flat(grads);
        for (((p, g), m), v) in net.params.trainable_mut().into_iter().zip(flat).zip(&mut self.m).zip(&mut self.v) {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (T::one() - b1) * g[i];
                v[i] = b2 * v[i] + (T::one() - b2) * g[i] * g[i];
                let mhat = m[i] / c1;
                let vhat = v[i] / c2;
                p[i] -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
    }
}

fn batches(order: &[usize], size: usize, avoid_single: bool) -> Vec<&[usize]> {
    let mut out: Vec<&[usize]> = order.chunks(size).collect();
    if avoid_single && out.len() > 1 && out[out.len() - 1].len() == 1 {
        let n = out.len();
        let start = (n - 2) * size;
        out.truncate(n - 2);
        out.push(&order[start..]);
    }
    out
}

fn target_matrix<T: Real>(labels: &[usize], codebook: &WalshCodebook) -> Array2<T> {
    let rows = codebook.targets::<T>();
    Array2::from_shape_fn((labels.len(), codebook.order()), |(i, j)| rows[[labels[i] - 1, j]])
}

/// Mean per-epoch MSE against class targets and MDN accuracy.
pub(crate) fn evaluate<T: Real>(net: &Network<T>, set: &EpochSet<T>, codebook: &WalshCodebook) -> Result<(f64, f64)> {
    let feats = net.features(set)?;
    let labels = set.labels();
    let targets = target_matrix::<T>(&labels, codebook);
    let loss = (&feats - &targets).iter().map(|v| v.as_f64().powi(2)).sum::<f64>() / feats.len() as f64;
    let mdn = MdnClassifier::<T>::new(codebook.clone());
    let correct = feats
        .rows()
        .into_iter()
        .zip(&labels)
        .filter(|(row, &l)| mdn.classify(row.as_slice().expect("row slice")).map(|p| p == l).unwrap_or(false))
        .count();
    Ok((loss, correct as f64 / set.len() as f64))
}

fn feature_divergence<T: Real>(net: &Network<T>, set: &EpochSet<T>) -> Option<f64> {
    let feats = net.features(set).ok()?;
    match divergence(&feats, &set.labels(), set.num_classes()) {
        Ok(v) => Some(v),
        Err(e) => {
            log::debug!("divergence unavailable: {e}");
            None
        }
    }
}

/// Trains a freshly initialized network and returns the parameters of the
/// iteration with the lowest validation loss.
pub fn train<T: Real>(
    spec: &NetworkSpec,
    init_seed: u64,
    train_set: &EpochSet<T>,
    validation: &EpochSet<T>,
    codebook: &WalshCodebook,
    cfg: &TrainConfig,
) -> Result<(Network<T>, TrainReport)> {
    cfg.validate()?;
    if train_set.is_empty() || validation.is_empty() {
        return Err(Error::EmptySet);
    }
    if spec.output_dim != codebook.order() {
        return Err(Error::InvalidConfig(format!(
            "network output {} differs from codebook order {}",
            spec.output_dim,
            codebook.order()
        )));
    }
    if train_set.num_classes() > codebook.num_classes() {
        return Err(Error::InvalidConfig(format!(
            "{} classes but codebook holds {}",
            train_set.num_classes(),
            codebook.num_classes()
        )));
    }
    let mut net = Network::<T>::new(spec.clone(), init_seed)?;
    let uses_bn = spec.blocks.iter().any(|b| b.batch_norm);
    if uses_bn && train_set.len() < 2 {
        return Err(Error::InvalidConfig("batch norm training needs at least 2 epochs".into()));
    }
    let initial_divergence = if cfg.track_divergence {
        feature_divergence(&net, train_set)
    } else {
        None
    };
    let labels = train_set.labels();
    let mut rng = seed::rng(cfg.seed);
    let mut adam = Adam::<T>::new(&mut net);
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    let mut report = TrainReport {
        train_loss: Vec::new(),
        validation_loss: Vec::new(),
        validation_accuracy: Vec::new(),
        stop_iteration: 0,
        stop_reason: StopReason::MaxIterations,
        best_iteration: 0,
        best_validation_loss: f64::INFINITY,
        initial_divergence,
        final_divergence: None,
    };
    let mut best = net.params.clone();
    let mut stale = 0usize;

    for iteration in 1..=cfg.max_iterations {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in batches(&order, cfg.batch_size, uses_bn) {
            let x = stack(chunk.iter().map(|&i| &train_set.epochs()[i].data))?;
            let batch_labels: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let targets = target_matrix::<T>(&batch_labels, codebook);
            let (loss, grads) = net.loss_and_gradients(&x, &targets, Mode::Train, Some(&mut rng))?;
            if !loss.is_finite() {
                return Err(Error::Diverged { iteration });
            }
            total += loss * chunk.len() as f64;
            adam.update(&mut net, &grads, cfg);
        }
        let train_loss = total / train_set.len() as f64;
        let (val_loss, val_acc) = evaluate(&net, validation, codebook)?;
        if !val_loss.is_finite() {
            return Err(Error::Diverged { iteration });
        }
        report.train_loss.push(train_loss);
        report.validation_loss.push(val_loss);
        report.validation_accuracy.push(val_acc);
        report.stop_iteration = iteration;
        log::trace!("iteration {iteration}: train {train_loss:.6} val {val_loss:.6} acc {val_acc:.3}");
        if val_loss < report.best_validation_loss {
            report.best_validation_loss = val_loss;
            report.best_iteration = iteration;
            best = net.params.clone();
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                report.stop_reason = StopReason::Patience;
                break;
            }
        }
    }
    net.params = best;
    if cfg.track_divergence {
        report.final_divergence = feature_divergence(&net, train_set);
    }
    Ok((net, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batching_merges_single_tail() {
        let order: Vec<usize> = (0..65).collect();
        let b = batches(&order, 32, true);
        assert_eq!(b.iter().map(|c| c.len()).collect::<Vec<_>>(), vec![32, 33]);
        let b = batches(&order, 32, false);
        assert_eq!(b.iter().map(|c| c.len()).collect::<Vec<_>>(), vec![32, 32, 1]);
    }
}
