//! Common spatial patterns on filter-bank channels.

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use super::filter::{bank_pad, filter_with, FilterBankSpec};
use crate::data::{Epoch, EpochSet};
use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;
use crate::scalar::Real;

const RIDGE: f64 = 1e-6;
const SINGULAR_RATIO: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CspScheme {
    TwoClass,
    OneVsRest,
}

/// Fitted spatial filters. `projection` is rows = filters, columns = the
/// `E * B` filter-bank channels.
#[derive(Debug, Clone, PartialEq)]
pub struct CspModel<T> {
    pub m: usize,
    pub scheme: CspScheme,
    pub num_classes: usize,
    pub bank: FilterBankSpec,
    pub projection: Array2<T>,
    pub fitted_on: String,
}

/// Full two-class solution before selection: `filters` rows sorted by
/// descending `values`, satisfying `filters * (c1 + c2) * filters^T = I`.
#[derive(Debug, Clone)]
pub struct CspPair {
    pub values: Vec<f64>,
    pub filters: Array2<f64>,
}

#[derive(Serialize, Deserialize)]
struct CspDocument {
    m: usize,
    scheme: CspScheme,
    num_classes: usize,
    bands: Vec<(f64, f64)>,
    filter_order: usize,
    rows: usize,
    cols: usize,
    projection: Vec<f64>,
    fingerprint: String,
}

/// Trace-normalized spatial covariance of one epoch.
pub fn epoch_covariance<T: Real>(epoch: &Epoch<T>) -> Array2<f64> {
    let x = epoch.data.mapv(|v| v.as_f64());
    let c = x.dot(&x.t());
    let tr = c.diag().sum();
    if tr > 0.0 {
        c / tr
    } else {
        c
    }
}

/// Average of trace-normalized covariances over epochs with `label` in `classes`.
pub fn class_covariance<T: Real>(set: &EpochSet<T>, classes: &[usize]) -> Result<Array2<f64>> {
    let e = set.channels();
    let mut acc = Array2::<f64>::zeros((e, e));
    let mut n = 0usize;
    for ep in set.iter().filter(|ep| classes.contains(&ep.label)) {
        acc += &epoch_covariance(ep);
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptySet);
    }
    Ok(acc / n as f64)
}

/// Whitening of `c1 + c2` followed by eigendecomposition of whitened `c1`.
pub fn csp_pair(c1: &Array2<f64>, c2: &Array2<f64>) -> Result<CspPair> {
    let dim = c1.nrows();
    let mut composite = c1 + c2;
    let mut eig = symmetric_eigen(&composite)?;
    if is_singular(&eig.values.to_vec()) {
        let eps = RIDGE * composite.diag().sum() / dim as f64;
        log::warn!("composite covariance is singular; adding ridge {eps:e}");
        for i in 0..dim {
            composite[[i, i]] += eps;
        }
        eig = symmetric_eigen(&composite)?;
        if is_singular(&eig.values.to_vec()) {
            return Err(Error::Singular("composite covariance stays singular after ridge".into()));
        }
    }
    // P = L^{-1/2} U^T
    let mut whiten = eig.vectors.t().to_owned();
    for (mut row, &l) in whiten.axis_iter_mut(Axis(0)).zip(eig.values.iter()) {
        row /= l.sqrt();
    }
    let s1 = whiten.dot(c1).dot(&whiten.t());
    let inner = symmetric_eigen(&s1)?;
    let filters = inner.vectors.t().dot(&whiten);
    Ok(CspPair {
        values: inner.values.to_vec(),
        filters,
    })
}

fn is_singular(values: &[f64]) -> bool {
    let max = values.iter().cloned().fold(0.0, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    !(max > 0.0) || min <= SINGULAR_RATIO * max
}

fn select(pair: &CspPair, m: usize) -> Array2<f64> {
    let n = pair.filters.nrows();
    let mut rows: Vec<usize> = (0..m).collect();
    rows.extend((n - m)..n);
    pair.filters.select(Axis(0), &rows)
}

/// Fits on an already filter-banked training set. `bank` is recorded so the
/// model can filter raw epochs itself.
pub fn fit_csp<T: Real>(
    train: &EpochSet<T>,
    m: usize,
    scheme: CspScheme,
    bank: &FilterBankSpec,
) -> Result<CspModel<T>> {
    let dim = train.channels();
    if m == 0 || 2 * m > dim {
        return Err(Error::InvalidConfig(format!("csp m={m} needs 1 <= 2m <= {dim} channels")));
    }
    let c = train.num_classes();
    let counts = train.class_counts();
    for (k, &n) in counts.iter().enumerate() {
        if n < 2 {
            return Err(Error::TooFewEpochs {
                class: k + 1,
                count: n,
                needed: 2,
            });
        }
    }
    let blocks: Vec<Array2<f64>> = match scheme {
        CspScheme::TwoClass => {
            if c != 2 {
                return Err(Error::InvalidConfig(format!("two-class csp on {c} classes")));
            }
            let c1 = class_covariance(train, &[1])?;
            let c2 = class_covariance(train, &[2])?;
            vec![select(&csp_pair(&c1, &c2)?, m)]
        }
        CspScheme::OneVsRest => (1..=c)
            .map(|k| {
                let rest: Vec<usize> = (1..=c).filter(|&j| j != k).collect();
                let c1 = class_covariance(train, &[k])?;
                let c2 = class_covariance(train, &rest)?;
                Ok(select(&csp_pair(&c1, &c2)?, m))
            })
            .collect::<Result<_>>()?,
    };
    let views: Vec<_> = blocks.iter().map(|b| b.view()).collect();
    let projection = ndarray::concatenate(Axis(0), &views).map_err(|e| Error::Shape(e.to_string()))?;
    if projection.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("csp produced non-finite filters".into()));
    }
    Ok(CspModel {
        m,
        scheme,
        num_classes: c,
        bank: bank.clone(),
        projection: projection.mapv(T::cast),
        fitted_on: train.fingerprint(),
    })
}

/// Projects an already filter-banked epoch onto the CSP filters.
pub fn apply_csp<T: Real>(epoch: &Epoch<T>, model: &CspModel<T>) -> Result<Epoch<T>> {
    if epoch.channels() != model.input_channels() {
        return Err(Error::Shape(format!(
            "csp expects {} channels, epoch has {}",
            model.input_channels(),
            epoch.channels()
        )));
    }
    Ok(epoch.with_data(model.projection.dot(&epoch.data)))
}

/// Filter bank then projection, for raw epochs.
pub fn transform_epoch<T: Real>(epoch: &Epoch<T>, model: &CspModel<T>) -> Result<Epoch<T>> {
    let filters = model.bank.design(epoch.sampling_rate)?;
    apply_csp(&filter_with(epoch, &filters, bank_pad(&model.bank)), model)
}

pub fn transform_set<T: Real>(set: &EpochSet<T>, model: &CspModel<T>) -> Result<EpochSet<T>> {
    let filters = model.bank.design(set.sampling_rate())?;
    let pad = bank_pad(&model.bank);
    set.try_map(|ep| apply_csp(&filter_with(ep, &filters, pad), model))
}

impl<T: Real> CspModel<T> {
    pub fn input_channels(&self) -> usize {
        self.projection.ncols()
    }

    pub fn output_channels(&self) -> usize {
        self.projection.nrows()
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = CspDocument {
            m: self.m,
            scheme: self.scheme,
            num_classes: self.num_classes,
            bands: self.bank.bands.clone(),
            filter_order: self.bank.filter_order,
            rows: self.projection.nrows(),
            cols: self.projection.ncols(),
            projection: self.projection.iter().map(|v| v.as_f64()).collect(),
            fingerprint: self.fitted_on.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: CspDocument = serde_json::from_str(text)?;
        let projection = Array2::from_shape_vec((doc.rows, doc.cols), doc.projection)
            .map_err(|e| Error::Shape(format!("csp projection: {e}")))?;
        let per_block = match doc.scheme {
            CspScheme::TwoClass => 2 * doc.m,
            CspScheme::OneVsRest => 2 * doc.m * doc.num_classes,
        };
        if projection.nrows() != per_block {
            return Err(Error::Shape(format!(
                "csp projection has {} rows, expected {per_block}",
                projection.nrows()
            )));
        }
        Ok(CspModel {
            m: doc.m,
            scheme: doc.scheme,
            num_classes: doc.num_classes,
            bank: FilterBankSpec {
                bands: doc.bands,
                filter_order: doc.filter_order,
            },
            projection: projection.mapv(T::cast),
            fitted_on: doc.fingerprint,
        })
    }
}
