//! Minimum-distance classification against fixed Walsh rows, and the
//! one-vs-one / one-vs-rest ensembles built from binary networks.

use std::marker::PhantomData;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::Network;
use crate::scalar::Real;
use crate::walsh::WalshCodebook;

/// Anything mapping an epoch matrix to an OFE vector.
pub trait FeatureExtractor<T> {
    fn extract(&self, epoch: &Array2<T>) -> Result<Array1<T>>;
}

impl<T: Real> FeatureExtractor<T> for Network<T> {
    fn extract(&self, epoch: &Array2<T>) -> Result<Array1<T>> {
        self.forward(epoch)
    }
}

/// Nearest-row classifier. The rows are fixed by the codebook.
#[derive(Debug, Clone, PartialEq)]
pub struct MdnClassifier<T> {
    codebook: WalshCodebook,
    _scalar: PhantomData<T>,
}

impl<T: Real> MdnClassifier<T> {
    pub fn new(codebook: WalshCodebook) -> Self {
        MdnClassifier {
            codebook,
            _scalar: PhantomData,
        }
    }

    pub fn codebook(&self) -> &WalshCodebook {
        &self.codebook
    }

    pub fn num_classes(&self) -> usize {
        self.codebook.num_classes()
    }

    /// Squared Euclidean distance to each class row, class 1 first.
    pub fn distances(&self, ofe: &[T]) -> Result<Vec<f64>> {
        mdn_distances(ofe, &self.codebook)
    }

    /// 1-based class of the nearest row; ties go to the smaller class.
    pub fn classify(&self, ofe: &[T]) -> Result<usize> {
        Ok(argmin(&self.distances(ofe)?) + 1)
    }
}

pub fn mdn_distances<T: Real>(ofe: &[T], codebook: &WalshCodebook) -> Result<Vec<f64>> {
    if ofe.len() != codebook.order() {
        return Err(Error::Shape(format!(
            "OFE has {} values, codebook order is {}",
            ofe.len(),
            codebook.order()
        )));
    }
    Ok((1..=codebook.num_classes())
        .map(|c| {
            codebook
                .target(c)
                .iter()
                .zip(ofe)
                .map(|(&r, v)| {
                    let d = v.as_f64() - r as f64;
                    d * d
                })
                .sum()
        })
        .collect())
}

pub fn mdn_classify<T: Real>(ofe: &[T], codebook: &WalshCodebook) -> Result<usize> {
    Ok(argmin(&mdn_distances(ofe, codebook)?) + 1)
}

fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    Single,
    Ovo,
    Ovr,
}

/// One network of an ensemble. `classes` is `[a, b]` (a < b) for one-vs-one
/// members, `[c]` for one-vs-rest members and all classes for `Single`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Member<E> {
    pub classes: Vec<usize>,
    pub extractor: E,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaScheme<E> {
    pub kind: SchemeKind,
    pub num_classes: usize,
    pub members: Vec<Member<E>>,
}

/// Class subsets each member must cover, in member order.
pub fn member_classes(kind: SchemeKind, num_classes: usize) -> Vec<Vec<usize>> {
    match kind {
        SchemeKind::Single => vec![(1..=num_classes).collect()],
        SchemeKind::Ovo => {
            let mut out = Vec::new();
            for a in 1..=num_classes {
                for b in (a + 1)..=num_classes {
                    out.push(vec![a, b]);
                }
            }
            out
        }
        SchemeKind::Ovr => (1..=num_classes).map(|c| vec![c]).collect(),
    }
}

impl<E> MetaScheme<E> {
    pub fn new(kind: SchemeKind, num_classes: usize, members: Vec<Member<E>>) -> Result<Self> {
        let want = member_classes(kind, num_classes);
        let have: Vec<&Vec<usize>> = members.iter().map(|m| &m.classes).collect();
        if want.len() != have.len() || want.iter().zip(&have).any(|(a, b)| a != *b) {
            return Err(Error::InvalidConfig(format!(
                "{kind:?} over {num_classes} classes needs members {want:?}, got {have:?}"
            )));
        }
        Ok(MetaScheme {
            kind,
            num_classes,
            members,
        })
    }
}

impl<E> MetaScheme<E> {
    /// `clf` must be the `C`-class classifier for `Single`, the two-class one otherwise.
    pub fn predict<T: Real>(&self, epoch: &Array2<T>, clf: &MdnClassifier<T>) -> Result<usize>
    where
        E: FeatureExtractor<T>,
    {
        match self.kind {
            SchemeKind::Single => {
                let member = self.members.first().ok_or_else(|| missing(1))?;
                clf.classify(member.extractor.extract(epoch)?.as_slice().expect("contiguous OFE"))
            }
            SchemeKind::Ovo => ovo_predict(epoch, self, clf),
            SchemeKind::Ovr => ovr_predict(epoch, self, clf),
        }
    }
}

fn missing(count: usize) -> Error {
    Error::InvalidConfig(format!("scheme is missing member networks (expected {count})"))
}

fn ofe_of<T: Real, E: FeatureExtractor<T>>(member: &Member<E>, epoch: &Array2<T>) -> Result<Vec<f64>> {
    Ok(member.extractor.extract(epoch)?.iter().map(|v| v.as_f64()).collect())
}

/// Pairwise majority vote. Ties between classes with equal votes go to
/// the smaller sum of winning distances, then to the smaller class.
pub fn ovo_predict<T: Real, E: FeatureExtractor<T>>(
    epoch: &Array2<T>,
    scheme: &MetaScheme<E>,
    clf2: &MdnClassifier<T>,
) -> Result<usize> {
    let c = scheme.num_classes;
    let expected = c * (c - 1) / 2;
    if scheme.kind != SchemeKind::Ovo || scheme.members.len() != expected {
        return Err(missing(expected));
    }
    let mut votes = vec![0usize; c];
    let mut dist = vec![0.0f64; c];
    for m in &scheme.members {
        let ofe = ofe_of(m, epoch)?;
        let d = mdn_distances(&ofe, clf2.codebook())?;
        let k = argmin(&d);
        let winner = m.classes[k];
        votes[winner - 1] += 1;
        dist[winner - 1] += d[k];
    }
    let mut best = 0;
    for k in 1..c {
        if votes[k] > votes[best] || (votes[k] == votes[best] && dist[k] < dist[best]) {
            best = k;
        }
    }
    Ok(best + 1)
}

/// Margin `D(rest row) - D(class row)` of each member; largest wins, ties to
/// the smaller class.
pub fn ovr_scores<T: Real, E: FeatureExtractor<T>>(
    epoch: &Array2<T>,
    scheme: &MetaScheme<E>,
    clf2: &MdnClassifier<T>,
) -> Result<Vec<f64>> {
    if scheme.kind != SchemeKind::Ovr || scheme.members.len() != scheme.num_classes {
        return Err(missing(scheme.num_classes));
    }
    scheme
        .members
        .iter()
        .map(|m| {
            let d = mdn_distances(&ofe_of(m, epoch)?, clf2.codebook())?;
            Ok(d[1] - d[0])
        })
        .collect()
}

pub fn ovr_predict<T: Real, E: FeatureExtractor<T>>(
    epoch: &Array2<T>,
    scheme: &MetaScheme<E>,
    clf2: &MdnClassifier<T>,
) -> Result<usize> {
    let scores = ovr_scores(epoch, scheme, clf2)?;
    let mut best = 0;
    for (k, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = k;
        }
    }
    Ok(best + 1)
}
