use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;
use crate::scalar::Real;

const RIDGE: f64 = 1e-6;
const MAX_CONDITION: f64 = 1e12;

/// Within-class scatter (sum of per-class population covariances) and
/// between-class scatter (population covariance of the class means about
/// their average). `features` has one row per sample.
pub fn scatter_matrices<T: Real>(
    features: &Array2<T>,
    labels: &[usize],
    num_classes: usize,
) -> Result<(Array2<f64>, Array2<f64>)> {
    if features.nrows() != labels.len() {
        return Err(Error::Shape(format!(
            "{} feature rows for {} labels",
            features.nrows(),
            labels.len()
        )));
    }
    if num_classes < 2 {
        return Err(Error::InvalidConfig("divergence needs at least 2 classes".into()));
    }
    let dim = features.ncols();
    let x = features.mapv(|v| v.as_f64());
    let mut means = Vec::with_capacity(num_classes);
    let mut sw = Array2::<f64>::zeros((dim, dim));
    for class in 1..=num_classes {
        let rows: Vec<ArrayView1<f64>> = labels
            .iter()
            .zip(x.rows())
            .filter(|(&l, _)| l == class)
            .map(|(_, r)| r)
            .collect();
        if rows.len() < 2 {
            return Err(Error::TooFewEpochs {
                class,
                count: rows.len(),
                needed: 2,
            });
        }
        let n = rows.len() as f64;
        let mut mean = Array1::<f64>::zeros(dim);
        for r in &rows {
            mean += r;
        }
        mean /= n;
        for r in &rows {
            let d = r - &mean;
            for i in 0..dim {
                for j in 0..dim {
                    sw[[i, j]] += d[i] * d[j] / n;
                }
            }
        }
        means.push(mean);
    }
    let mut grand = Array1::<f64>::zeros(dim);
    for m in &means {
        grand += m;
    }
    grand /= num_classes as f64;
    let mut sb = Array2::<f64>::zeros((dim, dim));
    for m in &means {
        let d = m - &grand;
        for i in 0..dim {
            for j in 0..dim {
                sb[[i, j]] += d[i] * d[j] / num_classes as f64;
            }
        }
    }
    Ok((sw, sb))
}

/// `tr(SW^-1 SB)`; SW gets a ridge of `1e-6 * trace / dim` when it is
/// ill-conditioned.
pub fn divergence<T: Real>(features: &Array2<T>, labels: &[usize], num_classes: usize) -> Result<f64> {
    let (mut sw, sb) = scatter_matrices(features, labels, num_classes)?;
    let dim = sw.nrows();
    let trace = sw.diag().sum();
    if !(trace > 0.0) {
        return Err(Error::Singular("within-class scatter is zero".into()));
    }
    let mut eig = symmetric_eigen(&sw)?;
    let ill = |values: &Array1<f64>| {
        let max = values[0];
        let min = values[values.len() - 1];
        min <= 0.0 || max / min > MAX_CONDITION
    };
    if ill(&eig.values) {
        let eps = RIDGE * trace / dim as f64;
        log::debug!("within-class scatter ill-conditioned; adding ridge {eps:e}");
        for i in 0..dim {
            sw[[i, i]] += eps;
        }
        eig = symmetric_eigen(&sw)?;
        if eig.values[dim - 1] <= 0.0 {
            return Err(Error::Singular("within-class scatter stays singular after ridge".into()));
        }
    }
    let mut total = 0.0;
    for (k, &l) in eig.values.iter().enumerate() {
        let v = eig.vectors.column(k);
        total += v.dot(&sb.dot(&v)) / l;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn one_dimensional_hand_value() {
        let f = array![[-1.0], [1.0], [3.0], [5.0]];
        let (sw, sb) = scatter_matrices(&f, &[1, 1, 2, 2], 2).unwrap();
        assert_eq!(sw[[0, 0]], 2.0);
        assert_eq!(sb[[0, 0]], 4.0);
        assert!((divergence(&f, &[1, 1, 2, 2], 2).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn coincident_means() {
        let f = array![[-1.0, 2.0], [1.0, 0.0], [-2.0, 1.5], [2.0, 0.5]];
        assert!(divergence(&f, &[1, 1, 2, 2], 2).unwrap().abs() < 1e-9);
    }

    #[test]
    fn too_few_per_class() {
        let f = array![[0.0], [1.0], [2.0]];
        assert!(divergence(&f, &[1, 1, 2], 2).is_err());
    }
}
