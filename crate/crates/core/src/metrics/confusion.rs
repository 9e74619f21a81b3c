use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows are true classes, columns predictions; both 0-based internally.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.num_classes()).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            0.0
        } else {
            self.correct() as f64 / total as f64
        }
    }
}

/// Labels are 1-based.
pub fn confusion(preds: &[usize], truth: &[usize], num_classes: usize) -> Result<ConfusionMatrix> {
    if preds.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} labels",
            preds.len(),
            truth.len()
        )));
    }
    let mut counts = vec![vec![0u64; num_classes]; num_classes];
    for (&p, &t) in preds.iter().zip(truth) {
        for label in [p, t] {
            if label < 1 || label > num_classes {
                return Err(Error::LabelOutOfRange {
                    label,
                    num_classes,
                });
            }
        }
        counts[t - 1][p - 1] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

/// A metric whose denominator was zero is reported as 0 and listed in
/// `undefined` by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub ppv: f64,
    pub npv: f64,
    pub sensitivity: f64,
    pub f_measure: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub undefined: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClasswiseReport {
    pub classes: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub kappa: f64,
}

fn ratio(num: f64, den: f64, name: &str, undefined: &mut Vec<String>) -> f64 {
    if den == 0.0 {
        undefined.push(name.to_string());
        0.0
    } else {
        num / den
    }
}

pub fn classwise_metrics(cm: &ConfusionMatrix) -> ClasswiseReport {
    let c = cm.num_classes();
    let total = cm.total() as f64;
    let classes = (0..c)
        .map(|k| {
            let tp = cm.counts[k][k] as f64;
            let row: f64 = cm.counts[k].iter().sum::<u64>() as f64;
            let col: f64 = cm.counts.iter().map(|r| r[k]).sum::<u64>() as f64;
            let fp = col - tp;
            let fn_ = row - tp;
            let tn = total - tp - fp - fn_;
            let mut undefined = Vec::new();
            let ppv = ratio(tp, tp + fp, "ppv", &mut undefined);
            let npv = ratio(tn, tn + fn_, "npv", &mut undefined);
            let sensitivity = ratio(tp, tp + fn_, "sensitivity", &mut undefined);
            let f_measure = ratio(2.0 * ppv * sensitivity, ppv + sensitivity, "f_measure", &mut undefined);
            ClassMetrics {
                ppv,
                npv,
                sensitivity,
                f_measure,
                undefined,
            }
        })
        .collect();
    let accuracy = cm.accuracy();
    ClasswiseReport {
        classes,
        accuracy,
        kappa: kappa_balanced(accuracy, c),
    }
}

/// Chance-corrected accuracy against a uniform `1/C` chance level.
pub fn kappa_balanced(accuracy: f64, num_classes: usize) -> f64 {
    let chance = 1.0 / num_classes as f64;
    (accuracy - chance) / (1.0 - chance)
}
