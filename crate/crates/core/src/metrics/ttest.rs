use serde::{Deserialize, Serialize};

use super::special::student_t_two_tailed;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t: f64,
    pub df: usize,
    pub p_value: f64,
    pub mean_difference: f64,
    /// Set when every difference is equal and nonzero: `t` is infinite and
    /// `p_value` is 0.
    pub degenerate: bool,
}

/// Two-tailed paired t-test on `a - b`.
pub fn paired_ttest(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("paired samples of length {} and {}", a.len(), b.len())));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::InvalidConfig(format!("paired t-test needs n >= 2, got {n}")));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let df = n - 1;
    if var == 0.0 {
        return Ok(if mean == 0.0 {
            TTestResult {
                t: 0.0,
                df,
                p_value: 1.0,
                mean_difference: 0.0,
                degenerate: false,
            }
        } else {
            TTestResult {
                t: f64::INFINITY.copysign(mean),
                df,
                p_value: 0.0,
                mean_difference: mean,
                degenerate: true,
            }
        });
    }
    let t = mean / (var.sqrt() / (n as f64).sqrt());
    Ok(TTestResult {
        t,
        df,
        p_value: student_t_two_tailed(t, df as f64),
        mean_difference: mean,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_samples() {
        let r = paired_ttest(&[0.5, 0.7, 0.9], &[0.5, 0.7, 0.9]).unwrap();
        assert_eq!((r.t, r.p_value), (0.0, 1.0));
    }

    #[test]
    fn hand_formula() {
        let a = [2.0, 3.0, 4.0, 6.0];
        let b = [1.0, 2.0, 3.0, 4.0];
        let r = paired_ttest(&a, &b).unwrap();
        // d = [1,1,1,2], mean 1.25, sd 0.5
        assert!((r.t - 1.25 / (0.5 / 2.0)).abs() < 1e-12);
        assert_eq!(r.df, 3);
        let swapped = paired_ttest(&b, &a).unwrap();
        assert_eq!(swapped.t, -r.t);
        assert_eq!(swapped.p_value, r.p_value);
    }

    #[test]
    fn degenerate_and_errors() {
        let r = paired_ttest(&[2.0, 3.0], &[1.0, 2.0]).unwrap();
        assert!(r.degenerate && r.p_value == 0.0);
        assert!(paired_ttest(&[1.0], &[1.0]).is_err());
        assert!(paired_ttest(&[1.0, 2.0], &[1.0]).is_err());
    }
}
