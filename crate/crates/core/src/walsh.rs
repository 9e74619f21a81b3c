//! Modified (0/1) Walsh matrices and the class codebook built from them.
//!
//! Rows follow natural Sylvester order, with `+1 -> 1` and `-1 -> 0`.
//! Class `c` (1-based) is assigned row `c`; row 0 (all ones) is never used.

use ndarray::{s, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub const MAX_ORDER: usize = 1024;

/// `H_1 = [1]`, `H_2n = [[H_n, H_n], [H_n, !H_n]]`.
pub fn build_walsh(order: usize) -> Result<Array2<u8>> {
    if !(2..=MAX_ORDER).contains(&order) || !order.is_power_of_two() {
        return Err(Error::InvalidConfig(format!(
            "Walsh order {order} must be a power of two in 2..={MAX_ORDER}"
        )));
    }
    let mut h = Array2::<u8>::ones((1, 1));
    while h.nrows() < order {
        let n = h.nrows();
        let mut next = Array2::<u8>::zeros((2 * n, 2 * n));
        next.slice_mut(s![..n, ..n]).assign(&h);
        next.slice_mut(s![..n, n..]).assign(&h);
        next.slice_mut(s![n.., ..n]).assign(&h);
        next.slice_mut(s![n.., n..]).assign(&h.mapv(|v| 1 - v));
        h = next;
    }
    Ok(h)
}

/// Number of positions where `u` and `v` differ.
pub fn hamming(u: &[u8], v: &[u8]) -> Result<usize> {
    if u.len() != v.len() {
        return Err(Error::Shape(format!("hamming of lengths {} and {}", u.len(), v.len())));
    }
    Ok(u.iter().zip(v).filter(|(a, b)| a != b).count())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalshCodebook {
    matrix: Array2<u8>,
    class_rows: Vec<usize>,
}

impl WalshCodebook {
    pub fn new(order: usize, num_classes: usize) -> Result<Self> {
        let matrix = build_walsh(order)?;
        if num_classes == 0 || num_classes >= order {
            return Err(Error::InvalidConfig(format!(
                "{num_classes} classes need a Walsh order above {num_classes}, got {order}"
            )));
        }
        Ok(WalshCodebook {
            matrix,
            class_rows: (1..=num_classes).collect(),
        })
    }

    pub fn order(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn num_classes(&self) -> usize {
        self.class_rows.len()
    }

    pub fn matrix(&self) -> &Array2<u8> {
        &self.matrix
    }

    /// Row index assigned to 1-based `class`.
    pub fn row_of(&self, class: usize) -> usize {
        self.class_rows[class - 1]
    }

    pub fn target(&self, class: usize) -> ArrayView1<'_, u8> {
        self.matrix.row(self.row_of(class))
    }

    /// `C x M` matrix of class targets as reals.
    pub fn targets<T: Real>(&self) -> Array2<T> {
        let m = self.order();
        Array2::from_shape_fn((self.num_classes(), m), |(c, j)| {
            T::cast(self.matrix[[self.class_rows[c], j]] as f64)
        })
    }
}

/// The `num_classes` target rows of a codebook of the given order.
pub fn class_targets(order: usize, num_classes: usize) -> Result<Vec<Vec<u8>>> {
    let book = WalshCodebook::new(order, num_classes)?;
    Ok((1..=num_classes).map(|c| book.target(c).to_vec()).collect())
}
