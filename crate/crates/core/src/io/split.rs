//! Train/test splits over matrix cells.

use rand::Rng;

use crate::error::{Result, SppError};
use crate::relmodel::BinaryMatrix;
use crate::rng::seeded;

/// Held-out cells and the training mask that excludes them.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalSplit {
    pub ratio: f64,
    pub seed: u64,
    pub train_mask: BinaryMatrix,
    /// 0-based `(row, col)` of each held-out cell, in row-major order.
    pub test: Vec<(usize, usize)>,
    pub labels: Vec<bool>,
}

/// Holds out `⌊ratio·cells⌋` uniformly chosen cells, ones and zeros alike.
pub fn make_split(r: &BinaryMatrix, ratio: f64, seed: u64) -> Result<EvalSplit> {
    if !(0.0..1.0).contains(&ratio) {
        return Err(SppError::InvalidParameter(format!("hold-out ratio {ratio} outside [0, 1)")));
    }
    let (rows, cols) = (r.rows(), r.cols());
    let cells = rows * cols;
    let count = (ratio * cells as f64).floor() as usize;
    let mut rng = seeded(seed);
    let mut order: Vec<usize> = (0..cells).collect();
    // partial Fisher-Yates: the first `count` entries are the sample
    for i in 0..count {
        let j = rng.random_range(i..cells);
        order.swap(i, j);
    }
    let mut held: Vec<usize> = order[..count].to_vec();
    held.sort_unstable();
    let mut train_mask = BinaryMatrix::filled(rows, cols, true);
    let mut test = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for idx in held {
        let (i, j) = (idx / cols, idx % cols);
        train_mask.set(i, j, false);
        test.push((i, j));
        labels.push(r.get(i, j));
    }
    Ok(EvalSplit {
        ratio,
        seed,
        train_mask,
        test,
        labels,
    })
}
