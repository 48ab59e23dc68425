//! Seeded k-fold image partitions for cross-validation runs.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Splits `0..n` into `folds` (train, test) index pairs after a seeded
/// shuffle. Test folds are disjoint, cover everything, and differ in size by
/// at most one; indices come back sorted.
pub fn split_folds(n: usize, folds: usize, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if folds < 2 {
        return Err(Error::invalid_input("need at least 2 folds"));
    }
    if n < folds {
        return Err(Error::invalid_input(format!(
            "cannot split {n} images into {folds} folds"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let base = n / folds;
    let extra = n % folds;
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for fold in 0..folds {
        let size = base + usize::from(fold < extra);
        let mut test: Vec<usize> = order[start..start + size].to_vec();
        let mut train: Vec<usize> = order[..start]
            .iter()
            .chain(&order[start + size..])
            .copied()
            .collect();
        test.sort_unstable();
        train.sort_unstable();
        out.push((train, test));
        start += size;
    }
    Ok(out)
}
