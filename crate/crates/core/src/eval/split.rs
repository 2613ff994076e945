use rand::seq::SliceRandom;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng::rng_for;

/// Per-class shuffled split. Each class sends `round(train_frac * n_class)`
/// rows to training, clamped so both partitions keep at least one row of it.
/// Both partitions list their rows in original order.
pub fn stratified_split(data: &Dataset, train_frac: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::Config(format!(
            "train_frac must lie in (0, 1), got {train_frac}"
        )));
    }
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..data.n_rows())
            .filter(|&i| data.labels()[i] == class)
            .collect();
        let n = idx.len();
        if n < 2 {
            return Err(Error::Split(format!(
                "class {class} has {n} row(s); at least 2 are needed to populate both partitions"
            )));
        }
        let n_train = ((train_frac * n as f64).round() as usize).clamp(1, n - 1);
        idx.shuffle(&mut rng_for(seed, u64::from(class)));
        train_idx.extend_from_slice(&idx[..n_train]);
        test_idx.extend_from_slice(&idx[n_train..]);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok((data.subset(&train_idx), data.subset(&test_idx)))
}
