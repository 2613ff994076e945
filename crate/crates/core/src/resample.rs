//! SMOTE oversampling of the positive (minority) class.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Matrix};
use crate::error::{config, contract, Error, Result};
use crate::rng::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmoteConfig {
    pub k_neighbors: usize,
    /// Target positive count as a fraction of the negative count.
    pub target_ratio: f64,
    pub seed: u64,
}

impl Default for SmoteConfig {
    fn default() -> Self {
        Self {
            k_neighbors: 5,
            target_ratio: 1.0,
            seed: 0,
        }
    }
}

impl SmoteConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_neighbors == 0 {
            return Err(config("k_neighbors must be at least 1"));
        }
        if !(self.target_ratio > 0.0 && self.target_ratio <= 1.0) {
            return Err(config("target_ratio must lie in (0, 1]"));
        }
        Ok(())
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// The `k` rows of `minority` nearest to row `query` (itself excluded) under
/// Euclidean distance, closest first; ties go to the lower row index.
pub fn knn_minority(minority: &Matrix, query: usize, k: usize) -> Result<Vec<usize>> {
    let n = minority.n_rows();
    if query >= n {
        return Err(contract(format!(
            "query row {query} out of range for {n} rows"
        )));
    }
    if k == 0 || k >= n {
        return Err(contract(format!("k = {k} must lie in [1, {}]", n - 1)));
    }
    let q = minority.row(query);
    let mut cand: Vec<(f64, usize)> = (0..n)
        .filter(|&i| i != query)
        .map(|i| (sq_dist(q, minority.row(i)), i))
        .collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < cand.len() {
        cand.select_nth_unstable_by(k - 1, cmp);
        cand.truncate(k);
    }
    cand.sort_unstable_by(cmp);
    Ok(cand.into_iter().map(|(_, i)| i).collect())
}

/// `base + lambda * (neighbor - base)`, clamped onto the closed segment.
pub fn interpolate(base: &[f64], neighbor: &[f64], lambda: f64, out: &mut Vec<f64>) {
    out.clear();
    out.extend(base.iter().zip(neighbor).map(|(&x, &y)| {
        let v = x + lambda * (y - x);
        v.clamp(x.min(y), x.max(y))
    }));
}

/// Appends synthetic positives to `train` until the positive count reaches
/// `round(target_ratio * n_neg)`. Original rows are kept unchanged and in
/// order; synthetic rows follow them.
///
/// Base rows are taken round-robin over the positives; the neighbor and the
/// interpolation weight for synthetic row `j` come from a generator seeded by
/// `(seed, j)`, so the output does not depend on the thread count.
pub fn smote(train: &Dataset, cfg: &SmoteConfig) -> Result<Dataset> {
    cfg.validate()?;
    if train.n_pos() < 2 {
        return Err(Error::Unsatisfiable(format!(
            "SMOTE needs at least 2 positive rows to interpolate, found {}",
            train.n_pos()
        )));
    }
    if train.n_pos() > train.n_neg() {
        return Err(contract(format!(
            "positive class ({}) outnumbers negative class ({}); minority must be class 1",
            train.n_pos(),
            train.n_neg()
        )));
    }
    let target = (cfg.target_ratio * train.n_neg() as f64).round() as usize;
    let n_synth = target.saturating_sub(train.n_pos());
    if n_synth == 0 {
        return Ok(train.clone());
    }

    let pos_idx: Vec<usize> = (0..train.n_rows())
        .filter(|&i| train.labels()[i] == 1)
        .collect();
    let minority = train.features().select_rows(&pos_idx);
    let k = cfg.k_neighbors.min(pos_idx.len() - 1);
    let neighbors: Vec<Vec<usize>> = (0..minority.n_rows())
        .into_par_iter()
        .map(|q| knn_minority(&minority, q, k))
        .collect::<Result<_>>()?;

    let width = train.n_features();
    let synthetic: Vec<f64> = (0..n_synth)
        .into_par_iter()
        .map_init(Vec::new, |buf, j| {
            let base = j % minority.n_rows();
            let mut rng = rng_for(cfg.seed, j as u64);
            let nn = neighbors[base][rng.random_range(0..k)];
            let lambda: f64 = rng.random();
            interpolate(minority.row(base), minority.row(nn), lambda, buf);
            buf.clone()
        })
        .flatten_iter()
        .collect();

    let mut data = Vec::with_capacity((train.n_rows() + n_synth) * width);
    data.extend_from_slice(train.features().as_slice());
    data.extend_from_slice(&synthetic);
    let mut labels = train.labels().to_vec();
    labels.resize(train.n_rows() + n_synth, 1);
    Dataset::new(Matrix::new(data, width)?, labels)
}
