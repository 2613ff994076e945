//! Fixtures and reference implementations shared by the integration tests.
#![allow(dead_code)]

use pnd_core::learners::objective::sigmoid;
use pnd_core::learners::TreeNode;
use pnd_core::rng::rng_for;
use pnd_core::{Dataset, Matrix};
use rand::Rng;

/// Little-endian dump of every feature bit pattern followed by the labels.
pub fn dataset_bytes(d: &Dataset) -> Vec<u8> {
    let mut out = Vec::with_capacity(d.features().as_slice().len() * 8 + d.n_rows());
    for v in d.features().as_slice() {
        out.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    out.extend_from_slice(d.labels());
    out
}

/// Random classification data with a noisy linear signal. With `grid` set,
/// values are multiples of 0.25 in [-5, 5] so ties are common and midpoints
/// are exact.
pub fn random_dataset(seed: u64, n: usize, p: usize, grid: bool) -> Dataset {
    let mut rng = rng_for(seed, 7);
    let w: Vec<f64> = (0..p).map(|_| rng.random_range(-2.0..2.0)).collect();
    let mut data = Vec::with_capacity(n * p);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..p)
            .map(|_| {
                if grid {
                    f64::from(rng.random_range(-20i32..=20)) / 4.0
                } else {
                    rng.random_range(-5.0..5.0)
                }
            })
            .collect();
        let s: f64 = row.iter().zip(&w).map(|(x, w)| x * w).sum();
        labels.push(u8::from(rng.random::<f64>() < sigmoid(s)));
        data.extend(row);
    }
    // both classes are needed by every trainer
    labels[0] = 0;
    labels[n - 1] = 1;
    Dataset::new(Matrix::new(data, p).unwrap(), labels).unwrap()
}

/// `n_pos` positives and `n_neg` negatives with nine continuous features;
/// positives are shifted so the classes overlap only partly.
pub fn imbalanced(seed: u64, n_pos: usize, n_neg: usize) -> Dataset {
    let mut rng = rng_for(seed, 11);
    let mut data = Vec::with_capacity((n_pos + n_neg) * 9);
    let mut labels = Vec::with_capacity(n_pos + n_neg);
    let stride = ((n_pos + n_neg) / n_pos.max(1)).max(1);
    for i in 0..n_pos + n_neg {
        let pos = i % stride == 0 && i / stride < n_pos;
        for f in 0..9 {
            let shift = if pos { 1.0 + f as f64 * 0.1 } else { 0.0 };
            data.push(rng.random::<f64>() * 2.0 + shift);
        }
        labels.push(u8::from(pos));
    }
    Dataset::new(Matrix::new(data, 9).unwrap(), labels).unwrap()
}

/// Exhaustive Gini tree: every feature, every midpoint between consecutive
/// distinct values, impurity recomputed from raw counts. Among candidates
/// within a relative 1e-9 of the best gain the lowest feature, then the
/// lowest threshold, wins.
pub fn oracle_cart(
    d: &Dataset,
    rows: &[usize],
    depth: usize,
    max_depth: usize,
    min_leaf: usize,
) -> TreeNode {
    let y = d.labels();
    let n = rows.len();
    let pos = rows.iter().filter(|&&r| y[r] == 1).count();
    let leaf = TreeNode::leaf(pos as f64 / n as f64, n);
    if depth >= max_depth || n < 2 * min_leaf || pos == 0 || pos == n {
        return leaf;
    }
    let impurity = |rs: &[usize]| -> f64 {
        let m = rs.len() as f64;
        let p = rs.iter().filter(|&&r| y[r] == 1).count() as f64 / m;
        m * (1.0 - p * p - (1.0 - p) * (1.0 - p))
    };
    let parent = impurity(rows);
    let mut cands: Vec<(usize, f64, f64)> = Vec::new();
    for f in 0..d.n_features() {
        let mut vals: Vec<f64> = rows.iter().map(|&r| d.features().get(r, f)).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let (l, r): (Vec<usize>, Vec<usize>) =
                rows.iter().partition(|&&i| d.features().get(i, f) <= t);
            if l.len() < min_leaf || r.len() < min_leaf {
                continue;
            }
            cands.push((f, t, parent - impurity(&l) - impurity(&r)));
        }
    }
    let best = cands.iter().map(|c| c.2).fold(f64::NEG_INFINITY, f64::max);
    if !(best > 1e-9) {
        return leaf;
    }
    let &(f, t, _) = cands
        .iter()
        .find(|c| c.2 >= best - 1e-9 * best)
        .expect("best candidate exists");
    let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| d.features().get(i, f) <= t);
    TreeNode::Split {
        feature: f,
        threshold: t,
        left: Box::new(oracle_cart(d, &l, depth + 1, max_depth, min_leaf)),
        right: Box::new(oracle_cart(d, &r, depth + 1, max_depth, min_leaf)),
    }
}
