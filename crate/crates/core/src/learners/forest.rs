use rand::Rng;
use rayon::prelude::*;

use super::exact::{ExactBuilder, Gini, GrowParams};
use super::{EnsembleModel, ModelKind, TrainParams, TreeNode};
use crate::dataset::Dataset;
use crate::error::{contract, Result};
use crate::rng::rng_for;

/// Bagged Gini trees. Tree `t` draws its bootstrap sample and its per-node
/// feature subsets from a generator seeded by `(seed, t)`, so trees can be
/// grown in any order on any number of threads.
pub fn train_random_forest(data: &Dataset, params: &TrainParams) -> Result<EnsembleModel> {
    params.validate(ModelKind::RandomForest)?;
    if data.is_empty() {
        return Err(contract("training data is empty"));
    }
    if params.n_trees == 0 {
        return Err(contract("n_trees must be at least 1"));
    }
    let n = data.n_rows();
    let p = data.n_features();
    if !data.has_both_classes() {
        log::warn!("forest training data has a single class; the model is constant");
        let value = if data.n_pos() > 0 { 1.0 } else { 0.0 };
        return Ok(EnsembleModel {
            kind: ModelKind::RandomForest,
            n_features: p,
            trees: vec![TreeNode::leaf(value, n)],
            tree_weights: vec![1.0],
            base_score: 0.0,
            threshold: 0.5,
            params: *params,
        });
    }

    let columns = data.features().columns();
    let crit = Gini {
        labels: data.labels(),
        weights: None,
    };
    let grow = GrowParams {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
        max_features: Some(params.feature_subsample.count(p)),
    };
    let trees: Vec<TreeNode> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_for(params.seed, t as u64);
            let rows: Vec<usize> = if params.bootstrap {
                let mut r: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                r.sort_unstable();
                r
            } else {
                (0..n).collect()
            };
            ExactBuilder::new(&columns, &crit, &grow, Some(&mut rng)).build(rows)
        })
        .collect();
    let w = 1.0 / trees.len() as f64;
    Ok(EnsembleModel {
        kind: ModelKind::RandomForest,
        n_features: p,
        tree_weights: vec![w; trees.len()],
        trees,
        base_score: 0.0,
        threshold: 0.5,
        params: *params,
    })
}
