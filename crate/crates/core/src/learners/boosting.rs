//! Gradient boosting on the logistic loss: first-order trees with Newton
//! leaves (`gbm`), exact second-order trees (`xgb`) and histogram leaf-wise
//! trees (`lgbm`). All three start from the prior log-odds and add trees with
//! learning-rate shrinkage.

use super::exact::{ExactBuilder, GrowParams, ResidualNewton};
use super::histogram::{BinMapper, HistogramBuilder, LeafWiseParams};
use super::objective::grad_hess;
use super::presorted::{build_presorted, presort, NewtonParams};
use super::{require_both_classes, EnsembleModel, ModelKind, TrainParams, TreeNode};
use crate::dataset::Dataset;
use crate::error::{Error, Result};

pub(crate) fn prior_log_odds(data: &Dataset) -> f64 {
    (data.n_pos() as f64 / data.n_neg() as f64).ln()
}

/// Shared boosting loop. `fit` receives `(grad, hess)` at the current scores
/// and returns the next tree in raw (unshrunk) units.
fn boost<F>(
    kind: ModelKind,
    data: &Dataset,
    params: &TrainParams,
    mut fit: F,
) -> Result<EnsembleModel>
where
    F: FnMut(&[f64], &[f64]) -> TreeNode,
{
    params.validate(kind)?;
    require_both_classes(data)?;
    let n = data.n_rows();
    let y: Vec<f64> = data.labels().iter().map(|&l| f64::from(l)).collect();
    let base = prior_log_odds(data);
    let mut scores = vec![base; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut trees = Vec::with_capacity(params.n_trees);
    let lr = params.learning_rate;

    for round in 0..params.n_trees {
        for i in 0..n {
            let (g, h) = grad_hess(scores[i], y[i]);
            grad[i] = g;
            hess[i] = h;
        }
        let tree = fit(&grad, &hess);
        for (i, row) in data.features().rows().enumerate() {
            scores[i] += lr * tree.predict(row);
        }
        if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
            return Err(Error::Training(format!(
                "{kind}: score of row {i} overflowed at round {round}"
            )));
        }
        trees.push(tree);
    }

    Ok(EnsembleModel {
        kind,
        n_features: data.n_features(),
        tree_weights: vec![lr; trees.len()],
        trees,
        base_score: base,
        threshold: 0.5,
        params: *params,
    })
}

fn newton_params(p: &TrainParams) -> NewtonParams {
    NewtonParams {
        lambda: p.lambda_reg,
        gamma: p.gamma_min_gain,
        max_depth: p.max_depth,
        min_samples_leaf: p.min_samples_leaf,
    }
}

/// Classic gradient boosting: each tree fits the residuals `y - p` by least
/// squares, then each leaf takes the Newton step `sum r / sum p(1-p)`.
/// Every node re-sorts its rows, single-threaded.
pub fn train_gbm(data: &Dataset, params: &TrainParams) -> Result<EnsembleModel> {
    let columns = data.features().columns();
    let grow = GrowParams {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
        max_features: None,
    };
    let n = data.n_rows();
    let mut residuals = vec![0.0; n];
    boost(ModelKind::Gbm, data, params, |g, h| {
        for (r, g) in residuals.iter_mut().zip(g) {
            *r = -g;
        }
        let crit = ResidualNewton {
            residuals: &residuals,
            hess: h,
        };
        ExactBuilder::new(&columns, &crit, &grow, None).build((0..n).collect())
    })
}

/// Exact second-order boosting over column blocks sorted once up front.
pub fn train_xgb(data: &Dataset, params: &TrainParams) -> Result<EnsembleModel> {
    let columns = data.features().columns();
    let sorted = presort(&columns);
    let np = newton_params(params);
    boost(ModelKind::Xgb, data, params, |g, h| {
        build_presorted(&columns, &sorted, g, h, &np)
    })
}

/// Histogram boosting with leaf-wise growth. Bin edges come from the training
/// matrix and are fitted once.
pub fn train_lgbm(data: &Dataset, params: &TrainParams) -> Result<EnsembleModel> {
    params.validate(ModelKind::Lgbm)?;
    let columns = data.features().columns();
    let mapper = BinMapper::fit(&columns, params.n_bins);
    let bins = mapper.transform(&columns);
    drop(columns);
    let lp = LeafWiseParams {
        newton: newton_params(params),
        max_leaves: params.max_leaves,
    };
    boost(ModelKind::Lgbm, data, params, |g, h| {
        HistogramBuilder {
            mapper: &mapper,
            bins: &bins,
            grad: g,
            hess: h,
            params: &lp,
        }
        .build()
    })
}
