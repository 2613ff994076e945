use super::{require_both_classes, train_cart, EnsembleModel, ModelKind, TrainParams};
use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Error floor used to cap the weight of a perfect weak learner.
pub const EPSILON_MIN: f64 = 1e-10;

/// Maps a leaf class probability to a ±1 vote.
#[inline]
pub(crate) fn vote(leaf: f64) -> f64 {
    if leaf > 0.5 {
        1.0
    } else {
        -1.0
    }
}

/// Per-round diagnostics of a discrete AdaBoost run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdaBoostTrace {
    /// Weighted training error of each accepted learner.
    pub errors: Vec<f64>,
    pub alphas: Vec<f64>,
    /// Sum of the sample weights after each round's renormalisation.
    pub weight_sums: Vec<f64>,
    /// Smallest sample weight after each round.
    pub min_weights: Vec<f64>,
}

pub fn train_adaboost(data: &Dataset, params: &TrainParams) -> Result<EnsembleModel> {
    train_adaboost_traced(data, params).map(|(m, _)| m)
}

pub fn train_adaboost_traced(
    data: &Dataset,
    params: &TrainParams,
) -> Result<(EnsembleModel, AdaBoostTrace)> {
    params.validate(ModelKind::AdaBoost)?;
    require_both_classes(data)?;
    let n = data.n_rows();
    let y: Vec<f64> = data
        .labels()
        .iter()
        .map(|&l| if l == 1 { 1.0 } else { -1.0 })
        .collect();
    let mut w = vec![1.0 / n as f64; n];
    let mut trees = Vec::new();
    let mut alphas = Vec::new();
    let mut trace = AdaBoostTrace::default();

    for round in 0..params.n_trees {
        let tree = train_cart(data, &w, params)?;
        let h: Vec<f64> = data
            .features()
            .rows()
            .map(|r| vote(tree.predict(r)))
            .collect();
        // A first learner that found no split at all means no feature
        // separates anything. A split whose leaves happen to vote alike is
        // still a usable learner: its error reweights the minority class.
        if round == 0 && tree.is_leaf() {
            return Err(Error::Training(
                "AdaBoost: the first weak learner is a single leaf; no split separates the data"
                    .into(),
            ));
        }
        let eps: f64 = (0..n).filter(|&i| h[i] != y[i]).map(|i| w[i]).sum();
        if eps >= 0.5 {
            log::debug!("AdaBoost stops at round {round}: weighted error {eps} >= 0.5");
            break;
        }
        let perfect = eps < EPSILON_MIN;
        let e = eps.max(EPSILON_MIN);
        let alpha = 0.5 * ((1.0 - e) / e).ln();
        trees.push(tree);
        alphas.push(alpha);
        trace.errors.push(eps);
        trace.alphas.push(alpha);

        for i in 0..n {
            w[i] *= (-alpha * y[i] * h[i]).exp();
        }
        let s: f64 = w.iter().sum();
        for wi in &mut w {
            *wi /= s;
        }
        trace.weight_sums.push(w.iter().sum());
        trace
            .min_weights
            .push(w.iter().copied().fold(f64::INFINITY, f64::min));
        if perfect {
            log::debug!("AdaBoost stops at round {round}: perfect weak learner");
            break;
        }
        if w.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::Training(format!(
                "AdaBoost: sample weights degenerated at round {round}"
            )));
        }
    }

    let model = EnsembleModel {
        kind: ModelKind::AdaBoost,
        n_features: data.n_features(),
        trees,
        tree_weights: alphas,
        base_score: 0.0,
        threshold: 0.5,
        params: *params,
    };
    Ok((model, trace))
}
