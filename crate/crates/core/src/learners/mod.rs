//! Tree learners and the five ensemble trainers.
//!
//! | kind            | base tree                         | combination                     |
//! |-----------------|-----------------------------------|---------------------------------|
//! | `random_forest` | Gini CART, bootstrap, sqrt features | mean leaf probability         |
//! | `adaboost`      | weighted Gini stumps              | `sigmoid(2 * sum alpha_t h_t)`  |
//! | `gbm`           | squared-error CART + Newton leaves | `sigmoid(base + sum lr * f_t)` |
//! | `xgb`           | exact second-order, presorted     | `sigmoid(base + sum lr * f_t)`  |
//! | `lgbm`          | histogram, leaf-wise              | `sigmoid(base + sum lr * f_t)`  |

mod adaboost;
mod boosting;
mod exact;
mod forest;
mod histogram;
pub mod objective;
mod presorted;
mod serialize;
mod split;
mod tree;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Matrix};
use crate::error::{config, contract, Error, Result};

pub use adaboost::{train_adaboost, train_adaboost_traced, AdaBoostTrace, EPSILON_MIN};
pub use boosting::{train_gbm, train_lgbm, train_xgb};
pub use forest::train_random_forest;
pub use histogram::BinMapper;
pub use serialize::{deserialize_model, serialize_model, FORMAT_VERSION};
pub use split::newton_leaf_weight;
pub use tree::TreeNode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    RandomForest,
    #[serde(rename = "adaboost")]
    AdaBoost,
    Gbm,
    Xgb,
    Lgbm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::RandomForest,
        ModelKind::AdaBoost,
        ModelKind::Gbm,
        ModelKind::Xgb,
        ModelKind::Lgbm,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            ModelKind::RandomForest => "rf",
            ModelKind::AdaBoost => "ada",
            ModelKind::Gbm => "gbm",
            ModelKind::Xgb => "xgb",
            ModelKind::Lgbm => "lgbm",
        }
    }

    /// Row label used in report tables.
    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::RandomForest => "RF",
            ModelKind::AdaBoost => "AdaBoost",
            ModelKind::Gbm => "GBM",
            ModelKind::Xgb => "XGBoost",
            ModelKind::Lgbm => "LightGBM",
        }
    }

    pub fn is_boosted(self) -> bool {
        matches!(self, ModelKind::Gbm | ModelKind::Xgb | ModelKind::Lgbm)
    }

    /// Parses a comma-separated list such as `rf,xgb` or `all`.
    pub fn parse_list(s: &str) -> Result<Vec<ModelKind>> {
        if s.trim() == "all" {
            return Ok(Self::ALL.to_vec());
        }
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let k: ModelKind = part.parse()?;
            if !out.contains(&k) {
                out.push(k);
            }
        }
        if out.is_empty() {
            return Err(config("no model kinds given"));
        }
        Ok(out)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "rf" | "random_forest" | "forest" => ModelKind::RandomForest,
            "ada" | "adaboost" => ModelKind::AdaBoost,
            "gbm" => ModelKind::Gbm,
            "xgb" | "xgboost" => ModelKind::Xgb,
            "lgbm" | "lightgbm" => ModelKind::Lgbm,
            other => return Err(config(format!("unknown model kind `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSubsample {
    All,
    Sqrt,
}

impl FeatureSubsample {
    pub fn count(self, n_features: usize) -> usize {
        match self {
            FeatureSubsample::All => n_features,
            FeatureSubsample::Sqrt => ((n_features as f64).sqrt().ceil() as usize).max(1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    /// L2 penalty on leaf weights (second-order kinds).
    pub lambda_reg: f64,
    /// Minimum split gain (second-order kinds).
    pub gamma_min_gain: f64,
    pub max_leaves: usize,
    pub n_bins: usize,
    pub min_samples_leaf: usize,
    pub feature_subsample: FeatureSubsample,
    /// Forest only: draw a bootstrap sample per tree.
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 6,
            learning_rate: 0.1,
            lambda_reg: 1.0,
            gamma_min_gain: 0.0,
            max_leaves: 31,
            n_bins: 255,
            min_samples_leaf: 1,
            feature_subsample: FeatureSubsample::All,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl TrainParams {
    /// Defaults for one model kind: sqrt feature sampling for the forest and
    /// depth-1 stumps for AdaBoost.
    pub fn for_kind(kind: ModelKind) -> Self {
        let mut p = Self::default();
        match kind {
            ModelKind::RandomForest => p.feature_subsample = FeatureSubsample::Sqrt,
            ModelKind::AdaBoost => p.max_depth = 1,
            _ => {}
        }
        p
    }

    pub fn validate(&self, kind: ModelKind) -> Result<()> {
        if self.max_depth == 0 {
            return Err(config("max_depth must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(config("learning_rate must lie in (0, 1]"));
        }
        if !(self.lambda_reg >= 0.0) || !self.lambda_reg.is_finite() {
            return Err(config(format!(
                "lambda_reg must be >= 0, got {}",
                self.lambda_reg
            )));
        }
        if !(self.gamma_min_gain >= 0.0) || !self.gamma_min_gain.is_finite() {
            return Err(config(format!(
                "gamma_min_gain must be >= 0, got {}",
                self.gamma_min_gain
            )));
        }
        if self.min_samples_leaf == 0 {
            return Err(config("min_samples_leaf must be at least 1"));
        }
        if kind == ModelKind::Lgbm {
            if self.max_leaves < 2 {
                return Err(config("max_leaves must be at least 2"));
            }
            if !(2..=65_536).contains(&self.n_bins) {
                return Err(config(format!(
                    "n_bins must lie in [2, 65536], got {}",
                    self.n_bins
                )));
            }
        }
        Ok(())
    }
}

/// A trained ensemble. Boosted kinds keep raw (unshrunk) leaf scores and
/// carry the learning rate in `tree_weights`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleModel {
    pub kind: ModelKind,
    pub n_features: usize,
    pub trees: Vec<TreeNode>,
    /// AdaBoost alphas, learning rates for boosted kinds, `1/n` for the forest.
    pub tree_weights: Vec<f64>,
    /// Prior log-odds for boosted kinds, 0 otherwise.
    pub base_score: f64,
    pub threshold: f64,
    pub params: TrainParams,
}

impl EnsembleModel {
    /// Additive score before the output link.
    pub fn margin(&self, row: &[f64]) -> f64 {
        match self.kind {
            ModelKind::RandomForest => self
                .trees
                .iter()
                .zip(&self.tree_weights)
                .map(|(t, w)| w * t.predict(row))
                .sum(),
            ModelKind::AdaBoost => self
                .trees
                .iter()
                .zip(&self.tree_weights)
                .map(|(t, a)| a * adaboost::vote(t.predict(row)))
                .sum(),
            _ => {
                self.base_score
                    + self
                        .trees
                        .iter()
                        .zip(&self.tree_weights)
                        .map(|(t, w)| w * t.predict(row))
                        .sum::<f64>()
            }
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let m = self.margin(row);
        match self.kind {
            ModelKind::RandomForest => m.clamp(0.0, 1.0),
            ModelKind::AdaBoost => objective::sigmoid(2.0 * m),
            _ => objective::sigmoid(m),
        }
    }

    pub fn predict_proba(&self, rows: &Matrix) -> Result<Vec<f64>> {
        if rows.n_cols() != self.n_features {
            return Err(contract(format!(
                "model expects {} feature columns, got {}",
                self.n_features,
                rows.n_cols()
            )));
        }
        Ok((0..rows.n_rows())
            .into_par_iter()
            .map(|i| self.predict_row(rows.row(i)))
            .collect())
    }

    /// Hard labels: 1 when the probability reaches `threshold`.
    pub fn predict(&self, rows: &Matrix) -> Result<Vec<u8>> {
        Ok(self
            .predict_proba(rows)?
            .into_iter()
            .map(|p| u8::from(p >= self.threshold))
            .collect())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        serialize_model(self, &mut buf)?;
        Ok(buf)
    }
}

pub(crate) fn require_both_classes(data: &Dataset) -> Result<()> {
    if data.is_empty() {
        return Err(contract("training data is empty"));
    }
    if !data.has_both_classes() {
        return Err(contract(format!(
            "training data needs both classes (n_pos = {}, n_neg = {})",
            data.n_pos(),
            data.n_neg()
        )));
    }
    Ok(())
}

/// Greedy Gini classification tree over the rows with positive weight.
pub fn train_cart(
    data: &Dataset,
    sample_weights: &[f64],
    params: &TrainParams,
) -> Result<TreeNode> {
    if data.is_empty() {
        return Err(contract("cannot grow a tree on empty data"));
    }
    if sample_weights.len() != data.n_rows() {
        return Err(contract(format!(
            "{} weights for {} rows",
            sample_weights.len(),
            data.n_rows()
        )));
    }
    if sample_weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(contract("sample weights must be finite and non-negative"));
    }
    let rows: Vec<usize> = (0..data.n_rows())
        .filter(|&i| sample_weights[i] > 0.0)
        .collect();
    if rows.is_empty() {
        return Err(contract("all sample weights are zero"));
    }
    if params.max_depth == 0 || params.min_samples_leaf == 0 {
        return Err(config("max_depth and min_samples_leaf must be at least 1"));
    }
    let columns = data.features().columns();
    let crit = exact::Gini {
        labels: data.labels(),
        weights: Some(sample_weights),
    };
    let grow = exact::GrowParams {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
        max_features: None,
    };
    Ok(exact::ExactBuilder::new(&columns, &crit, &grow, None).build(rows))
}

pub fn train(kind: ModelKind, data: &Dataset, params: &TrainParams) -> Result<EnsembleModel> {
    match kind {
        ModelKind::RandomForest => train_random_forest(data, params),
        ModelKind::AdaBoost => train_adaboost(data, params),
        ModelKind::Gbm => train_gbm(data, params),
        ModelKind::Xgb => train_xgb(data, params),
        ModelKind::Lgbm => train_lgbm(data, params),
    }
}
