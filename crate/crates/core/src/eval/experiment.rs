use std::fmt::Write as _;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{compute_metrics, confusion, format_pct, ConfusionMatrix, Metrics};
use super::split::stratified_split;
use crate::dataset::Dataset;
use crate::error::{config, Error, Result};
use crate::features::{read_feature_csv, rows_to_dataset};
use crate::learners::{train, FeatureSubsample, ModelKind, TrainParams};
use crate::resample::{smote, SmoteConfig};
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Original,
    Smote,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Original => "original",
            Variant::Smote => "smote",
        }
    }

    fn title(self) -> &'static str {
        match self {
            Variant::Original => "Original",
            Variant::Smote => "SMOTE",
        }
    }
}

/// Optional hyperparameter overrides applied on top of each kind's defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainOverrides {
    pub n_trees: Option<usize>,
    pub max_depth: Option<usize>,
    pub learning_rate: Option<f64>,
    pub lambda_reg: Option<f64>,
    pub gamma_min_gain: Option<f64>,
    pub max_leaves: Option<usize>,
    pub n_bins: Option<usize>,
    pub min_samples_leaf: Option<usize>,
    pub feature_subsample: Option<FeatureSubsample>,
}

impl TrainOverrides {
    pub fn apply(&self, kind: ModelKind, seed: u64) -> TrainParams {
        let mut p = TrainParams::for_kind(kind);
        p.seed = seed;
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { p.$f = v; } )* };
        }
        set!(
            n_trees,
            max_depth,
            learning_rate,
            lambda_reg,
            gamma_min_gain,
            max_leaves,
            n_bins,
            min_samples_leaf,
            feature_subsample
        );
        p
    }

    /// Fields set in `other` win.
    pub fn merged(&self, other: &TrainOverrides) -> TrainOverrides {
        macro_rules! pick {
            ($($f:ident),*) => { TrainOverrides { $( $f: other.$f.or(self.$f), )* } };
        }
        pick!(
            n_trees,
            max_depth,
            learning_rate,
            lambda_reg,
            gamma_min_gain,
            max_leaves,
            n_bins,
            min_samples_leaf,
            feature_subsample
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub models: Vec<ModelKind>,
    pub variants: Vec<Variant>,
    pub train_frac: f64,
    pub seed: u64,
    pub smote: SmoteConfig,
    pub train: TrainOverrides,
    /// Run cells one at a time so training times are not shared.
    pub bench: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            models: ModelKind::ALL.to_vec(),
            variants: vec![Variant::Original, Variant::Smote],
            train_frac: 0.7,
            seed: 0,
            smote: SmoteConfig::default(),
            train: TrainOverrides::default(),
            bench: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() {
            return Err(config("at least one model kind is required"));
        }
        if self.variants.is_empty() {
            return Err(config("at least one data variant is required"));
        }
        if !(self.train_frac > 0.0 && self.train_frac < 1.0) {
            return Err(config(format!(
                "train_frac must lie in (0, 1), got {}",
                self.train_frac
            )));
        }
        self.smote.validate()?;
        for &k in &self.models {
            self.train.apply(k, 0).validate(k)?;
        }
        Ok(())
    }

    pub fn split_seed(&self) -> u64 {
        derive_seed(self.seed, 0)
    }

    pub fn smote_seed(&self) -> u64 {
        derive_seed(self.seed, 1)
    }

    pub fn model_seed(&self) -> u64 {
        derive_seed(self.seed, 2)
    }
}

/// Test metrics and training time of one (model, variant) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: ModelKind,
    pub variant: Variant,
    pub confusion: ConfusionMatrix,
    pub metrics: Metrics,
    pub train_seconds: f64,
    pub seed: u64,
    pub n_train_pos: usize,
    pub n_train_neg: usize,
    pub params: TrainParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub train_pos: usize,
    pub train_neg: usize,
    pub test_pos: usize,
    pub test_neg: usize,
    pub smote_pos: Option<usize>,
    pub reports: Vec<EvalReport>,
}

pub fn run_experiment(feature_csv: &Path, cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let rows = read_feature_csv(BufReader::new(File::open(feature_csv)?))?;
    let data = rows_to_dataset(&rows)?;
    run_experiment_on(&data, cfg)
}

fn cell_err(model: &str, variant: Variant, e: Error) -> Error {
    Error::Cell {
        model: model.to_string(),
        variant: variant.as_str().to_string(),
        source: Box::new(e),
    }
}

/// Splits once, oversamples the training split once, then trains and scores
/// every (model, variant) cell against the untouched test split.
pub fn run_experiment_on(data: &Dataset, cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let (train_set, test_set) = stratified_split(data, cfg.train_frac, cfg.split_seed())?;
    let test_digest = test_set.digest();
    log::info!(
        "split: train {} pos / {} neg, test {} pos / {} neg",
        train_set.n_pos(),
        train_set.n_neg(),
        test_set.n_pos(),
        test_set.n_neg()
    );

    let resampled = if cfg.variants.contains(&Variant::Smote) {
        let sc = SmoteConfig {
            seed: cfg.smote_seed(),
            ..cfg.smote
        };
        let r = smote(&train_set, &sc).map_err(|e| cell_err("all", Variant::Smote, e))?;
        log::info!("smote: {} -> {} positives", train_set.n_pos(), r.n_pos());
        Some(r)
    } else {
        None
    };

    let cells: Vec<(ModelKind, Variant)> = cfg
        .models
        .iter()
        .flat_map(|&m| cfg.variants.iter().map(move |&v| (m, v)))
        .collect();
    let run_cell = |&(kind, variant): &(ModelKind, Variant)| -> Result<EvalReport> {
        let train_data = match variant {
            Variant::Original => &train_set,
            Variant::Smote => resampled.as_ref().expect("resampled split exists"),
        };
        let params = cfg.train.apply(kind, cfg.model_seed());
        let wrap = |e| cell_err(kind.short_name(), variant, e);
        let started = Instant::now();
        let model = train(kind, train_data, &params).map_err(wrap)?;
        let train_seconds = started.elapsed().as_secs_f64();
        let predicted = model.predict(test_set.features()).map_err(wrap)?;
        let cm = confusion(&predicted, test_set.labels()).map_err(wrap)?;
        log::info!(
            "{kind}/{}: trained in {train_seconds:.3} s",
            variant.as_str()
        );
        Ok(EvalReport {
            model: kind,
            variant,
            confusion: cm,
            metrics: compute_metrics(&cm).map_err(wrap)?,
            train_seconds,
            seed: cfg.seed,
            n_train_pos: train_data.n_pos(),
            n_train_neg: train_data.n_neg(),
            params,
        })
    };
    let reports: Vec<EvalReport> = if cfg.bench {
        cells.iter().map(run_cell).collect::<Result<_>>()?
    } else {
        cells.par_iter().map(run_cell).collect::<Result<_>>()?
    };

    if test_set.digest() != test_digest {
        return Err(Error::Contract(
            "test partition changed during the experiment".into(),
        ));
    }
    Ok(ExperimentResult {
        config: cfg.clone(),
        train_pos: train_set.n_pos(),
        train_neg: train_set.n_neg(),
        test_pos: test_set.n_pos(),
        test_neg: test_set.n_neg(),
        smote_pos: resampled.as_ref().map(Dataset::n_pos),
        reports,
    })
}

pub fn render_csv(reports: &[EvalReport]) -> String {
    let mut s = String::from("model,variant,accuracy,precision,recall,f1,train_seconds,seed\n");
    for r in reports {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{:.3},{}",
            r.model.short_name(),
            r.variant.as_str(),
            format_pct(Some(r.metrics.accuracy)),
            format_pct(r.metrics.precision),
            format_pct(r.metrics.recall),
            format_pct(r.metrics.f1),
            r.train_seconds,
            r.seed
        );
    }
    s
}

/// Aligned text table of the four metrics per (model, variant).
pub fn render_metrics_table(reports: &[EvalReport]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<10} {:<9} {:>9} {:>10} {:>9} {:>9}",
        "Model", "Data", "Accuracy", "Precision", "Recall", "F1"
    );
    for r in reports {
        let _ = writeln!(
            s,
            "{:<10} {:<9} {:>9} {:>10} {:>9} {:>9}",
            r.model.display_name(),
            r.variant.title(),
            format_pct(Some(r.metrics.accuracy)),
            format_pct(r.metrics.precision),
            format_pct(r.metrics.recall),
            format_pct(r.metrics.f1)
        );
    }
    s
}

/// Training time per model, one column per variant present.
pub fn render_timing_table(reports: &[EvalReport]) -> String {
    let mut variants: Vec<Variant> = Vec::new();
    let mut models: Vec<ModelKind> = Vec::new();
    for r in reports {
        if !variants.contains(&r.variant) {
            variants.push(r.variant);
        }
        if !models.contains(&r.model) {
            models.push(r.model);
        }
    }
    let mut s = format!("{:<10}", "Model");
    for v in &variants {
        let _ = write!(s, " {:>16}", format!("{} (s)", v.title()));
    }
    s.push('\n');
    for m in models {
        let _ = write!(s, "{:<10}", m.display_name());
        for &v in &variants {
            let cell = reports
                .iter()
                .find(|r| r.model == m && r.variant == v)
                .map_or_else(|| "—".to_string(), |r| format!("{:.3}", r.train_seconds));
            let _ = write!(s, " {cell:>16}");
        }
        s.push('\n');
    }
    s
}
