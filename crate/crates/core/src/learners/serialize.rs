//! JSON model documents. Trees are stored as flat pre-order node lists so
//! deep trees never hit the parser's recursion limit.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{EnsembleModel, ModelKind, TrainParams, TreeNode};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum NodeRecord {
    Split { feature: usize, threshold: f64 },
    Leaf { value: f64, n_samples: usize },
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    format_version: u32,
    kind: ModelKind,
    n_features: usize,
    params: TrainParams,
    base_score: f64,
    threshold: f64,
    trees: Vec<Vec<NodeRecord>>,
    tree_weights: Vec<f64>,
}

fn flatten(node: &TreeNode, out: &mut Vec<NodeRecord>) {
    match node {
        TreeNode::Leaf { value, n_samples } => out.push(NodeRecord::Leaf {
            value: *value,
            n_samples: *n_samples,
        }),
        TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            out.push(NodeRecord::Split {
                feature: *feature,
                threshold: *threshold,
            });
            flatten(left, out);
            flatten(right, out);
        }
    }
}

fn unflatten(records: &[NodeRecord], pos: &mut usize) -> Result<TreeNode> {
    let Some(rec) = records.get(*pos) else {
        return Err(Error::Model("tree node list ends inside a subtree".into()));
    };
    *pos += 1;
    Ok(match *rec {
        NodeRecord::Leaf { value, n_samples } => TreeNode::Leaf { value, n_samples },
        NodeRecord::Split { feature, threshold } => {
            let left = unflatten(records, pos)?;
            let right = unflatten(records, pos)?;
            TreeNode::Split {
                feature,
                threshold,
                left: Box::new(left),
                right: Box::new(right),
            }
        }
    })
}

pub fn serialize_model<W: Write>(model: &EnsembleModel, w: W) -> Result<()> {
    let doc = ModelDoc {
        format_version: FORMAT_VERSION,
        kind: model.kind,
        n_features: model.n_features,
        params: model.params,
        base_score: model.base_score,
        threshold: model.threshold,
        trees: model
            .trees
            .iter()
            .map(|t| {
                let mut v = Vec::new();
                flatten(t, &mut v);
                v
            })
            .collect(),
        tree_weights: model.tree_weights.clone(),
    };
    serde_json::to_writer(w, &doc)?;
    Ok(())
}

pub fn deserialize_model<R: Read>(r: R) -> Result<EnsembleModel> {
    let doc: ModelDoc = serde_json::from_reader(r)
        .map_err(|e| Error::Model(format!("malformed model document: {e}")))?;
    if doc.format_version != FORMAT_VERSION {
        return Err(Error::Model(format!(
            "model format version {} is not supported (expected {FORMAT_VERSION})",
            doc.format_version
        )));
    }
    if doc.trees.len() != doc.tree_weights.len() {
        return Err(Error::Model(format!(
            "{} trees but {} tree weights",
            doc.trees.len(),
            doc.tree_weights.len()
        )));
    }
    let mut trees = Vec::with_capacity(doc.trees.len());
    for (i, recs) in doc.trees.iter().enumerate() {
        let mut pos = 0;
        let t = unflatten(recs, &mut pos).map_err(|e| Error::Model(format!("tree {i}: {e}")))?;
        if pos != recs.len() {
            return Err(Error::Model(format!(
                "tree {i}: {} trailing nodes",
                recs.len() - pos
            )));
        }
        if let Some(f) = t.max_feature() {
            if f >= doc.n_features {
                return Err(Error::Model(format!(
                    "tree {i} splits on feature {f} but the model has {} features",
                    doc.n_features
                )));
            }
        }
        trees.push(t);
    }
    if doc.kind == ModelKind::AdaBoost
        && doc
            .tree_weights
            .iter()
            .any(|a| !(a.is_finite() && *a > 0.0))
    {
        return Err(Error::Model(
            "AdaBoost weights must be finite and positive".into(),
        ));
    }
    Ok(EnsembleModel {
        kind: doc.kind,
        n_features: doc.n_features,
        trees,
        tree_weights: doc.tree_weights,
        base_score: doc.base_score,
        threshold: doc.threshold,
        params: doc.params,
    })
}
