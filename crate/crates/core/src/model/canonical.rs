//! Canonical JSON model format.
//!
//! ```json
//! {
//!   "n_features": 2,
//!   "base_score": 0.0,
//!   "feature_names": ["age", "sugar"],
//!   "trees": [[
//!     {"kind": "split", "feature": 0, "threshold": 0.5, "cmp": "lt", "left": 1, "right": 2, "cover": 10},
//!     {"kind": "leaf", "weight": 1.0, "cover": 4},
//!     {"kind": "leaf", "weight": 2.0, "cover": 6}
//!   ]]
//! }
//! ```
//!
//! Each tree is a flat node array, node 0 is the root and `left`/`right` are
//! indices into the same array. `cmp` is `"lt"` (go left iff `value < threshold`,
//! the default) or `"le"` (go left iff `value <= threshold`). Covers and
//! feature names are optional.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Comparison, DecisionTree, EnsembleModel, Node};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    n_features: usize,
    base_score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    feature_names: Option<Vec<String>>,
    trees: Vec<Vec<NodeDoc>>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum NodeDoc {
    Split {
        feature: usize,
        threshold: f64,
        #[serde(default)]
        cmp: CmpDoc,
        left: usize,
        right: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cover: Option<f64>,
    },
    Leaf {
        weight: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cover: Option<f64>,
    },
}

#[derive(Serialize, Deserialize, Default, Clone, Copy)]
#[serde(rename_all = "lowercase")]
enum CmpDoc {
    #[default]
    Lt,
    Le,
}

impl From<CmpDoc> for Comparison {
    fn from(c: CmpDoc) -> Self {
        match c {
            CmpDoc::Lt => Comparison::Lt,
            CmpDoc::Le => Comparison::Le,
        }
    }
}

impl From<Comparison> for CmpDoc {
    fn from(c: Comparison) -> Self {
        match c {
            Comparison::Lt => CmpDoc::Lt,
            Comparison::Le => CmpDoc::Le,
        }
    }
}

pub fn load_canonical(path: impl AsRef<Path>) -> Result<EnsembleModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_canonical(&text)
}

pub fn parse_canonical(text: &str) -> Result<EnsembleModel> {
    let doc: ModelDoc = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let trees = doc
        .trees
        .into_iter()
        .enumerate()
        .map(|(t, nodes)| {
            let nodes = nodes
                .into_iter()
                .map(|n| match n {
                    NodeDoc::Split {
                        feature,
                        threshold,
                        cmp,
                        left,
                        right,
                        cover,
                    } => Node::Split {
                        feature,
                        threshold,
                        cmp: cmp.into(),
                        left,
                        right,
                        cover,
                    },
                    NodeDoc::Leaf { weight, cover } => Node::Leaf { weight, cover },
                })
                .collect();
            DecisionTree::new(nodes).map_err(|e| match e {
                Error::Validation(msg) => Error::Validation(format!("tree {t}: {msg}")),
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    EnsembleModel::new(trees, doc.n_features, doc.base_score, doc.feature_names)
}

pub fn to_canonical_string(model: &EnsembleModel) -> String {
    let doc = ModelDoc {
        n_features: model.n_features(),
        base_score: model.base_score(),
        feature_names: model.feature_names().map(<[String]>::to_vec),
        trees: model
            .trees()
            .iter()
            .map(|t| {
                t.nodes()
                    .iter()
                    .map(|n| match n {
                        Node::Split {
                            feature,
                            threshold,
                            cmp,
                            left,
                            right,
                            cover,
                        } => NodeDoc::Split {
                            feature: *feature,
                            threshold: *threshold,
                            cmp: (*cmp).into(),
                            left: *left,
                            right: *right,
                            cover: *cover,
                        },
                        Node::Leaf { weight, cover } => NodeDoc::Leaf {
                            weight: *weight,
                            cover: *cover,
                        },
                    })
                    .collect()
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("model documents always serialize")
}

pub fn save_canonical(model: &EnsembleModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_canonical_string(model)).map_err(|e| Error::io(path, e))
}
