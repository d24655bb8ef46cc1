//! Decision-tree ensembles: node storage, structural validation, prediction
//! and root-to-leaf path enumeration.
//!
//! Trees are stored as flat node arrays with node 0 as the root. A split
//! sends a row to its left child when its predicate holds. The predicate is
//! `value < threshold` for [`Comparison::Lt`] (the canonical convention) and
//! `value <= threshold` for [`Comparison::Le`] (what LightGBM dumps use).

mod canonical;
mod lightgbm;

pub use canonical::{load_canonical, parse_canonical, save_canonical, to_canonical_string};
pub use lightgbm::{load_lightgbm_text, parse_lightgbm_text};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Relative tolerance for `cover(left) + cover(right) == cover(parent)`.
pub const COVER_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Comparison {
    #[default]
    Lt,
    Le,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        cmp: Comparison,
        left: usize,
        right: usize,
        cover: Option<f64>,
    },
    Leaf {
        weight: f64,
        cover: Option<f64>,
    },
}

impl Node {
    pub fn cover(&self) -> Option<f64> {
        match self {
            Node::Split { cover, .. } | Node::Leaf { cover, .. } => *cover,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Node::Leaf { .. })
    }
}

/// Evaluate a split predicate. `true` means the row goes left.
#[inline]
pub fn split_holds(value: f64, threshold: f64, cmp: Comparison) -> bool {
    match cmp {
        Comparison::Lt => value < threshold,
        Comparison::Le => value <= threshold,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<Node>,
    max_path_depth: usize,
    max_unique_features: usize,
}

impl DecisionTree {
    /// Build a tree from a flat node array, node 0 being the root.
    pub fn new(nodes: Vec<Node>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Validation("tree has no nodes".into()));
        }
        let n = nodes.len();
        let mut parent: Vec<Option<usize>> = vec![None; n];
        for (id, node) in nodes.iter().enumerate() {
            match node {
                Node::Split {
                    threshold,
                    left,
                    right,
                    cover,
                    ..
                } => {
                    if !threshold.is_finite() {
                        return Err(Error::Validation(format!(
                            "node {id}: threshold {threshold} is not finite"
                        )));
                    }
                    for &child in [left, right] {
                        if child >= n {
                            return Err(Error::Validation(format!(
                                "node {id}: dangling child reference {child}"
                            )));
                        }
                        if child == 0 {
                            return Err(Error::Validation(format!(
                                "node {id}: the root cannot be a child"
                            )));
                        }
                        if let Some(p) = parent[child] {
                            return Err(Error::Validation(format!(
                                "node {child} has two parents ({p} and {id})"
                            )));
                        }
                        parent[child] = Some(id);
                    }
                    check_cover(id, *cover)?;
                }
                Node::Leaf { weight, cover } => {
                    if !weight.is_finite() {
                        return Err(Error::Validation(format!(
                            "node {id}: leaf weight {weight} is not finite"
                        )));
                    }
                    check_cover(id, *cover)?;
                }
            }
        }

        // Every node has at most one parent and the root none, so a walk from
        // the root that touches all nodes proves the array is one proper tree.
        let mut seen = vec![false; n];
        let mut stack = vec![(0usize, 0usize, Vec::<usize>::new())];
        let mut max_depth = 0;
        let mut max_unique = 0;
        let mut reached = 0;
        while let Some((id, depth, feats)) = stack.pop() {
            if seen[id] {
                return Err(Error::Validation(format!("node {id} is reachable twice")));
            }
            seen[id] = true;
            reached += 1;
            match &nodes[id] {
                Node::Leaf { .. } => {
                    max_depth = max_depth.max(depth);
                    max_unique = max_unique.max(feats.len());
                }
                Node::Split {
                    feature,
                    left,
                    right,
                    cover,
                    ..
                } => {
                    if let (Some(c), Some(cl), Some(cr)) =
                        (*cover, nodes[*left].cover(), nodes[*right].cover())
                    {
                        let scale = c.abs().max(f64::MIN_POSITIVE);
                        if (cl + cr - c).abs() > COVER_TOLERANCE * scale
                            || cl > c * (1.0 + COVER_TOLERANCE)
                            || cr > c * (1.0 + COVER_TOLERANCE)
                        {
                            return Err(Error::Validation(format!(
                                "node {id}: child covers {cl} + {cr} do not add up to {c}"
                            )));
                        }
                    }
                    let mut child_feats = feats;
                    if !child_feats.contains(feature) {
                        child_feats.push(*feature);
                    }
                    stack.push((*right, depth + 1, child_feats.clone()));
                    stack.push((*left, depth + 1, child_feats));
                }
            }
        }
        if reached != n {
            return Err(Error::Validation(format!(
                "{} of {n} nodes are unreachable from the root",
                n - reached
            )));
        }

        Ok(Self {
            nodes,
            max_path_depth: max_depth,
            max_unique_features: max_unique,
        })
    }

    /// A tree made of a single leaf.
    pub fn constant(weight: f64) -> Result<Self> {
        Self::new(vec![Node::Leaf {
            weight,
            cover: None,
        }])
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &Node {
        &self.nodes[id]
    }

    /// Number of splits on the longest root-to-leaf path.
    pub fn max_path_depth(&self) -> usize {
        self.max_path_depth
    }

    /// Largest number of distinct features on any root-to-leaf path.
    pub fn max_unique_features(&self) -> usize {
        self.max_unique_features
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    pub fn has_covers(&self) -> bool {
        self.nodes.iter().all(|n| n.cover().is_some())
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Leaf { weight, .. } => return *weight,
                Node::Split {
                    feature,
                    threshold,
                    cmp,
                    left,
                    right,
                    ..
                } => {
                    id = if split_holds(row[*feature], *threshold, *cmp) {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    /// Leaf reached by `row`.
    pub fn leaf_of(&self, row: &[f64]) -> usize {
        let mut id = 0;
        while let Node::Split {
            feature,
            threshold,
            cmp,
            left,
            right,
            ..
        } = &self.nodes[id]
        {
            id = if split_holds(row[*feature], *threshold, *cmp) {
                *left
            } else {
                *right
            };
        }
        id
    }

    /// Features used by at least one split.
    pub fn used_features(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Split { feature, .. } => Some(*feature),
            Node::Leaf { .. } => None,
        })
    }

    pub fn root_to_leaf_paths(&self) -> RootToLeafPaths<'_> {
        RootToLeafPaths {
            tree: self,
            stack: vec![(0, Vec::new())],
        }
    }
}

fn check_cover(id: usize, cover: Option<f64>) -> Result<()> {
    match cover {
        Some(c) if !c.is_finite() || c < 0.0 => Err(Error::Validation(format!(
            "node {id}: cover {c} must be a finite non-negative number"
        ))),
        _ => Ok(()),
    }
}

/// A leaf together with the internal nodes leading to it, root first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeafPath {
    pub leaf: usize,
    pub nodes: Vec<usize>,
}

/// Depth-first, left-before-right enumeration of root-to-leaf paths.
pub struct RootToLeafPaths<'a> {
    tree: &'a DecisionTree,
    stack: Vec<(usize, Vec<usize>)>,
}

impl Iterator for RootToLeafPaths<'_> {
    type Item = LeafPath;

    fn next(&mut self) -> Option<LeafPath> {
        while let Some((id, path)) = self.stack.pop() {
            match self.tree.node(id) {
                Node::Leaf { .. } => {
                    return Some(LeafPath {
                        leaf: id,
                        nodes: path,
                    })
                }
                Node::Split { left, right, .. } => {
                    let mut child_path = path;
                    child_path.push(id);
                    self.stack.push((*right, child_path.clone()));
                    self.stack.push((*left, child_path));
                }
            }
        }
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleModel {
    trees: Vec<DecisionTree>,
    n_features: usize,
    base_score: f64,
    feature_names: Option<Vec<String>>,
}

impl EnsembleModel {
    pub fn new(
        trees: Vec<DecisionTree>,
        n_features: usize,
        base_score: f64,
        feature_names: Option<Vec<String>>,
    ) -> Result<Self> {
        if !base_score.is_finite() {
            return Err(Error::Validation(format!(
                "base_score {base_score} is not finite"
            )));
        }
        if let Some(names) = &feature_names {
            if names.len() != n_features {
                return Err(Error::Validation(format!(
                    "{} feature names for {n_features} features",
                    names.len()
                )));
            }
        }
        for tree in &trees {
            if let Some(feature) = tree.used_features().find(|&f| f >= n_features) {
                return Err(Error::FeatureIndex {
                    feature,
                    n_features,
                });
            }
        }
        Ok(Self {
            trees,
            n_features,
            base_score,
            feature_names,
        })
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn base_score(&self) -> f64 {
        self.base_score
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    /// Longest path over all trees, counted in splits.
    pub fn max_path_depth(&self) -> usize {
        self.trees
            .iter()
            .map(|t| t.max_path_depth())
            .max()
            .unwrap_or(0)
    }

    pub fn max_unique_features(&self) -> usize {
        self.trees
            .iter()
            .map(|t| t.max_unique_features())
            .max()
            .unwrap_or(0)
    }

    /// Sorted list of features used anywhere in the ensemble.
    pub fn active_features(&self) -> Vec<usize> {
        let mut used = vec![false; self.n_features];
        for tree in &self.trees {
            for f in tree.used_features() {
                used[f] = true;
            }
        }
        (0..self.n_features).filter(|&f| used[f]).collect()
    }

    /// Prediction for one row. The row is not checked for NaN.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.trees
            .iter()
            .fold(self.base_score, |acc, t| acc + t.predict_row(row))
    }

    pub fn predict(&self, rows: &Dataset) -> Result<Vec<f64>> {
        self.check_dataset(rows)?;
        let mut row = vec![0.0; self.n_features];
        Ok((0..rows.n_rows())
            .map(|i| {
                rows.read_row(i, &mut row);
                self.predict_row(&row)
            })
            .collect())
    }

    /// Shape and NaN check for a dataset about to be fed to this model.
    pub fn check_dataset(&self, rows: &Dataset) -> Result<()> {
        if rows.n_features() != self.n_features {
            return Err(Error::Invalid(format!(
                "dataset has {} columns, model expects {}",
                rows.n_features(),
                self.n_features
            )));
        }
        rows.check_finite()
    }
}
