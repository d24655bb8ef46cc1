//! Seeded synthetic models and datasets for validation sweeps and benchmarks.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::data::Dataset;
use crate::model::{Comparison, DecisionTree, EnsembleModel, Node};

/// Shape of a random ensemble.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub n_features: usize,
    /// Upper bound on the features any tree of the model may split on.
    pub max_active: usize,
    pub n_trees: usize,
    pub max_depth: usize,
    /// Values and thresholds live on the integer grid `0..grid`.
    pub grid: u32,
    /// Probability that a non-root node below `max_depth` becomes a leaf.
    pub leaf_prob: f64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            n_features: 10,
            max_active: 8,
            n_trees: 3,
            max_depth: 6,
            grid: 4,
            leaf_prob: 0.2,
        }
    }
}

/// Random ensemble with covers. Features repeat along paths, both comparison
/// kinds appear, and thresholds sit on the data grid so ties are exercised.
pub fn random_model<R: Rng>(rng: &mut R, spec: &ModelSpec) -> EnsembleModel {
    let mut pool: Vec<usize> = (0..spec.n_features).collect();
    pool.shuffle(rng);
    // A small pool makes repeated features on one path likely.
    let active = rng.gen_range(1..=spec.max_active.min(spec.n_features).max(1));
    pool.truncate(active);
    let trees = (0..spec.n_trees)
        .map(|_| random_tree(rng, &pool, spec))
        .collect();
    let base_score = if rng.gen_bool(0.5) {
        rng.gen_range(-1.0..1.0)
    } else {
        0.0
    };
    EnsembleModel::new(trees, spec.n_features, base_score, None)
        .expect("generated ensembles are valid")
}

fn random_tree<R: Rng>(rng: &mut R, pool: &[usize], spec: &ModelSpec) -> DecisionTree {
    let mut nodes = Vec::new();
    let cover = rng.gen_range(50.0..500.0);
    grow(rng, pool, spec, 0, cover, &mut nodes);
    DecisionTree::new(nodes).expect("generated trees are valid")
}

fn grow<R: Rng>(
    rng: &mut R,
    pool: &[usize],
    spec: &ModelSpec,
    depth: usize,
    cover: f64,
    nodes: &mut Vec<Node>,
) -> usize {
    let id = nodes.len();
    let leaf = depth >= spec.max_depth || (depth > 0 && rng.gen_bool(spec.leaf_prob));
    if leaf {
        nodes.push(Node::Leaf {
            weight: rng.gen_range(-2.0..2.0),
            cover: Some(cover),
        });
        return id;
    }
    nodes.push(Node::Leaf {
        weight: 0.0,
        cover: None,
    });
    let feature = *pool.choose(rng).expect("pool is never empty");
    let threshold =
        f64::from(rng.gen_range(0..spec.grid)) + if rng.gen_bool(0.5) { 0.5 } else { 0.0 };
    let cmp = if rng.gen_bool(0.5) {
        Comparison::Lt
    } else {
        Comparison::Le
    };
    let left_cover = cover * rng.gen_range(0.05..0.95);
    let left = grow(rng, pool, spec, depth + 1, left_cover, nodes);
    let right = grow(rng, pool, spec, depth + 1, cover - left_cover, nodes);
    nodes[id] = Node::Split {
        feature,
        threshold,
        cmp,
        left,
        right,
        cover: Some(cover),
    };
    id
}

/// Rows with integer values in `0..grid`.
pub fn random_dataset<R: Rng>(rng: &mut R, n_rows: usize, n_features: usize, grid: u32) -> Dataset {
    let rows: Vec<Vec<f64>> = (0..n_rows)
        .map(|_| {
            (0..n_features)
                .map(|_| f64::from(rng.gen_range(0..grid)))
                .collect()
        })
        .collect();
    Dataset::from_rows(&rows, None).expect("rectangular rows")
}

/// Complete binary tree of the given depth where level `d` splits on
/// feature `d`, so every leaf sees `depth` distinct features.
pub fn complete_tree<R: Rng>(rng: &mut R, depth: usize) -> DecisionTree {
    fn build<R: Rng>(
        rng: &mut R,
        level: usize,
        depth: usize,
        cover: f64,
        nodes: &mut Vec<Node>,
    ) -> usize {
        let id = nodes.len();
        if level == depth {
            nodes.push(Node::Leaf {
                weight: rng.gen_range(-1.0..1.0),
                cover: Some(cover),
            });
            return id;
        }
        nodes.push(Node::Leaf {
            weight: 0.0,
            cover: None,
        });
        let half = cover / 2.0;
        let left = build(rng, level + 1, depth, half, nodes);
        let right = build(rng, level + 1, depth, cover - half, nodes);
        nodes[id] = Node::Split {
            feature: level,
            threshold: 0.5,
            cmp: Comparison::Lt,
            left,
            right,
            cover: Some(cover),
        };
        id
    }
    let mut nodes = Vec::with_capacity((2 << depth) - 1);
    build(rng, 0, depth, f64::from(1u32 << depth.min(30)), &mut nodes);
    DecisionTree::new(nodes).expect("complete trees are valid")
}

/// Depth-`depth` tree whose every split uses a new feature and whose left
/// children are leaves: one leaf per depth `1..=depth` plus a final pair.
/// The deepest leaves have exactly `depth` distinct features.
pub fn spine_tree<R: Rng>(rng: &mut R, depth: usize) -> DecisionTree {
    let mut nodes = Vec::with_capacity(2 * depth + 1);
    let mut cover = 1e6;
    for level in 0..depth {
        let id = nodes.len();
        let last = level + 1 == depth;
        let left_cover = cover * rng.gen_range(0.2..0.8);
        nodes.push(Node::Split {
            feature: level,
            threshold: 0.5,
            cmp: Comparison::Lt,
            left: id + 1,
            right: id + 2,
            cover: Some(cover),
        });
        nodes.push(Node::Leaf {
            weight: rng.gen_range(-1.0..1.0),
            cover: Some(left_cover),
        });
        cover -= left_cover;
        if last {
            nodes.push(Node::Leaf {
                weight: rng.gen_range(-1.0..1.0),
                cover: Some(cover),
            });
        }
    }
    if depth == 0 {
        nodes.push(Node::Leaf {
            weight: rng.gen_range(-1.0..1.0),
            cover: Some(cover),
        });
    }
    DecisionTree::new(nodes).expect("spine trees are valid")
}

/// Benchmark model: `n_trees` spine trees over the same `depth` binary
/// features, each with its own covers and leaf weights.
pub fn bench_model<R: Rng>(rng: &mut R, depth: usize, n_trees: usize) -> EnsembleModel {
    let trees = (0..n_trees.max(1))
        .map(|_| spine_tree(rng, depth))
        .collect();
    EnsembleModel::new(trees, depth.max(1), 0.0, None).expect("spine models are valid")
}
