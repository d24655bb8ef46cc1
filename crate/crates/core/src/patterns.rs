//! Decision patterns and unique-feature decision patterns (UFDPs).
//!
//! For a leaf whose path has `k` distinct features `f_1..f_k` (in order of
//! first appearance), a row's UFDP is a `k`-bit integer whose bit for `f_i`
//! is set iff every split on `f_i` along the path sends the row towards the
//! leaf. `f_1` occupies the most significant bit, bit `k - 1 - i` in general.

use std::collections::{BTreeMap, VecDeque};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{split_holds, DecisionTree, LeafPath, Node};

/// Patterns are stored as machine integers, one per row.
pub type Pattern = u32;

/// Default limit on distinct features per path (f-vectors of 2^26 entries).
pub const DEFAULT_DEPTH_CAP: usize = 26;

/// Hard upper bound imposed by the pattern width.
pub const MAX_DEPTH_CAP: usize = 31;

pub const DEFAULT_CHUNK_ROWS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Background,
    PathDependent,
}

/// Distribution over background UFDPs at one leaf.
#[derive(Debug, Clone, PartialEq)]
pub struct FVector {
    pub values: Vec<f64>,
    pub mode: Mode,
}

impl FVector {
    pub fn k(&self) -> usize {
        self.values.len().trailing_zeros() as usize
    }
}

pub(crate) fn check_cap(cap: usize) -> Result<()> {
    if cap == 0 || cap > MAX_DEPTH_CAP {
        return Err(Error::Invalid(format!(
            "depth cap must be in 1..={MAX_DEPTH_CAP}, got {cap}"
        )));
    }
    Ok(())
}

/// One leaf as produced by [`UfdpGenerator::next_leaf`].
#[derive(Debug)]
pub struct LeafPatterns<'g> {
    pub leaf: usize,
    /// Distinct path features in order of first appearance.
    pub features: &'g [usize],
    /// One UFDP per row.
    pub patterns: &'g [Pattern],
}

#[derive(Debug)]
struct Frame {
    node: usize,
    unique_len: usize,
    patterns: Vec<Pattern>,
    left_done: bool,
    yielded: bool,
}

/// Streams UFDPs leaf by leaf in depth-first, left-first order.
///
/// Only the frames on the current root-to-node path are alive: a node's
/// patterns are turned into its right child's in place once the left subtree
/// has been consumed, so at most `depth + 1` pattern vectors exist at once.
#[derive(Debug)]
pub struct UfdpGenerator<'a> {
    tree: &'a DecisionTree,
    rows: &'a Dataset,
    chunk_rows: usize,
    stack: Vec<Frame>,
    features: Vec<usize>,
    peak_live: usize,
}

impl<'a> UfdpGenerator<'a> {
    pub fn new(tree: &'a DecisionTree, rows: &'a Dataset, cap: usize) -> Result<Self> {
        Self::with_chunk_rows(tree, rows, cap, DEFAULT_CHUNK_ROWS)
    }

    pub fn with_chunk_rows(
        tree: &'a DecisionTree,
        rows: &'a Dataset,
        cap: usize,
        chunk_rows: usize,
    ) -> Result<Self> {
        check_cap(cap)?;
        if tree.max_unique_features() > cap {
            return Err(Error::DepthCap {
                unique: tree.max_unique_features(),
                cap,
            });
        }
        Ok(Self {
            tree,
            rows,
            chunk_rows: chunk_rows.max(1),
            stack: vec![Frame {
                node: 0,
                unique_len: 0,
                patterns: vec![0; rows.n_rows()],
                left_done: false,
                yielded: false,
            }],
            features: Vec::new(),
            peak_live: 1,
        })
    }

    /// Number of per-node pattern vectors currently held.
    pub fn live_vectors(&self) -> usize {
        self.stack.len()
    }

    /// Largest value [`live_vectors`](Self::live_vectors) has reached.
    pub fn peak_live_vectors(&self) -> usize {
        self.peak_live
    }

    pub fn next_leaf(&mut self) -> Option<LeafPatterns<'_>> {
        loop {
            let top = self.stack.last_mut()?;
            self.features.truncate(top.unique_len);
            match self.tree.node(top.node) {
                Node::Leaf { .. } => {
                    if top.yielded {
                        self.stack.pop();
                        continue;
                    }
                    top.yielded = true;
                    let top = self.stack.last().expect("frame just inspected");
                    return Some(LeafPatterns {
                        leaf: top.node,
                        features: &self.features,
                        patterns: &top.patterns,
                    });
                }
                &Node::Split {
                    feature,
                    threshold,
                    cmp,
                    left,
                    right,
                    ..
                } => {
                    let column = self.rows.column(feature);
                    let existing = self.features.iter().position(|&f| f == feature);
                    let child_len = top.unique_len + usize::from(existing.is_none());
                    let update = PatternUpdate::new(existing, top.unique_len);
                    if !top.left_done {
                        top.left_done = true;
                        let mut child = top.patterns.clone();
                        update.apply(&mut child, column, threshold, cmp, true, self.chunk_rows);
                        self.stack.push(Frame {
                            node: left,
                            unique_len: child_len,
                            patterns: child,
                            left_done: false,
                            yielded: false,
                        });
                        self.peak_live = self.peak_live.max(self.stack.len());
                    } else {
                        update.apply(
                            &mut top.patterns,
                            column,
                            threshold,
                            cmp,
                            false,
                            self.chunk_rows,
                        );
                        top.node = right;
                        top.unique_len = child_len;
                        top.left_done = false;
                    }
                    if existing.is_none() {
                        self.features.push(feature);
                    }
                }
            }
        }
    }

    /// Drain the generator, copying every leaf's patterns.
    pub fn collect_all(mut self) -> Vec<(usize, Vec<usize>, Vec<Pattern>)> {
        let mut out = Vec::new();
        while let Some(leaf) = self.next_leaf() {
            out.push((leaf.leaf, leaf.features.to_vec(), leaf.patterns.to_vec()));
        }
        out
    }
}

#[derive(Clone, Copy)]
enum PatternUpdate {
    /// New feature: shift left and append the outcome.
    Append,
    /// Repeated feature: AND the outcome into its existing bit.
    Merge { bit: Pattern },
}

impl PatternUpdate {
    fn new(existing: Option<usize>, unique_len: usize) -> Self {
        match existing {
            None => PatternUpdate::Append,
            Some(i) => PatternUpdate::Merge {
                bit: 1 << (unique_len - 1 - i),
            },
        }
    }

    fn apply(
        self,
        patterns: &mut [Pattern],
        column: &[f64],
        threshold: f64,
        cmp: crate::model::Comparison,
        left: bool,
        chunk_rows: usize,
    ) {
        for (pats, vals) in patterns
            .chunks_mut(chunk_rows)
            .zip(column.chunks(chunk_rows))
        {
            match self {
                PatternUpdate::Append => {
                    for (p, &v) in pats.iter_mut().zip(vals) {
                        let follows = split_holds(v, threshold, cmp) == left;
                        *p = (*p << 1) | Pattern::from(follows);
                    }
                }
                PatternUpdate::Merge { bit } => {
                    for (p, &v) in pats.iter_mut().zip(vals) {
                        if split_holds(v, threshold, cmp) != left {
                            *p &= !bit;
                        }
                    }
                }
            }
        }
    }
}

/// Plain decision patterns (one bit per path node), built breadth-first.
///
/// Kept as a reference: on trees without repeated features it must agree with
/// [`UfdpGenerator`].
pub fn calc_decision_patterns(
    tree: &DecisionTree,
    rows: &Dataset,
    cap: usize,
) -> Result<BTreeMap<usize, Vec<Pattern>>> {
    check_cap(cap)?;
    if tree.max_path_depth() > cap {
        return Err(Error::DepthCap {
            unique: tree.max_path_depth(),
            cap,
        });
    }
    let mut leaves = BTreeMap::new();
    let mut queue = VecDeque::from([(0usize, vec![0 as Pattern; rows.n_rows()])]);
    while let Some((id, pats)) = queue.pop_front() {
        match tree.node(id) {
            Node::Leaf { .. } => {
                leaves.insert(id, pats);
            }
            &Node::Split {
                feature,
                threshold,
                cmp,
                left,
                right,
                ..
            } => {
                let col = rows.column(feature);
                let (l, r): (Vec<_>, Vec<_>) = pats
                    .iter()
                    .zip(col)
                    .map(|(&p, &v)| {
                        let s = Pattern::from(split_holds(v, threshold, cmp));
                        ((p << 1) + s, (p << 1) + (1 - s))
                    })
                    .unzip();
                queue.push_back((left, l));
                queue.push_back((right, r));
            }
        }
    }
    Ok(leaves)
}

/// Normalized counts of background patterns.
pub fn background_f(patterns: &[Pattern], k: usize) -> Result<FVector> {
    if patterns.is_empty() {
        return Err(Error::EmptyBackground);
    }
    let mut values = Vec::new();
    background_f_into(patterns, k, &mut values)?;
    Ok(FVector {
        values,
        mode: Mode::Background,
    })
}

/// [`background_f`] into a reusable buffer.
pub fn background_f_into(patterns: &[Pattern], k: usize, values: &mut Vec<f64>) -> Result<()> {
    if patterns.is_empty() {
        return Err(Error::EmptyBackground);
    }
    values.clear();
    values.resize(1 << k, 0.0);
    for &p in patterns {
        values[p as usize] += 1.0;
    }
    let m = patterns.len() as f64;
    for v in values.iter_mut() {
        *v /= m;
    }
    Ok(())
}

/// Per-feature reach ratios `r_i` along a path, features in first-appearance
/// order. `r_i` multiplies `cover(child) / cover(node)` over every split on
/// feature `i`.
pub fn cover_ratios(tree: &DecisionTree, path: &LeafPath) -> Result<Vec<(usize, f64)>> {
    let mut ratios: Vec<(usize, f64)> = Vec::new();
    for (t, &id) in path.nodes.iter().enumerate() {
        let child = path.nodes.get(t + 1).copied().unwrap_or(path.leaf);
        let Node::Split { feature, .. } = *tree.node(id) else {
            return Err(Error::Invalid(format!("path node {id} is not a split")));
        };
        let parent_cover = tree
            .node(id)
            .cover()
            .ok_or(Error::MissingCover { node: id })?;
        let child_cover = tree
            .node(child)
            .cover()
            .ok_or(Error::MissingCover { node: child })?;
        if parent_cover == 0.0 {
            return Err(Error::ZeroCover { node: id });
        }
        if child_cover == 0.0 {
            return Err(Error::ZeroCover { node: child });
        }
        let ratio = child_cover / parent_cover;
        match ratios.iter_mut().find(|(f, _)| *f == feature) {
            Some((_, r)) => *r *= ratio,
            None => ratios.push((feature, ratio)),
        }
    }
    Ok(ratios)
}

/// Cover-based f-vector: a product of independent per-feature Bernoulli
/// factors, `r_i` for a set bit and `1 - r_i` for a clear one.
pub fn path_dependent_f(tree: &DecisionTree, path: &LeafPath) -> Result<FVector> {
    let ratios = cover_ratios(tree, path)?;
    let mut values = vec![1.0];
    for &(_, r) in &ratios {
        values = values
            .iter()
            .flat_map(|&v| [v * (1.0 - r), v * r])
            .collect();
    }
    Ok(FVector {
        values,
        mode: Mode::PathDependent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Comparison;

    fn split(feature: usize, threshold: f64, left: usize, right: usize, cover: f64) -> Node {
        Node::Split {
            feature,
            threshold,
            cmp: Comparison::Lt,
            left,
            right,
            cover: Some(cover),
        }
    }

    fn leaf(weight: f64, cover: f64) -> Node {
        Node::Leaf {
            weight,
            cover: Some(cover),
        }
    }

    /// root x0 < 10, left child x0 < 5, leaves below.
    fn repeated() -> DecisionTree {
        DecisionTree::new(vec![
            split(0, 10.0, 1, 2, 100.0),
            split(0, 5.0, 3, 4, 60.0),
            leaf(0.0, 40.0),
            leaf(1.0, 30.0),
            leaf(2.0, 30.0),
        ])
        .unwrap()
    }

    fn single(rows: &[Vec<f64>]) -> Dataset {
        Dataset::from_rows(rows, None).unwrap()
    }

    #[test]
    fn repeated_feature_merges_bits() {
        let tree = repeated();
        let rows = single(&[vec![3.0], vec![7.0], vec![12.0]]);
        let leaves = UfdpGenerator::new(&tree, &rows, 26).unwrap().collect_all();
        let order: Vec<_> = leaves.iter().map(|l| l.0).collect();
        assert_eq!(order, vec![3, 4, 2]);
        // left-left leaf: both splits true only for x0 = 3
        assert_eq!(leaves[0].1, vec![0]);
        assert_eq!(leaves[0].2, vec![1, 0, 0]);
        // left-right leaf (x0 < 10 and x0 >= 5)
        assert_eq!(leaves[1].2, vec![0, 1, 0]);
        assert_eq!(leaves[2].2, vec![0, 0, 1]);
    }

    #[test]
    fn distinct_features_msb_first() {
        let tree = DecisionTree::new(vec![
            split(0, 0.5, 1, 2, 4.0),
            split(1, 0.5, 3, 4, 2.0),
            leaf(0.0, 2.0),
            leaf(1.0, 1.0),
            leaf(2.0, 1.0),
        ])
        .unwrap();
        let rows = single(&[vec![0.2, 0.9]]);
        let leaves = UfdpGenerator::new(&tree, &rows, 26).unwrap().collect_all();
        assert_eq!(leaves[0].0, 3);
        assert_eq!(leaves[0].1, vec![0, 1]);
        assert_eq!(leaves[0].2, vec![0b10]);
        assert_eq!(leaves[1].2, vec![0b11]);
    }

    #[test]
    fn decision_patterns_base_cases() {
        let tree = DecisionTree::new(vec![
            split(0, 0.5, 1, 2, 2.0),
            leaf(1.0, 1.0),
            leaf(0.0, 1.0),
        ])
        .unwrap();
        let rows = single(&[vec![0.1]]);
        let p = calc_decision_patterns(&tree, &rows, 26).unwrap();
        assert_eq!(p[&1], vec![1]);
        assert_eq!(p[&2], vec![0]);
    }

    #[test]
    fn depth_cap_enforced() {
        let tree = repeated();
        let rows = single(&[vec![1.0]]);
        assert!(UfdpGenerator::new(&tree, &rows, 1).is_ok());
        let two = DecisionTree::new(vec![
            split(0, 0.5, 1, 2, 2.0),
            split(1, 0.5, 3, 4, 1.0),
            leaf(0.0, 1.0),
            leaf(0.0, 0.5),
            leaf(0.0, 0.5),
        ])
        .unwrap();
        assert!(matches!(
            UfdpGenerator::new(&two, &rows, 1),
            Err(Error::DepthCap { unique: 2, cap: 1 })
        ));
    }

    #[test]
    fn background_counts() {
        let f = background_f(&[3, 3, 1, 0], 2).unwrap();
        assert_eq!(f.values, vec![0.25, 0.25, 0.0, 0.5]);
        assert_eq!(background_f(&[1], 1).unwrap().values, vec![0.0, 1.0]);
        let f = background_f(&[2, 2, 2, 2], 2).unwrap();
        assert_eq!(f.values, vec![0.0, 0.0, 1.0, 0.0]);
        assert!(matches!(background_f(&[], 2), Err(Error::EmptyBackground)));
    }

    #[test]
    fn path_dependent_single_feature() {
        let tree = repeated();
        let paths: Vec<_> = tree.root_to_leaf_paths().collect();
        // 100 -> 60 -> 30, same feature twice
        let f = path_dependent_f(&tree, &paths[0]).unwrap();
        assert!((f.values[0] - 0.7).abs() < 1e-15 && (f.values[1] - 0.3).abs() < 1e-15);
        // 100 -> 40
        let f = path_dependent_f(&tree, &paths[2]).unwrap();
        assert!((f.values[0] - 0.6).abs() < 1e-15 && (f.values[1] - 0.4).abs() < 1e-15);

        let stump = DecisionTree::new(vec![
            split(0, 0.5, 1, 2, 100.0),
            leaf(0.0, 60.0),
            leaf(0.0, 40.0),
        ])
        .unwrap();
        let p = stump.root_to_leaf_paths().next().unwrap();
        let f = path_dependent_f(&stump, &p).unwrap();
        assert!((f.values[0] - 0.4).abs() < 1e-15 && (f.values[1] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn path_dependent_two_features() {
        // ratios 0.5 (feature 0) and 0.25 (feature 1)
        let tree = DecisionTree::new(vec![
            split(0, 0.5, 1, 2, 8.0),
            split(1, 0.5, 3, 4, 4.0),
            leaf(0.0, 4.0),
            leaf(1.0, 1.0),
            leaf(2.0, 3.0),
        ])
        .unwrap();
        let p = tree.root_to_leaf_paths().next().unwrap();
        let f = path_dependent_f(&tree, &p).unwrap();
        assert_eq!(f.values, vec![0.375, 0.125, 0.375, 0.125]);
    }

    #[test]
    fn path_dependent_needs_covers() {
        let tree = DecisionTree::new(vec![
            Node::Split {
                feature: 0,
                threshold: 0.5,
                cmp: Comparison::Lt,
                left: 1,
                right: 2,
                cover: None,
            },
            leaf(0.0, 1.0),
            leaf(0.0, 1.0),
        ])
        .unwrap();
        let p = tree.root_to_leaf_paths().next().unwrap();
        assert!(matches!(
            path_dependent_f(&tree, &p),
            Err(Error::MissingCover { node: 0 })
        ));
        let zero = DecisionTree::new(vec![
            split(0, 0.5, 1, 2, 0.0),
            leaf(0.0, 0.0),
            leaf(0.0, 0.0),
        ])
        .unwrap();
        let p = zero.root_to_leaf_paths().next().unwrap();
        assert!(matches!(
            path_dependent_f(&zero, &p),
            Err(Error::ZeroCover { .. })
        ));
    }
}
