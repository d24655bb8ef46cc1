//! Brute-force reference explanations by enumerating every coalition of the
//! model's active features. Exponential; meant for validation only.

use crate::cube::ValueFunctional;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{split_holds, DecisionTree, EnsembleModel, Node};

/// Largest number of active features the enumerations accept.
pub const MAX_ACTIVE_FEATURES: usize = 14;

/// Attribution for a single row. `values` has `n_features` entries, or
/// `n_features^2` (row-major) for interaction values.
#[derive(Debug, Clone, PartialEq)]
pub struct RowAttribution {
    pub base_value: f64,
    pub values: Vec<f64>,
}

/// Cooperative-game solution concepts over a table `v[mask]` of coalition
/// values for `n` players.
pub mod game {
    fn factorial(n: usize) -> f64 {
        (1..=n).map(|i| i as f64).product()
    }

    pub fn shapley(v: &[f64], n: usize) -> Vec<f64> {
        let weights: Vec<f64> = (0..n)
            .map(|s| factorial(s) * factorial(n - s - 1) / factorial(n))
            .collect();
        (0..n)
            .map(|i| {
                let bit = 1usize << i;
                (0..1usize << n)
                    .filter(|s| s & bit == 0)
                    .map(|s| weights[s.count_ones() as usize] * (v[s | bit] - v[s]))
                    .sum()
            })
            .collect()
    }

    pub fn banzhaf(v: &[f64], n: usize) -> Vec<f64> {
        let scale = 1.0 / (1u64 << n.saturating_sub(1)) as f64;
        (0..n)
            .map(|i| {
                let bit = 1usize << i;
                scale
                    * (0..1usize << n)
                        .filter(|s| s & bit == 0)
                        .map(|s| v[s | bit] - v[s])
                        .sum::<f64>()
            })
            .collect()
    }

    /// Shapley interaction index for every ordered pair; the diagonal is 0.
    pub fn interaction(v: &[f64], n: usize) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; n]; n];
        if n < 2 {
            return out;
        }
        let weights: Vec<f64> = (0..n - 1)
            .map(|s| factorial(s) * factorial(n - s - 2) / factorial(n - 1))
            .collect();
        for i in 0..n {
            for j in i + 1..n {
                let (bi, bj) = (1usize << i, 1usize << j);
                let total: f64 = (0..1usize << n)
                    .filter(|s| s & (bi | bj) == 0)
                    .map(|s| {
                        weights[s.count_ones() as usize]
                            * (v[s | bi | bj] - v[s | bi] - v[s | bj] + v[s])
                    })
                    .sum();
                out[i][j] = total;
                out[j][i] = total;
            }
        }
        out
    }
}

fn active_features(model: &EnsembleModel) -> Result<Vec<usize>> {
    let active = model.active_features();
    if active.len() > MAX_ACTIVE_FEATURES {
        return Err(Error::TooManyFeatures {
            active: active.len(),
            limit: MAX_ACTIVE_FEATURES,
        });
    }
    Ok(active)
}

/// Spread coalition-game results over the active features of the model.
fn solve(
    v: &[f64],
    active: &[usize],
    n_features: usize,
    functional: ValueFunctional,
) -> RowAttribution {
    let a = active.len();
    let base_value = v[0];
    let values = match functional {
        ValueFunctional::Shapley | ValueFunctional::Banzhaf => {
            let local = if functional == ValueFunctional::Shapley {
                game::shapley(v, a)
            } else {
                game::banzhaf(v, a)
            };
            let mut out = vec![0.0; n_features];
            for (i, &f) in active.iter().enumerate() {
                out[f] = local[i];
            }
            out
        }
        ValueFunctional::ShapleyInteraction => {
            let phi = game::shapley(v, a);
            let pairs = game::interaction(v, a);
            let mut out = vec![0.0; n_features * n_features];
            for (i, &fi) in active.iter().enumerate() {
                let mut off = 0.0;
                for (j, &fj) in active.iter().enumerate() {
                    if i != j {
                        out[fi * n_features + fj] = pairs[i][j];
                        off += pairs[i][j];
                    }
                }
                out[fi * n_features + fi] = phi[i] - off;
            }
            out
        }
    };
    RowAttribution { base_value, values }
}

/// Exact values of the background game
/// `v(S) = mean over b in B of predict(x on S, b elsewhere)`.
pub fn background_shap_bruteforce(
    model: &EnsembleModel,
    x: &[f64],
    background: &Dataset,
    functional: ValueFunctional,
) -> Result<RowAttribution> {
    if background.n_rows() == 0 {
        return Err(Error::EmptyBackground);
    }
    let active = active_features(model)?;
    let a = active.len();
    let mut v = vec![0.0; 1 << a];
    let mut row = vec![0.0; model.n_features()];
    for b in 0..background.n_rows() {
        background.read_row(b, &mut row);
        let base_row = row.clone();
        for (mask, slot) in v.iter_mut().enumerate() {
            for (i, &f) in active.iter().enumerate() {
                row[f] = if mask >> i & 1 == 1 {
                    x[f]
                } else {
                    base_row[f]
                };
            }
            *slot += model.predict_row(&row);
        }
    }
    let m = background.n_rows() as f64;
    for slot in &mut v {
        *slot /= m;
    }
    Ok(solve(&v, &active, model.n_features(), functional))
}

/// Exact values of the cover-weighted game: features in `S` follow `x`,
/// other splits average both children by cover.
pub fn path_dependent_bruteforce(
    model: &EnsembleModel,
    x: &[f64],
    functional: ValueFunctional,
) -> Result<RowAttribution> {
    for tree in model.trees() {
        for (id, node) in tree.nodes().iter().enumerate() {
            match node.cover() {
                None => return Err(Error::MissingCover { node: id }),
                Some(c) if c == 0.0 && !node.is_leaf() => {
                    return Err(Error::ZeroCover { node: id })
                }
                _ => {}
            }
        }
    }
    let active = active_features(model)?;
    let a = active.len();
    let mut in_s = vec![false; model.n_features()];
    let v: Vec<f64> = (0..1usize << a)
        .map(|mask| {
            for (i, &f) in active.iter().enumerate() {
                in_s[f] = mask >> i & 1 == 1;
            }
            model.base_score()
                + model
                    .trees()
                    .iter()
                    .map(|t| expected_value(t, 0, x, &in_s))
                    .sum::<f64>()
        })
        .collect();
    Ok(solve(&v, &active, model.n_features(), functional))
}

fn expected_value(tree: &DecisionTree, id: usize, x: &[f64], in_s: &[bool]) -> f64 {
    match tree.node(id) {
        Node::Leaf { weight, .. } => *weight,
        &Node::Split {
            feature,
            threshold,
            cmp,
            left,
            right,
            cover,
        } => {
            if in_s[feature] {
                let next = if split_holds(x[feature], threshold, cmp) {
                    left
                } else {
                    right
                };
                expected_value(tree, next, x, in_s)
            } else {
                let c = cover.expect("covers checked");
                let cl = tree.node(left).cover().expect("covers checked");
                let cr = tree.node(right).cover().expect("covers checked");
                (cl * expected_value(tree, left, x, in_s)
                    + cr * expected_value(tree, right, x, in_s))
                    / c
            }
        }
    }
}
