//! Importer for LightGBM `model.txt` dumps.
//!
//! Only numerical splits are supported. A LightGBM node sends a row left when
//! `value <= threshold`, so imported splits use [`Comparison::Le`]. Leaf values
//! in the dump already include shrinkage; `internal_count`/`leaf_count` become
//! covers. LightGBM keeps internal nodes and leaves in separate arrays and
//! encodes a leaf child `j` as `-(j + 1)`; here internal node `i` keeps index
//! `i` and leaf `j` becomes node `num_leaves - 1 + j`.

use std::collections::HashMap;
use std::path::Path;

use super::{Comparison, DecisionTree, EnsembleModel, Node};
use crate::error::{Error, Result};

const CATEGORICAL_MASK: u32 = 1;
const MISSING_ZERO: u32 = 1;

pub fn load_lightgbm_text(path: impl AsRef<Path>) -> Result<EnsembleModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_lightgbm_text(&text)
}

pub fn parse_lightgbm_text(text: &str) -> Result<EnsembleModel> {
    let mut header: HashMap<&str, &str> = HashMap::new();
    let mut blocks: Vec<HashMap<&str, &str>> = Vec::new();
    let mut current: Option<HashMap<&str, &str>> = None;

    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line == "end of trees" {
            break;
        }
        if line.starts_with("Tree=") {
            blocks.extend(current.take());
            current = Some(HashMap::new());
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            continue;
        };
        match current.as_mut() {
            Some(block) => {
                block.insert(key, value);
            }
            None => {
                header.insert(key, value);
            }
        }
    }
    blocks.extend(current);

    if blocks.is_empty() {
        return Err(Error::Parse("no Tree= blocks found".into()));
    }
    if let Some(v) = header.get("num_tree_per_iteration") {
        if v.trim() != "1" {
            return Err(Error::UnsupportedFeature(format!(
                "multi-output models (num_tree_per_iteration={v})"
            )));
        }
    }
    let max_feature_idx: usize = header
        .get("max_feature_idx")
        .ok_or_else(|| Error::Parse("missing max_feature_idx".into()))?
        .trim()
        .parse()
        .map_err(|e| Error::Parse(format!("max_feature_idx: {e}")))?;
    let n_features = max_feature_idx + 1;
    let feature_names = header
        .get("feature_names")
        .map(|s| s.split_whitespace().map(str::to_owned).collect::<Vec<_>>())
        .filter(|names| names.len() == n_features);

    let trees = blocks
        .iter()
        .enumerate()
        .map(|(t, block)| {
            parse_tree(block).map_err(|e| match e {
                Error::Parse(msg) => Error::Parse(format!("tree {t}: {msg}")),
                Error::Validation(msg) => Error::Validation(format!("tree {t}: {msg}")),
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    EnsembleModel::new(trees, n_features, 0.0, feature_names)
}

fn field<'a>(block: &HashMap<&str, &'a str>, key: &str) -> Result<&'a str> {
    block
        .get(key)
        .copied()
        .ok_or_else(|| Error::Parse(format!("missing field {key}")))
}

fn parse_array<T: std::str::FromStr>(
    block: &HashMap<&str, &str>,
    key: &str,
    len: usize,
) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    let values = field(block, key)?
        .split_whitespace()
        .map(|tok| {
            tok.parse::<T>()
                .map_err(|e| Error::Parse(format!("{key}: bad value {tok:?}: {e}")))
        })
        .collect::<Result<Vec<T>>>()?;
    if values.len() != len {
        return Err(Error::Parse(format!(
            "{key}: expected {len} values, found {}",
            values.len()
        )));
    }
    Ok(values)
}

fn parse_tree(block: &HashMap<&str, &str>) -> Result<DecisionTree> {
    let num_leaves: usize = field(block, "num_leaves")?
        .trim()
        .parse()
        .map_err(|e| Error::Parse(format!("num_leaves: {e}")))?;
    if num_leaves == 0 {
        return Err(Error::Parse("num_leaves is zero".into()));
    }
    if block.get("is_linear").is_some_and(|v| v.trim() != "0") {
        return Err(Error::UnsupportedFeature("linear trees".into()));
    }
    if block
        .get("num_cat")
        .is_some_and(|v| v.trim().parse::<usize>().map_or(true, |n| n > 0))
    {
        return Err(Error::UnsupportedFeature("categorical splits".into()));
    }

    let leaf_value: Vec<f64> = parse_array(block, "leaf_value", num_leaves)?;
    if num_leaves == 1 {
        let cover = block
            .get("leaf_count")
            .and_then(|v| v.split_whitespace().next())
            .and_then(|v| v.parse::<f64>().ok());
        return DecisionTree::new(vec![Node::Leaf {
            weight: leaf_value[0],
            cover,
        }]);
    }

    let n_internal = num_leaves - 1;
    let split_feature: Vec<usize> = parse_array(block, "split_feature", n_internal)?;
    let threshold: Vec<f64> = parse_array(block, "threshold", n_internal)?;
    let decision_type: Vec<u32> = parse_array(block, "decision_type", n_internal)?;
    let left_child: Vec<i64> = parse_array(block, "left_child", n_internal)?;
    let right_child: Vec<i64> = parse_array(block, "right_child", n_internal)?;
    let internal_count: Option<Vec<f64>> = block
        .contains_key("internal_count")
        .then(|| parse_array(block, "internal_count", n_internal))
        .transpose()?;
    let leaf_count: Option<Vec<f64>> = block
        .contains_key("leaf_count")
        .then(|| parse_array(block, "leaf_count", num_leaves))
        .transpose()?;

    let map_child = |c: i64| -> Result<usize> {
        let idx = if c >= 0 {
            c as usize
        } else {
            n_internal + (-(c + 1)) as usize
        };
        if (c >= 0 && idx >= n_internal) || idx >= n_internal + num_leaves {
            return Err(Error::Parse(format!("child reference {c} out of range")));
        }
        Ok(idx)
    };

    let mut nodes = Vec::with_capacity(n_internal + num_leaves);
    for i in 0..n_internal {
        let dt = decision_type[i];
        if dt & CATEGORICAL_MASK != 0 {
            return Err(Error::UnsupportedFeature(format!(
                "categorical split at node {i} (decision_type={dt})"
            )));
        }
        // NaN routing is irrelevant because NaN inputs are rejected, but the
        // zero-as-missing rule changes where finite zeros go.
        if (dt >> 2) & 3 == MISSING_ZERO {
            return Err(Error::UnsupportedFeature(format!(
                "zero-as-missing default path at node {i} (decision_type={dt})"
            )));
        }
        nodes.push(Node::Split {
            feature: split_feature[i],
            threshold: threshold[i],
            cmp: Comparison::Le,
            left: map_child(left_child[i])?,
            right: map_child(right_child[i])?,
            cover: internal_count.as_ref().map(|c| c[i]),
        });
    }
    for (j, &weight) in leaf_value.iter().enumerate() {
        nodes.push(Node::Leaf {
            weight,
            cover: leaf_count.as_ref().map(|c| c[j]),
        });
    }
    DecisionTree::new(nodes)
}

#[cfg(test)]
mod tests {
    use super::*;

    const DUMP: &str = "tree
version=v4
num_class=1
num_tree_per_iteration=1
label_index=0
max_feature_idx=1
objective=regression
feature_names=a b

Tree=0
num_leaves=3
num_cat=0
split_feature=0 1
split_gain=1 1
threshold=0.5 1.5
decision_type=2 2
left_child=-1 -2
right_child=1 -3
leaf_value=1 2 3
leaf_weight=2 1 1
leaf_count=2 1 1
internal_value=0 0
internal_weight=4 2
internal_count=4 2
is_linear=0
shrinkage=1


end of trees
";

    #[test]
    fn parses_small_dump() {
        let m = parse_lightgbm_text(DUMP).unwrap();
        assert_eq!(m.n_features(), 2);
        assert_eq!(m.feature_names().unwrap(), ["a", "b"]);
        assert_eq!(m.predict_row(&[0.5, 0.0]), 1.0);
        assert_eq!(m.predict_row(&[0.6, 1.5]), 2.0);
        assert_eq!(m.predict_row(&[0.6, 1.6]), 3.0);
        assert!(m.trees()[0].has_covers());
    }

    #[test]
    fn categorical_rejected() {
        let dump = DUMP.replace("decision_type=2 2", "decision_type=1 2");
        assert!(matches!(
            parse_lightgbm_text(&dump),
            Err(Error::UnsupportedFeature(_))
        ));
        let dump = DUMP.replace("decision_type=2 2", "decision_type=2 4");
        assert!(matches!(
            parse_lightgbm_text(&dump),
            Err(Error::UnsupportedFeature(_))
        ));
    }

    #[test]
    fn empty_is_parse_error() {
        assert!(matches!(parse_lightgbm_text(""), Err(Error::Parse(_))));
        let truncated = DUMP.replace("leaf_value=1 2 3", "leaf_value=1 2");
        assert!(matches!(
            parse_lightgbm_text(&truncated),
            Err(Error::Parse(_))
        ));
    }
}
