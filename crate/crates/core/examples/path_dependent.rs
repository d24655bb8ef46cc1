//! Cover-weighted explanations: no background set, the tree's own training
//! covers stand in for the data distribution.
//!
//! cargo run --example path_dependent

use treeshap_hd::{
    explain, Comparison, Dataset, DecisionTree, EnsembleModel, ExplainRequest, Mode, Node,
    ValueFunctional,
};

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

fn main() -> treeshap_hd::Result<()> {
    // x0 is tested twice on the left branch.
    let tree = DecisionTree::new(vec![
        split(0, 0.5, 1, 2, 100.0),
        split(1, 0.5, 3, 4, 60.0),
        leaf(-1.0, 40.0),
        split(0, 0.25, 5, 6, 45.0),
        leaf(2.0, 15.0),
        leaf(3.0, 20.0),
        leaf(0.5, 25.0),
    ])?;
    let model = EnsembleModel::new(
        vec![tree],
        2,
        0.1,
        Some(vec!["age".into(), "income".into()]),
    )?;
    let rows = Dataset::from_rows(&[vec![0.1, 0.2], vec![0.4, 0.9], vec![0.8, 0.0]], None)?;

    let result = explain(&ExplainRequest {
        model: &model,
        consumers: &rows,
        background: None,
        mode: Mode::PathDependent,
        functional: ValueFunctional::Shapley,
    })?;
    println!("expected value {:.4}", result.base_value);
    for i in 0..rows.n_rows() {
        let phi = result.row(i);
        println!(
            "row {i}: age {:+.4} income {:+.4} -> {:.4} (model {:.4})",
            phi[0],
            phi[1],
            result.base_value + phi[0] + phi[1],
            model.predict_row(&rows.row(i)),
        );
    }
    Ok(())
}
