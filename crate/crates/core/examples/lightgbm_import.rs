//! Load a LightGBM text dump, explain it, convert it to canonical JSON.
//!
//! cargo run --example lightgbm_import -- [model.txt] [rows.csv]

use std::path::PathBuf;

use treeshap_hd::{
    explain, load_lightgbm_text, parse_canonical, save_canonical, Dataset, ExplainRequest, Mode,
    ValueFunctional,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let mut args = std::env::args().skip(1);
    let model_path = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| fixtures.join("lgbm_tiny.txt"));
    let data_path = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| fixtures.join("lgbm_tiny_data.csv"));

    let model = load_lightgbm_text(&model_path)?;
    let rows = Dataset::from_csv(&data_path)?;
    println!(
        "{} trees, {} features, max depth {}",
        model.trees().len(),
        model.n_features(),
        model.max_path_depth()
    );

    // LightGBM dumps carry leaf counts, so the cover-weighted game is available.
    let result = explain(&ExplainRequest {
        model: &model,
        consumers: &rows,
        background: None,
        mode: Mode::PathDependent,
        functional: ValueFunctional::Shapley,
    })?;
    let preds = model.predict(&rows)?;
    for i in 0..rows.n_rows() {
        let total = result.base_value + result.row(i).iter().sum::<f64>();
        println!(
            "row {i}: raw score {:.6}, attributions sum to {total:.6}",
            preds[i]
        );
    }

    let dir = tempfile::tempdir()?;
    let out = dir.path().join("model.json");
    save_canonical(&model, &out)?;
    let back = parse_canonical(&std::fs::read_to_string(&out)?)?;
    println!(
        "canonical copy predicts identically: {}",
        back.predict(&rows)? == preds
    );
    Ok(())
}
