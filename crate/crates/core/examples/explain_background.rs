//! Interventional Shapley and Banzhaf values against a background set.
//!
//! cargo run --example explain_background

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use treeshap_hd::synth::{random_dataset, random_model, ModelSpec};
use treeshap_hd::{explain, ExplainRequest, Mode, ValueFunctional};

fn main() -> treeshap_hd::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let spec = ModelSpec {
        n_features: 6,
        max_active: 6,
        n_trees: 4,
        max_depth: 5,
        ..ModelSpec::default()
    };
    let model = random_model(&mut rng, &spec);
    let consumers = random_dataset(&mut rng, 3, spec.n_features, spec.grid);
    let background = random_dataset(&mut rng, 50, spec.n_features, spec.grid);

    for functional in [ValueFunctional::Shapley, ValueFunctional::Banzhaf] {
        let result = explain(&ExplainRequest {
            model: &model,
            consumers: &consumers,
            background: Some(&background),
            mode: Mode::Background,
            functional,
        })?;
        println!("{functional:?} (base value {:.4})", result.base_value);
        for i in 0..result.n_rows {
            let row: Vec<String> = result.row(i).iter().map(|v| format!("{v:+.4}")).collect();
            println!("  row {i}: [{}]", row.join(", "));
        }
    }

    // Shapley values are efficient: base + sum == prediction.
    let result = explain(&ExplainRequest {
        model: &model,
        consumers: &consumers,
        background: Some(&background),
        mode: Mode::Background,
        functional: ValueFunctional::Shapley,
    })?;
    let preds = model.predict(&consumers)?;
    for (i, p) in preds.iter().enumerate() {
        let total: f64 = result.base_value + result.row(i).iter().sum::<f64>();
        println!("row {i}: prediction {p:.6}, base + sum {total:.6}");
    }
    Ok(())
}
