//! Pairwise Shapley interaction values. Off-diagonal entries are the
//! symmetric pair indices; the diagonal holds each feature's main effect,
//! so every row of the matrix sums to that feature's Shapley value.
//!
//! cargo run --example interactions

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use treeshap_hd::synth::{random_dataset, random_model, ModelSpec};
use treeshap_hd::{explain, ExplainRequest, Mode, ValueFunctional};

fn main() -> treeshap_hd::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let spec = ModelSpec {
        n_features: 4,
        max_active: 4,
        n_trees: 3,
        max_depth: 4,
        ..ModelSpec::default()
    };
    let model = random_model(&mut rng, &spec);
    let consumers = random_dataset(&mut rng, 1, spec.n_features, spec.grid);
    let background = random_dataset(&mut rng, 40, spec.n_features, spec.grid);

    let request = |functional| ExplainRequest {
        model: &model,
        consumers: &consumers,
        background: Some(&background),
        mode: Mode::Background,
        functional,
    };
    let inter = explain(&request(ValueFunctional::ShapleyInteraction))?;
    let shap = explain(&request(ValueFunctional::Shapley))?;

    let f = inter.n_features;
    println!("interaction matrix:");
    for a in 0..f {
        let cells: Vec<String> = (0..f)
            .map(|b| format!("{:+.4}", inter.interaction(0, a, b)))
            .collect();
        println!("  {}", cells.join("  "));
    }
    println!("row sums vs shapley:");
    for (a, (total, phi)) in inter.feature_totals(0).iter().zip(shap.row(0)).enumerate() {
        println!("  x{a}: {total:+.6} {phi:+.6}");
    }
    Ok(())
}
