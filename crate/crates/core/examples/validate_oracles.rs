//! Randomized check of the fast engine against brute-force coalition
//! enumeration.
//!
//! cargo run --example validate_oracles

use treeshap_hd::validate::{
    explain_trial, make_trial, oracle_values, run_validate, ValidateConfig,
};
use treeshap_hd::{ExplainOptions, Method, Mode, ValueFunctional};

fn main() -> treeshap_hd::Result<()> {
    let config = ValidateConfig {
        trials: 20,
        seed: 42,
        ..ValidateConfig::default()
    };
    let report = run_validate(&config)?;
    println!("{report}");

    // One trial by hand.
    let trial = make_trial(&config, 42);
    let (oracle, bases) = oracle_values(&trial, Mode::Background, ValueFunctional::Shapley)?;
    let fast = explain_trial(
        &trial,
        Mode::Background,
        ValueFunctional::Shapley,
        &ExplainOptions::default(),
        Method::Hd,
    )?;
    let dev = oracle
        .iter()
        .zip(&fast.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!(
        "trial 42: {} trees, {} consumers, base {:.6} vs {:.6}, max deviation {dev:.2e}",
        trial.model.trees().len(),
        trial.consumers.n_rows(),
        bases[0],
        fast.base_value
    );
    if !report.passed() {
        std::process::exit(1);
    }
    Ok(())
}
