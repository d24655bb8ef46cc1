//! Seeded sweeps comparing the engine with the brute-force oracles and with
//! the dense baseline.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cube::ValueFunctional;
use crate::data::Dataset;
use crate::engine::{explain_method, AttributionResult, ExplainOptions, ExplainRequest, Method};
use crate::error::{Error, Result};
use crate::model::EnsembleModel;
use crate::oracle::{background_shap_bruteforce, path_dependent_bruteforce};
use crate::patterns::Mode;
use crate::synth::{random_dataset, random_model, ModelSpec};

pub const DEFAULT_TOLERANCE: f64 = 1e-8;
pub const MAX_VALIDATE_DEPTH: usize = 8;
pub const MAX_VALIDATE_ACTIVE: usize = 12;

#[derive(Debug, Clone)]
pub struct ValidateConfig {
    pub trials: usize,
    pub seed: u64,
    pub max_depth: usize,
    pub max_active: usize,
    pub max_consumers: usize,
    pub max_background: usize,
    pub tolerance: f64,
    pub functionals: Vec<ValueFunctional>,
    /// Compare against the dense baseline as well.
    pub dense: bool,
    pub options: ExplainOptions,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        Self {
            trials: 50,
            seed: 0,
            max_depth: 6,
            max_active: MAX_VALIDATE_ACTIVE,
            max_consumers: 16,
            max_background: 32,
            tolerance: DEFAULT_TOLERANCE,
            functionals: vec![
                ValueFunctional::Shapley,
                ValueFunctional::Banzhaf,
                ValueFunctional::ShapleyInteraction,
            ],
            dense: true,
            options: ExplainOptions::default(),
        }
    }
}

/// Largest deviation seen for one comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairDeviation {
    pub pair: String,
    pub max_abs_deviation: f64,
    pub comparisons: u64,
    /// Seed of the trial with the largest deviation.
    pub worst_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidateReport {
    pub trials: usize,
    pub tolerance: f64,
    pub pairs: Vec<PairDeviation>,
    /// Largest |base_value + Σφ − prediction| over Shapley runs.
    pub local_accuracy: f64,
    /// Trial seeds whose deviation exceeded the tolerance.
    pub failing_seeds: Vec<u64>,
}

impl ValidateReport {
    pub fn passed(&self) -> bool {
        self.failing_seeds.is_empty()
    }

    pub fn max_deviation(&self) -> f64 {
        self.pairs
            .iter()
            .map(|p| p.max_abs_deviation)
            .fold(self.local_accuracy, f64::max)
    }
}

impl fmt::Display for ValidateReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "trials: {}  tolerance: {:e}",
            self.trials, self.tolerance
        )?;
        for p in &self.pairs {
            writeln!(
                f,
                "{:<40} max |dev| = {:.3e}  ({} values, worst seed {})",
                p.pair, p.max_abs_deviation, p.comparisons, p.worst_seed
            )?;
        }
        writeln!(
            f,
            "{:<40} max |dev| = {:.3e}",
            "local accuracy", self.local_accuracy
        )?;
        if self.failing_seeds.is_empty() {
            write!(f, "all comparisons within tolerance")
        } else {
            write!(f, "FAILED seeds: {:?}", self.failing_seeds)
        }
    }
}

/// One random problem of a sweep.
#[derive(Debug, Clone)]
pub struct Trial {
    pub seed: u64,
    pub model: EnsembleModel,
    pub consumers: Dataset,
    pub background: Dataset,
}

/// Random problem for `seed` within the sweep bounds of `config`.
pub fn make_trial(config: &ValidateConfig, seed: u64) -> Trial {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_active = config.max_active.clamp(1, MAX_VALIDATE_ACTIVE);
    let spec = ModelSpec {
        n_features: rng.gen_range(max_active.min(3)..=max_active),
        max_active,
        n_trees: rng.gen_range(1..=3),
        max_depth: rng.gen_range(1..=config.max_depth.max(1)),
        grid: rng.gen_range(2..=5),
        leaf_prob: rng.gen_range(0.0..0.35),
    };
    let model = random_model(&mut rng, &spec);
    let n = rng.gen_range(1..=config.max_consumers.max(1));
    let m = rng.gen_range(1..=config.max_background.max(1));
    let consumers = random_dataset(&mut rng, n, spec.n_features, spec.grid);
    let background = random_dataset(&mut rng, m, spec.n_features, spec.grid);
    Trial {
        seed,
        model,
        consumers,
        background,
    }
}

struct Tracker {
    pairs: Vec<PairDeviation>,
    failing: Vec<u64>,
    tolerance: f64,
}

impl Tracker {
    fn record(&mut self, pair: String, seed: u64, a: &[f64], b: &[f64]) {
        let dev = a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        let dev = if a.len() == b.len() {
            dev
        } else {
            f64::INFINITY
        };
        let entry = match self.pairs.iter_mut().position(|p| p.pair == pair) {
            Some(i) => &mut self.pairs[i],
            None => {
                self.pairs.push(PairDeviation {
                    pair,
                    max_abs_deviation: 0.0,
                    comparisons: 0,
                    worst_seed: seed,
                });
                self.pairs.last_mut().expect("just pushed")
            }
        };
        entry.comparisons += a.len() as u64;
        if !(dev <= entry.max_abs_deviation) {
            entry.max_abs_deviation = dev;
            entry.worst_seed = seed;
        }
        if !(dev <= self.tolerance) && !self.failing.contains(&seed) {
            self.failing.push(seed);
        }
    }
}

fn functional_name(f: ValueFunctional) -> &'static str {
    match f {
        ValueFunctional::Shapley => "shapley",
        ValueFunctional::Banzhaf => "banzhaf",
        ValueFunctional::ShapleyInteraction => "interaction",
    }
}

fn mode_name(m: Mode) -> &'static str {
    match m {
        Mode::Background => "background",
        Mode::PathDependent => "path-dependent",
    }
}

/// Oracle values for every consumer, flattened like an [`AttributionResult`].
pub fn oracle_values(
    trial: &Trial,
    mode: Mode,
    functional: ValueFunctional,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut values = Vec::new();
    let mut bases = Vec::new();
    for i in 0..trial.consumers.n_rows() {
        let x = trial.consumers.row(i);
        let r = match mode {
            Mode::Background => {
                background_shap_bruteforce(&trial.model, &x, &trial.background, functional)?
            }
            Mode::PathDependent => path_dependent_bruteforce(&trial.model, &x, functional)?,
        };
        values.extend(r.values);
        bases.push(r.base_value);
    }
    Ok((values, bases))
}

pub fn explain_trial(
    trial: &Trial,
    mode: Mode,
    functional: ValueFunctional,
    options: &ExplainOptions,
    method: Method,
) -> Result<AttributionResult> {
    explain_method(
        &ExplainRequest {
            model: &trial.model,
            consumers: &trial.consumers,
            background: Some(&trial.background),
            mode,
            functional,
        },
        options,
        method,
    )
}

/// Largest |base_value + Σφ − prediction| over the consumers of a Shapley result.
pub fn local_accuracy_gap(trial: &Trial, result: &AttributionResult) -> Result<f64> {
    let predictions = trial.model.predict(&trial.consumers)?;
    Ok(predictions
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let total: f64 = result.feature_totals(i).iter().sum();
            (result.base_value + total - p).abs()
        })
        .fold(0.0, f64::max))
}

pub fn run_validate(config: &ValidateConfig) -> Result<ValidateReport> {
    if config.trials == 0 {
        return Err(Error::Invalid("no trials requested".into()));
    }
    if config.max_depth > MAX_VALIDATE_DEPTH {
        return Err(Error::Invalid(format!(
            "max depth {} exceeds {MAX_VALIDATE_DEPTH}",
            config.max_depth
        )));
    }
    let mut tracker = Tracker {
        pairs: Vec::new(),
        failing: Vec::new(),
        tolerance: config.tolerance,
    };
    let mut local_accuracy: f64 = 0.0;
    for t in 0..config.trials {
        let seed = config.seed.wrapping_add(t as u64);
        let trial = make_trial(config, seed);
        for mode in [Mode::Background, Mode::PathDependent] {
            for &functional in &config.functionals {
                let label = format!("{}/{}", mode_name(mode), functional_name(functional));
                let hd = explain_trial(&trial, mode, functional, &config.options, Method::Hd)?;
                let (oracle, bases) = oracle_values(&trial, mode, functional)?;
                tracker.record(
                    format!("explain vs oracle {label}"),
                    seed,
                    &hd.values,
                    &oracle,
                );
                let base_gap: Vec<f64> = bases.iter().map(|b| b - hd.base_value).collect();
                tracker.record(
                    format!("base value vs oracle {}", mode_name(mode)),
                    seed,
                    &base_gap,
                    &vec![0.0; base_gap.len()],
                );
                if functional == ValueFunctional::Shapley {
                    let gap = local_accuracy_gap(&trial, &hd)?;
                    local_accuracy = local_accuracy.max(gap);
                    if !(gap <= config.tolerance) && !tracker.failing.contains(&seed) {
                        tracker.failing.push(seed);
                    }
                }
                if config.dense {
                    let dense = explain_trial(
                        &trial,
                        mode,
                        functional,
                        &config.options,
                        Method::DenseBaseline,
                    )?;
                    tracker.record(
                        format!("explain vs dense {label}"),
                        seed,
                        &hd.values,
                        &dense.values,
                    );
                }
            }
        }
    }
    Ok(ValidateReport {
        trials: config.trials,
        tolerance: config.tolerance,
        pairs: tracker.pairs,
        local_accuracy,
        failing_seeds: tracker.failing,
    })
}
