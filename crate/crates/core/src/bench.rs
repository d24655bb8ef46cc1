//! Depth benchmark: time, peak heap and operation counts per depth and method.

use std::fmt::Write as _;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::alloc;
use crate::cube::ValueFunctional;
use crate::data::Dataset;
use crate::engine::{explain_method, projected_bytes, ExplainOptions, ExplainRequest, Method};
use crate::error::Result;
use crate::fastmult::DENSE_MAX_K;
use crate::model::EnsembleModel;
use crate::patterns::Mode;
use crate::synth;

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub depths: Vec<usize>,
    pub methods: Vec<Method>,
    pub mode: Mode,
    pub functional: ValueFunctional,
    pub seed: u64,
    /// Spine trees per benchmark model.
    pub n_trees: usize,
    pub n_consumers: usize,
    pub n_background: usize,
    /// Each configuration runs this many times; the fastest run is kept.
    pub repeats: usize,
    pub options: ExplainOptions,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            depths: vec![6, 8, 10],
            methods: vec![Method::Hd, Method::DenseBaseline],
            mode: Mode::Background,
            functional: ValueFunctional::Shapley,
            seed: 0,
            n_trees: 8,
            n_consumers: 16,
            n_background: 16,
            repeats: 3,
            options: ExplainOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PeakSource {
    /// Measured by the counting allocator.
    Allocator,
    /// The engine's own projection; used when the allocator is not installed.
    Projected,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRecord {
    pub depth: usize,
    pub method: Method,
    pub mode: Mode,
    pub functional: ValueFunctional,
    pub wall_time_seconds: Option<f64>,
    pub peak_bytes: Option<u64>,
    pub peak_source: PeakSource,
    pub adds: u64,
    pub muls: u64,
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub seed: u64,
    pub records: Vec<BenchRecord>,
}

pub fn run_bench(config: &BenchConfig) -> Result<BenchReport> {
    let mut depths = config.depths.clone();
    depths.sort_unstable();
    depths.dedup();
    let source = if alloc::is_installed() {
        PeakSource::Allocator
    } else {
        PeakSource::Projected
    };

    let cases: Vec<Case> = depths
        .iter()
        .map(|&depth| {
            let mut rng =
                ChaCha8Rng::seed_from_u64(config.seed ^ (depth as u64).wrapping_mul(0x9e37_79b9));
            let model = synth::bench_model(&mut rng, depth, config.n_trees);
            let n = model.n_features();
            Case {
                consumers: synth::random_dataset(&mut rng, config.n_consumers, n, 2),
                background: synth::random_dataset(&mut rng, config.n_background, n, 2),
                model,
            }
        })
        .collect();

    let mut records = Vec::new();
    for (&depth, case) in depths.iter().zip(&cases) {
        for &method in &config.methods {
            let mut record = BenchRecord {
                depth,
                method,
                mode: config.mode,
                functional: config.functional,
                wall_time_seconds: None,
                peak_bytes: None,
                peak_source: source,
                adds: 0,
                muls: 0,
                skipped: None,
            };
            let projected = projected_bytes(&case.request(config), &config.options, method);
            let too_deep = method == Method::DenseBaseline && depth > DENSE_MAX_K;
            if too_deep || projected > config.options.memory_budget_bytes {
                log::info!("skipping depth {depth} {method:?}: needs {projected} bytes");
                record.skipped = Some("budget".into());
            } else {
                // The first run also records counters and the heap peak.
                let (result, peak) = alloc::measure_peak(|| {
                    explain_method(&case.request(config), &config.options, method)
                });
                match result {
                    Ok(r) => {
                        record.adds = r.stats.ops.adds;
                        record.muls = r.stats.ops.muls;
                        record.peak_bytes = Some(match source {
                            PeakSource::Allocator => peak as u64,
                            PeakSource::Projected => projected,
                        });
                    }
                    Err(e) if e.is_budget() => record.skipped = Some("budget".into()),
                    Err(e) => return Err(e),
                }
            }
            records.push(record);
        }
    }

    // Timed repetitions sweep over all configurations in turn, so a slow
    // stretch on a shared machine does not land on a single depth.
    let mut best = vec![f64::INFINITY; records.len()];
    for _ in 0..config.repeats.max(1) {
        for (i, record) in records.iter().enumerate() {
            if record.skipped.is_some() {
                continue;
            }
            let case = &cases[depths
                .iter()
                .position(|&d| d == record.depth)
                .expect("known depth")];
            // An untimed run first, so allocator state left behind by other
            // configurations is not charged to this one.
            explain_method(&case.request(config), &config.options, record.method)?;
            let start = Instant::now();
            explain_method(&case.request(config), &config.options, record.method)?;
            best[i] = best[i].min(start.elapsed().as_secs_f64());
        }
    }
    for (record, t) in records.iter_mut().zip(best) {
        if record.skipped.is_none() {
            record.wall_time_seconds = Some(t);
            log::info!("depth {} {:?}: {t:.6}s", record.depth, record.method);
        }
    }
    Ok(BenchReport {
        seed: config.seed,
        records,
    })
}

struct Case {
    model: EnsembleModel,
    consumers: Dataset,
    background: Dataset,
}

impl Case {
    fn request(&self, config: &BenchConfig) -> ExplainRequest<'_> {
        ExplainRequest {
            model: &self.model,
            consumers: &self.consumers,
            background: (config.mode == Mode::Background).then_some(&self.background),
            mode: config.mode,
            functional: config.functional,
        }
    }
}

impl BenchReport {
    pub fn record(&self, depth: usize, method: Method) -> Option<&BenchRecord> {
        self.records
            .iter()
            .find(|r| r.depth == depth && r.method == method)
    }

    pub fn time(&self, depth: usize, method: Method) -> Option<f64> {
        self.record(depth, method)?.wall_time_seconds
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Plain-text table, one line per record.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:>5}  {:<14}  {:>12}  {:>14}  {:>14}  {:>12}",
            "depth", "method", "seconds", "peak_bytes", "adds", "muls"
        );
        for r in &self.records {
            let method = match r.method {
                Method::Hd => "hd",
                Method::DenseBaseline => "dense_baseline",
            };
            match &r.skipped {
                Some(reason) => {
                    let _ = writeln!(out, "{:>5}  {:<14}  skipped ({reason})", r.depth, method);
                }
                None => {
                    let _ = writeln!(
                        out,
                        "{:>5}  {:<14}  {:>12.6}  {:>14}  {:>14}  {:>12}",
                        r.depth,
                        method,
                        r.wall_time_seconds.unwrap_or(f64::NAN),
                        r.peak_bytes.unwrap_or(0),
                        r.adds,
                        r.muls
                    );
                }
            }
        }
        out
    }
}
