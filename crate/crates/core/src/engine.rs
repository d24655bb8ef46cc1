//! The per-leaf explanation pipeline and its dense reference twin.
//!
//! For every tree the consumer and background UFDP generators are advanced in
//! lockstep, one leaf at a time. At a leaf with `k` distinct path features:
//!
//! 1. build the f-vector (background pattern frequencies, or cover products),
//! 2. look up the cached diagonals for `k`,
//! 3. `s = w_leaf · M · f` for every target through the zeta-transform kernel,
//! 4. add `s[pattern]` into each consumer's row.
//!
//! Trees are independent; each worker accumulates one tree into a private
//! buffer and buffers are summed in tree order, so output does not depend on
//! the thread count.

use rayon::prelude::*;
use serde::Serialize;

use crate::cache::{cache_bytes, compute_ms, DiagonalCache};
use crate::cube::{map_patterns_to_cube, Target, ValueFunctional};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::fastmult::{OpCounts, PreparedVector, DENSE_MAX_K};
use crate::model::{DecisionTree, EnsembleModel, Node};
use crate::patterns::{
    background_f_into, check_cap, path_dependent_f, Mode, UfdpGenerator, DEFAULT_CHUNK_ROWS,
    DEFAULT_DEPTH_CAP,
};

pub const DEFAULT_MEMORY_BUDGET: u64 = 4 << 30;

#[derive(Debug, Clone)]
pub struct ExplainOptions {
    pub threads: usize,
    pub memory_budget_bytes: u64,
    pub depth_cap: usize,
    pub chunk_rows: usize,
    #[doc(hidden)]
    pub corrupt_cache: bool,
}

impl Default for ExplainOptions {
    fn default() -> Self {
        Self {
            threads: 1,
            memory_budget_bytes: DEFAULT_MEMORY_BUDGET,
            depth_cap: DEFAULT_DEPTH_CAP,
            chunk_rows: DEFAULT_CHUNK_ROWS,
            corrupt_cache: false,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ExplainRequest<'a> {
    pub model: &'a EnsembleModel,
    pub consumers: &'a Dataset,
    pub background: Option<&'a Dataset>,
    pub mode: Mode,
    pub functional: ValueFunctional,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ExplainStats {
    pub ops: OpCounts,
    pub leaves: u64,
    pub max_leaf_k: usize,
    pub cache_bytes: u64,
    /// Sparse cube entries materialized by the dense baseline.
    pub nonzeros: u64,
    pub max_leaf_nonzeros: u64,
}

impl ExplainStats {
    fn merge(&mut self, other: &ExplainStats) {
        self.ops += other.ops;
        self.leaves += other.leaves;
        self.max_leaf_k = self.max_leaf_k.max(other.max_leaf_k);
        self.nonzeros += other.nonzeros;
        self.max_leaf_nonzeros = self.max_leaf_nonzeros.max(other.max_leaf_nonzeros);
    }
}

/// Attributions for every consumer row.
///
/// `values` is row-major: `n_rows x n_features`, or
/// `n_rows x n_features x n_features` for interaction values, where the
/// diagonal holds `phi_i - Σ_{j≠i} phi_ij` so every row of a consumer's
/// matrix sums to that feature's Shapley value.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributionResult {
    pub functional: ValueFunctional,
    pub mode: Mode,
    pub n_rows: usize,
    pub n_features: usize,
    pub base_value: f64,
    pub values: Vec<f64>,
    pub stats: ExplainStats,
}

impl AttributionResult {
    fn width(&self) -> usize {
        match self.functional {
            ValueFunctional::ShapleyInteraction => self.n_features * self.n_features,
            _ => self.n_features,
        }
    }

    /// All values of one consumer (`n_features` or `n_features^2` entries).
    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.width();
        &self.values[i * w..(i + 1) * w]
    }

    pub fn interaction(&self, i: usize, a: usize, b: usize) -> f64 {
        debug_assert_eq!(self.functional, ValueFunctional::ShapleyInteraction);
        self.row(i)[a * self.n_features + b]
    }

    /// Per-feature attribution of a consumer. For interaction values this is
    /// the row sum, i.e. the Shapley value.
    pub fn feature_totals(&self, i: usize) -> Vec<f64> {
        match self.functional {
            ValueFunctional::ShapleyInteraction => self
                .row(i)
                .chunks(self.n_features)
                .map(|r| r.iter().sum())
                .collect(),
            _ => self.row(i).to_vec(),
        }
    }
}

/// Which multiplication path computes `M · f`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Cached diagonals with the zeta-transform kernel.
    Hd,
    /// Per-leaf sparse M built from all `3^k` cubes.
    DenseBaseline,
}

struct Caches {
    primary: DiagonalCache,
    /// Shapley diagonals, needed for the interaction-matrix diagonal.
    shapley: Option<DiagonalCache>,
}

struct TreeOutput {
    values: Vec<f64>,
    shapley: Vec<f64>,
    base: f64,
    stats: ExplainStats,
}

pub fn explain(request: &ExplainRequest) -> Result<AttributionResult> {
    explain_with(request, &ExplainOptions::default())
}

pub fn explain_with(
    request: &ExplainRequest,
    options: &ExplainOptions,
) -> Result<AttributionResult> {
    run(request, options, Method::Hd)
}

/// Same contract as [`explain`], multiplying by the full sparse M matrix of
/// each leaf. Limited to 12 distinct features per path.
pub fn explain_dense_baseline(
    request: &ExplainRequest,
    options: &ExplainOptions,
) -> Result<AttributionResult> {
    run(request, options, Method::DenseBaseline)
}

pub fn explain_method(
    request: &ExplainRequest,
    options: &ExplainOptions,
    method: Method,
) -> Result<AttributionResult> {
    run(request, options, method)
}

/// Memory the run is expected to need at its peak.
pub fn projected_bytes(request: &ExplainRequest, options: &ExplainOptions, method: Method) -> u64 {
    let k = request.model.max_unique_features();
    let f = request.model.n_features() as u64;
    let n = request.consumers.n_rows() as u64;
    let interaction = request.functional == ValueFunctional::ShapleyInteraction;
    let width = if interaction { f * f + f } else { f };
    let workers = options.threads.max(1) as u64;
    let accumulators = 8 * n * width * (workers + 1);
    let targets = request.functional.n_targets(k) as u64;
    let per_leaf = match method {
        Method::Hd => (8 * (targets + 2)) << k,
        Method::DenseBaseline => (16 + 8 * targets) * 3u64.pow(k as u32) + (16 << k),
    };
    let cache = match method {
        Method::Hd => {
            cache_bytes(k, request.functional)
                + if interaction {
                    cache_bytes(k, ValueFunctional::Shapley)
                } else {
                    0
                }
        }
        Method::DenseBaseline => 0,
    };
    cache + per_leaf * workers + accumulators
}

fn validate(request: &ExplainRequest, options: &ExplainOptions, method: Method) -> Result<()> {
    check_cap(options.depth_cap)?;
    if options.threads == 0 {
        return Err(Error::Invalid("threads must be at least 1".into()));
    }
    let model = request.model;
    model.check_dataset(request.consumers)?;
    if request.mode == Mode::Background {
        let bg = request.background.ok_or(Error::EmptyBackground)?;
        model.check_dataset(bg)?;
        if bg.n_rows() == 0 {
            return Err(Error::EmptyBackground);
        }
    }
    let k = model.max_unique_features();
    let cap = match method {
        Method::Hd => options.depth_cap,
        Method::DenseBaseline => options.depth_cap.min(DENSE_MAX_K),
    };
    if k > cap {
        return Err(Error::DepthCap { unique: k, cap });
    }
    let needed = projected_bytes(request, options, method);
    if needed > options.memory_budget_bytes {
        return Err(Error::BudgetExceeded {
            needed,
            budget: options.memory_budget_bytes,
        });
    }
    Ok(())
}

fn run(
    request: &ExplainRequest,
    options: &ExplainOptions,
    method: Method,
) -> Result<AttributionResult> {
    validate(request, options, method)?;
    let model = request.model;
    let depth = model.max_unique_features();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.threads)
        .build()
        .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;
    let caches = match method {
        Method::Hd => pool.install(|| -> Result<_> {
            let budget = options.memory_budget_bytes;
            let mut primary = compute_ms(depth, request.functional, options.depth_cap, budget)?;
            if options.corrupt_cache {
                primary.corrupt();
            }
            let shapley = (request.functional == ValueFunctional::ShapleyInteraction)
                .then(|| compute_ms(depth, ValueFunctional::Shapley, options.depth_cap, budget))
                .transpose()?;
            Ok(Some(Caches { primary, shapley }))
        })?,
        Method::DenseBaseline => None,
    };

    let n = request.consumers.n_rows();
    let f = model.n_features();
    let interaction = request.functional == ValueFunctional::ShapleyInteraction;
    let width = if interaction { f * f } else { f };
    let mut values = vec![0.0; n * width];
    let mut shapley = if interaction {
        vec![0.0; n * f]
    } else {
        Vec::new()
    };
    let mut base_value = model.base_score();
    let mut stats = ExplainStats {
        cache_bytes: caches.as_ref().map_or(0, |c| {
            c.primary.byte_size() + c.shapley.as_ref().map_or(0, DiagonalCache::byte_size)
        }),
        ..ExplainStats::default()
    };

    for batch in model.trees().chunks(options.threads) {
        let outputs: Vec<Result<TreeOutput>> = pool.install(|| {
            batch
                .par_iter()
                .map(|tree| process_tree(tree, request, options, method, caches.as_ref()))
                .collect()
        });
        for out in outputs {
            let out = out?;
            for (acc, v) in values.iter_mut().zip(&out.values) {
                *acc += v;
            }
            for (acc, v) in shapley.iter_mut().zip(&out.shapley) {
                *acc += v;
            }
            base_value += out.base;
            stats.merge(&out.stats);
        }
    }

    if interaction {
        for c in 0..n {
            let matrix = &mut values[c * width..(c + 1) * width];
            for i in 0..f {
                let off: f64 = (0..f).filter(|&j| j != i).map(|j| matrix[i * f + j]).sum();
                matrix[i * f + i] = shapley[c * f + i] - off;
            }
        }
    }

    Ok(AttributionResult {
        functional: request.functional,
        mode: request.mode,
        n_rows: n,
        n_features: f,
        base_value,
        values,
        stats,
    })
}

fn process_tree(
    tree: &DecisionTree,
    request: &ExplainRequest,
    options: &ExplainOptions,
    method: Method,
    caches: Option<&Caches>,
) -> Result<TreeOutput> {
    let n = request.consumers.n_rows();
    let f = request.model.n_features();
    let interaction = request.functional == ValueFunctional::ShapleyInteraction;
    let width = if interaction { f * f } else { f };
    let mut out = TreeOutput {
        values: vec![0.0; n * width],
        shapley: if interaction {
            vec![0.0; n * f]
        } else {
            Vec::new()
        },
        base: 0.0,
        stats: ExplainStats::default(),
    };

    let cap = options.depth_cap;
    let mut consumers =
        UfdpGenerator::with_chunk_rows(tree, request.consumers, cap, options.chunk_rows)?;
    let mut background = match (request.mode, request.background) {
        (Mode::Background, Some(bg)) => Some(UfdpGenerator::with_chunk_rows(
            tree,
            bg,
            cap,
            options.chunk_rows,
        )?),
        _ => None,
    };
    let mut paths = tree.root_to_leaf_paths();
    let mut s = Vec::new();
    // Leaf buffers are reused so large leaves do not refault fresh pages.
    let mut fvals: Vec<f64> = Vec::new();
    let mut prepared = PreparedVector::default();

    while let Some(leaf) = consumers.next_leaf() {
        let k = leaf.features.len();
        let Node::Leaf { weight, .. } = *tree.node(leaf.leaf) else {
            unreachable!("generators only stop at leaves")
        };
        match request.mode {
            Mode::Background => {
                let bg = background
                    .as_mut()
                    .and_then(UfdpGenerator::next_leaf)
                    .ok_or_else(|| Error::Invalid("background generator ended early".into()))?;
                if bg.leaf != leaf.leaf {
                    return Err(Error::Invalid("generators disagree on leaf order".into()));
                }
                background_f_into(bg.patterns, k, &mut fvals)?;
            }
            Mode::PathDependent => {
                let path = paths
                    .next()
                    .filter(|p| p.leaf == leaf.leaf)
                    .ok_or_else(|| Error::Invalid("path order disagrees with generator".into()))?;
                fvals = path_dependent_f(tree, &path)?.values;
            }
        }
        out.base += weight * fvals[(1 << k) - 1];
        out.stats.leaves += 1;
        out.stats.max_leaf_k = out.stats.max_leaf_k.max(k);
        if k == 0 {
            continue;
        }

        s.resize(1 << k, 0.0);
        let mut add_target = |target: Target, s: &[f64], into_shapley: bool| {
            let patterns = leaf.patterns;
            match target {
                Target::Position(j) => {
                    let feature = leaf.features[j];
                    let (buf, stride) = if into_shapley {
                        (&mut out.shapley, f)
                    } else {
                        (&mut out.values, width)
                    };
                    for (c, &p) in patterns.iter().enumerate() {
                        buf[c * stride + feature] += s[p as usize];
                    }
                }
                Target::Pair(i, j) => {
                    let (fa, fb) = (leaf.features[i], leaf.features[j]);
                    for (c, &p) in patterns.iter().enumerate() {
                        let v = s[p as usize];
                        out.values[c * width + fa * f + fb] += v;
                        out.values[c * width + fb * f + fa] += v;
                    }
                }
            }
        };

        match method {
            Method::Hd => {
                let caches = caches.expect("hd runs always build caches");
                prepared.prepare(&fvals, &mut out.stats.ops)?;
                prepared.scale(weight, &mut out.stats.ops);
                let mut run_cache = |cache: &DiagonalCache, into_shapley: bool| -> Result<()> {
                    for (t, target) in cache.functional().targets(k).into_iter().enumerate() {
                        prepared.multiply_into(cache.vector(k, t), &mut s, &mut out.stats.ops)?;
                        add_target(target, &s, into_shapley);
                    }
                    Ok(())
                };
                run_cache(&caches.primary, false)?;
                if let Some(sh) = &caches.shapley {
                    run_cache(sh, true)?;
                }
            }
            Method::DenseBaseline => {
                let mcubes = map_patterns_to_cube(k, cap)?;
                let nz = mcubes.len() as u64;
                out.stats.nonzeros += nz;
                out.stats.max_leaf_nonzeros = out.stats.max_leaf_nonzeros.max(nz);
                let mut functionals = vec![(request.functional, false)];
                if interaction {
                    functionals.push((ValueFunctional::Shapley, true));
                }
                for (functional, into_shapley) in functionals {
                    let targets = functional.targets(k);
                    // One materialized sparse M per target, as the original
                    // per-leaf pipeline holds them.
                    let matrices = targets
                        .iter()
                        .map(|&t| {
                            mcubes
                                .entries()
                                .iter()
                                .map(|(_, _, cube)| functional.value(cube, t))
                                .collect::<Result<Vec<f64>>>()
                        })
                        .collect::<Result<Vec<_>>>()?;
                    for (target, m) in targets.into_iter().zip(&matrices) {
                        s.iter_mut().for_each(|x| *x = 0.0);
                        for (&(row, col, _), &mv) in mcubes.entries().iter().zip(m) {
                            s[row as usize] += mv * fvals[col as usize];
                        }
                        out.stats.ops.muls += 2 * nz;
                        out.stats.ops.adds += nz;
                        for x in s.iter_mut() {
                            *x *= weight;
                        }
                        add_target(target, &s, into_shapley);
                    }
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Comparison;

    fn stump_model() -> EnsembleModel {
        let tree = DecisionTree::new(vec![
            Node::Split {
                feature: 0,
                threshold: 0.5,
                cmp: Comparison::Lt,
                left: 1,
                right: 2,
                cover: Some(100.0),
            },
            Node::Leaf {
                weight: 1.0,
                cover: Some(60.0),
            },
            Node::Leaf {
                weight: 0.0,
                cover: Some(40.0),
            },
        ])
        .unwrap();
        EnsembleModel::new(vec![tree], 3, 0.0, None).unwrap()
    }

    #[test]
    fn stump_background_shapley() {
        let model = stump_model();
        let consumers = Dataset::from_rows(&[vec![0.2, 7.0, 7.0]], None).unwrap();
        let background = Dataset::from_rows(&[vec![0.9, 1.0, 1.0]], None).unwrap();
        let r = explain(&ExplainRequest {
            model: &model,
            consumers: &consumers,
            background: Some(&background),
            mode: Mode::Background,
            functional: ValueFunctional::Shapley,
        })
        .unwrap();
        assert_eq!(r.row(0), &[1.0, 0.0, 0.0]);
        assert_eq!(r.base_value, 0.0);
    }

    #[test]
    fn background_equal_to_consumer_gives_zero() {
        let model = stump_model();
        let rows = Dataset::from_rows(&[vec![0.3, 1.0, 2.0]], None).unwrap();
        for functional in [
            ValueFunctional::Shapley,
            ValueFunctional::Banzhaf,
            ValueFunctional::ShapleyInteraction,
        ] {
            let r = explain(&ExplainRequest {
                model: &model,
                consumers: &rows,
                background: Some(&rows),
                mode: Mode::Background,
                functional,
            })
            .unwrap();
            assert!(r.values.iter().all(|&v| v == 0.0));
            assert_eq!(r.base_value, 1.0);
        }
    }

    #[test]
    fn path_dependent_stump() {
        let model = stump_model();
        let consumers =
            Dataset::from_rows(&[vec![0.2, 0.0, 0.0], vec![0.7, 0.0, 0.0]], None).unwrap();
        let r = explain(&ExplainRequest {
            model: &model,
            consumers: &consumers,
            background: None,
            mode: Mode::PathDependent,
            functional: ValueFunctional::Shapley,
        })
        .unwrap();
        assert!((r.base_value - 0.6).abs() < 1e-15);
        assert!((r.row(0)[0] - 0.4).abs() < 1e-15);
        assert!((r.row(1)[0] + 0.6).abs() < 1e-15);
    }

    #[test]
    fn request_errors() {
        let model = stump_model();
        let rows = Dataset::from_rows(&[vec![0.2, 0.0, 0.0]], None).unwrap();
        let req = ExplainRequest {
            model: &model,
            consumers: &rows,
            background: None,
            mode: Mode::Background,
            functional: ValueFunctional::Shapley,
        };
        assert!(matches!(explain(&req), Err(Error::EmptyBackground)));
        let empty =
            Dataset::from_rows(&[], Some(vec!["a".into(), "b".into(), "c".into()])).unwrap();
        let req = ExplainRequest {
            background: Some(&empty),
            ..req
        };
        assert!(matches!(explain(&req), Err(Error::EmptyBackground)));
        let req = ExplainRequest {
            background: Some(&rows),
            ..req
        };
        let tiny = ExplainOptions {
            memory_budget_bytes: 16,
            ..ExplainOptions::default()
        };
        assert!(matches!(
            explain_with(&req, &tiny),
            Err(Error::BudgetExceeded { .. })
        ));
        let nan = Dataset::from_rows(&[vec![f64::NAN, 0.0, 0.0]], None).unwrap();
        let req = ExplainRequest {
            consumers: &nan,
            ..req
        };
        assert!(matches!(explain(&req), Err(Error::NaNInput { .. })));
    }
}
