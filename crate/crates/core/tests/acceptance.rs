//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use treeshap_hd::alloc::{self, CountingAlloc};
use treeshap_hd::bench::{run_bench, BenchConfig, BenchReport};
use treeshap_hd::cube::{
    banzhaf_of_cube, map_patterns_to_cube, shapley_interaction_of_cube, shapley_of_cube, Cube,
    Target,
};
use treeshap_hd::fastmult::{
    mv_recursive, reconstruct_dense, strassen_like_mult, strassen_like_mult_counted, DenseMatrix,
    DiagonalVector, OpCounts,
};
use treeshap_hd::oracle::game;
use treeshap_hd::patterns::{UfdpGenerator, DEFAULT_DEPTH_CAP};
use treeshap_hd::synth::{complete_tree, random_dataset};
use treeshap_hd::validate::{
    explain_trial, local_accuracy_gap, make_trial, oracle_values, ValidateConfig,
};
use treeshap_hd::{ExplainOptions, Method, Mode, ValueFunctional};

#[global_allocator]
static ALLOC: CountingAlloc = CountingAlloc;

const FUNCTIONALS: [ValueFunctional; 3] = [
    ValueFunctional::Shapley,
    ValueFunctional::Banzhaf,
    ValueFunctional::ShapleyInteraction,
];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn max_dev(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn sweep_config() -> ValidateConfig {
    ValidateConfig {
        max_depth: 8,
        max_active: 12,
        max_consumers: 16,
        max_background: 32,
        ..ValidateConfig::default()
    }
}

const SWEEP_MODELS: u64 = 200;
const SWEEP_SEED: u64 = 1_000;

/// Local-accuracy gaps collected by the sweeps for the local-accuracy criterion.
#[derive(Default)]
struct Sweeps {
    local_accuracy: f64,
    models: usize,
}

fn oracle_sweep(mode: Mode, sweeps: &mut Sweeps) -> Outcome {
    let start = Instant::now();
    let config = sweep_config();
    let options = ExplainOptions::default();
    let mut worst = [0.0f64; 3];
    let mut repeated = 0;
    let mut max_active = 0;
    for t in 0..SWEEP_MODELS {
        let trial = make_trial(&config, SWEEP_SEED + t);
        let model = &trial.model;
        max_active = max_active.max(model.active_features().len());
        if model
            .trees()
            .iter()
            .any(|tree| tree.max_unique_features() < tree.max_path_depth())
        {
            repeated += 1;
        }
        for (slot, functional) in FUNCTIONALS.into_iter().enumerate() {
            let hd = match explain_trial(&trial, mode, functional, &options, Method::Hd) {
                Ok(r) => r,
                Err(e) => return outcome(false, format!("seed {}: {e}", trial.seed)),
            };
            let (values, bases) = oracle_values(&trial, mode, functional).expect("oracle runs");
            let dev = max_dev(&hd.values, &values).max(
                bases
                    .iter()
                    .map(|b| (b - hd.base_value).abs())
                    .fold(0.0, f64::max),
            );
            worst[slot] = worst[slot].max(dev);
            if functional == ValueFunctional::Shapley {
                let gap = local_accuracy_gap(&trial, &hd).expect("prediction runs");
                sweeps.local_accuracy = sweeps.local_accuracy.max(gap);
                sweeps.models += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = worst.iter().all(|&w| w <= 1e-8) && elapsed < Duration::from_secs(120);
    outcome(
        pass,
        format!(
            "{SWEEP_MODELS} models ({repeated} with repeated features, up to {max_active} active), \
             max dev shapley {:.2e} banzhaf {:.2e} interaction {:.2e}, {:.1}s",
            worst[0],
            worst[1],
            worst[2],
            elapsed.as_secs_f64()
        ),
    )
}

fn dense_regression(sweeps: &mut Sweeps) -> Outcome {
    let config = sweep_config();
    let options = ExplainOptions::default();
    let mut worst: f64 = 0.0;
    for t in 0..50 {
        let trial = make_trial(&config, 5_000 + t);
        for mode in [Mode::Background, Mode::PathDependent] {
            for functional in FUNCTIONALS {
                let hd = explain_trial(&trial, mode, functional, &options, Method::Hd);
                let dense =
                    explain_trial(&trial, mode, functional, &options, Method::DenseBaseline);
                match (hd, dense) {
                    (Ok(hd), Ok(dense)) => {
                        worst = worst.max(max_dev(&hd.values, &dense.values));
                        worst = worst.max((hd.base_value - dense.base_value).abs());
                        if functional == ValueFunctional::Shapley {
                            let gap = local_accuracy_gap(&trial, &hd).expect("prediction runs");
                            sweeps.local_accuracy = sweeps.local_accuracy.max(gap);
                            sweeps.models += 1;
                        }
                    }
                    (Err(e), _) | (_, Err(e)) => {
                        return outcome(false, format!("seed {}: {e}", trial.seed))
                    }
                }
            }
        }
    }
    outcome(
        worst <= 1e-9,
        format!("50 models, both modes, max dev {worst:.2e}"),
    )
}

fn relative_inf(a: &[f64], b: &[f64]) -> f64 {
    let scale = b
        .iter()
        .fold(0.0f64, |m, x| m.max(x.abs()))
        .max(f64::MIN_POSITIVE);
    max_dev(a, b) / scale
}

fn kernel() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_fast: f64 = 0.0;
    let mut worst_rec: f64 = 0.0;
    for k in 1..=10usize {
        let n = 1 << k;
        for _ in 0..1000 {
            let diag: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let f: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let dense = reconstruct_dense(&DiagonalVector::new(diag.clone()).unwrap()).unwrap();
            let reference = dense.mul_vec(&f);
            let fast = strassen_like_mult(&diag, &f).unwrap();
            worst_fast = worst_fast.max(relative_inf(&fast, &reference));
            let rec = mv_recursive(&dense, &f).unwrap();
            worst_rec = worst_rec.max(relative_inf(&rec, &reference));
        }
    }
    outcome(
        worst_fast <= 1e-10 && worst_rec <= 1e-12,
        format!("k=1..10 x 1000, fast rel {worst_fast:.2e}, recursive rel {worst_rec:.2e}"),
    )
}

fn op_counts() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for k in 0..=20usize {
        let n = 1usize << k;
        let diag: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
        let f: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
        let mut ops = OpCounts::default();
        strassen_like_mult_counted(&diag, &f, &mut ops).unwrap();
        if ops.adds != (k * n) as u64 || ops.muls != n as u64 {
            return outcome(
                false,
                format!("k={k}: {} adds, {} muls", ops.adds, ops.muls),
            );
        }
    }
    outcome(true, "adds = k*2^k and muls = 2^k for k = 0..20")
}

/// Check `M1 = 0` and `M4 = M2 + M3` for every block at every level.
fn quadrant_violation(m: &DenseMatrix) -> Option<String> {
    let n = m.size();
    let mut size = n;
    while size >= 2 {
        let h = size / 2;
        for r0 in (0..n).step_by(size) {
            for c0 in (0..n).step_by(size) {
                for i in 0..h {
                    for j in 0..h {
                        let m1 = m.get(r0 + i, c0 + j);
                        let m2 = m.get(r0 + i, c0 + h + j);
                        let m3 = m.get(r0 + h + i, c0 + j);
                        let m4 = m.get(r0 + h + i, c0 + h + j);
                        if m1 != 0.0 || (m4 - m2 - m3).abs() > 1e-12 {
                            return Some(format!("block {size} at ({r0},{c0}), entry ({i},{j})"));
                        }
                    }
                }
            }
        }
        size = h;
    }
    let full = n - 1;
    for a in 0..n {
        for b in 0..n {
            if a | b != full && m.get(a, b) != 0.0 {
                return Some(format!("nonzero off the a|b=all-ones set at ({a},{b})"));
            }
        }
    }
    None
}

fn structure() -> Outcome {
    let mut checked = 0;
    for k in 1..=6 {
        let mcubes = map_patterns_to_cube(k, DEFAULT_DEPTH_CAP).unwrap();
        for functional in FUNCTIONALS {
            for target in functional.targets(k) {
                let m = mcubes.densify(|c| functional.value(c, target).unwrap());
                if let Some(v) = quadrant_violation(&m) {
                    return outcome(false, format!("k={k} {functional:?} {target:?}: {v}"));
                }
                checked += 1;
            }
        }
    }
    outcome(true, format!("{checked} matrices for k = 1..6"))
}

/// Least-squares slope of `y` against `x`.
fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn bench(depths: Vec<usize>, methods: Vec<Method>) -> BenchReport {
    run_bench(&BenchConfig {
        depths,
        methods,
        repeats: 5,
        seed: 17,
        ..BenchConfig::default()
    })
    .expect("benchmark runs")
}

fn memory_and_time() -> Outcome {
    let start = Instant::now();
    let deep = bench((12..=18).collect(), vec![Method::Hd]);
    let shallow = bench((8..=12).collect(), vec![Method::Hd, Method::DenseBaseline]);

    let peak = |r: &BenchReport, d: usize, m: Method| {
        (r.record(d, m).and_then(|x| x.peak_bytes).unwrap_or(1) as f64).log2()
    };
    let hd_x: Vec<f64> = (12..=18).map(|k| k as f64 + (k as f64).log2()).collect();
    let hd_y: Vec<f64> = (12..=18).map(|k| peak(&deep, k, Method::Hd)).collect();
    let hd_slope = slope(&hd_x, &hd_y);
    let dense_x: Vec<f64> = (8..=12)
        .map(|k| k as f64 * 3f64.log2() + (k as f64).log2())
        .collect();
    let dense_y: Vec<f64> = (8..=12)
        .map(|k| peak(&shallow, k, Method::DenseBaseline))
        .collect();
    let dense_slope = slope(&dense_x, &dense_y);

    let ratios: Vec<f64> = (8..=12)
        .map(|k| {
            shallow.time(k, Method::Hd).unwrap_or(f64::NAN)
                / shallow.time(k, Method::DenseBaseline).unwrap_or(f64::NAN)
        })
        .collect();
    let decreasing = ratios.windows(2).all(|w| w[1] < w[0]);
    let growth: Vec<f64> = (14..18)
        .map(|k| {
            deep.time(k + 1, Method::Hd).unwrap_or(f64::NAN)
                / deep.time(k, Method::Hd).unwrap_or(f64::NAN)
        })
        .collect();
    let growth_ok = growth.iter().all(|g| (1.7..=2.6).contains(g));
    let elapsed = start.elapsed();

    let in_band = |s: f64| (0.95..=1.1).contains(&s);
    let fmt = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x:.3}"))
            .collect::<Vec<_>>()
            .join(",")
    };
    outcome(
        alloc::is_installed()
            && in_band(hd_slope)
            && in_band(dense_slope)
            && decreasing
            && growth_ok
            && elapsed < Duration::from_secs(600),
        format!(
            "hd fit {hd_slope:.3} (k=12..18), dense fit {dense_slope:.3} (k=8..12), \
             t_hd/t_dense [{}], t_hd growth [{}], {:.1}s",
            fmt(&ratios),
            fmt(&growth),
            elapsed.as_secs_f64()
        ),
    )
}

fn local_accuracy(sweeps: &Sweeps) -> Outcome {
    outcome(
        sweeps.models > 0 && sweeps.local_accuracy <= 1e-8,
        format!(
            "{} Shapley runs, max |base + sum - prediction| {:.2e}",
            sweeps.models, sweeps.local_accuracy
        ),
    )
}

fn streaming() -> Outcome {
    let depth = 10;
    let rows = 4096;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let tree = complete_tree(&mut rng, depth);
    let data = random_dataset(&mut rng, rows, depth, 2);
    let ((leaves, peak_live), peak_heap) = alloc::measure_peak(|| {
        let mut g = UfdpGenerator::new(&tree, &data, DEFAULT_DEPTH_CAP).unwrap();
        let mut leaves = 0;
        while g.next_leaf().is_some() {
            leaves += 1;
        }
        (leaves, g.peak_live_vectors())
    });
    let vector_bytes = rows * std::mem::size_of::<u32>();
    // Room for the frame stack, the feature list and allocator rounding.
    let bound = (depth + 1) * vector_bytes + 4096;
    outcome(
        leaves == 1 << depth && peak_live <= depth + 1 && peak_heap <= bound,
        format!(
            "{leaves} leaves, peak {peak_live} live vectors, peak heap {peak_heap} B \
             (bound {bound} B; all leaves at once would need {} B)",
            (1usize << depth) * vector_bytes
        ),
    )
}

fn per_cube_functionals() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut cubes = 0;
    for n in 0..=10usize {
        for signs in 0u32..1 << n {
            let full = (1u32 << n) - 1;
            let cube = Cube::new(signs, full & !signs).with_weight(1.5);
            // One extra player outside the cube checks the dummy case.
            let players = n + 1;
            let v: Vec<f64> = (0..1u32 << players).map(|s| cube.eval(s)).collect();
            let phi = game::shapley(&v, players);
            let bz = game::banzhaf(&v, players);
            let iv = game::interaction(&v, players);
            for i in 0..players {
                worst = worst.max((shapley_of_cube(&cube, i) - phi[i]).abs());
                worst = worst.max((banzhaf_of_cube(&cube, i) - bz[i]).abs());
                for j in 0..players {
                    if i != j {
                        let got = shapley_interaction_of_cube(&cube, i, j).unwrap();
                        worst = worst.max((got - iv[i][j]).abs());
                    }
                }
            }
            if ValueFunctional::ShapleyInteraction
                .value(&cube, Target::Pair(0, 0))
                .is_ok()
            {
                return outcome(false, "pair (0, 0) was accepted");
            }
            cubes += 1;
        }
    }
    outcome(
        worst <= 1e-12,
        format!("{cubes} cubes with p+q <= 10, max dev {worst:.2e}"),
    )
}

fn main() {
    let mut sweeps = Sweeps::default();
    // The per-cube gate runs first; everything else builds on those formulas.
    let gate = per_cube_functionals();
    let results: Vec<(&str, Outcome)> = vec![
        (
            "oracle equivalence, background",
            oracle_sweep(Mode::Background, &mut sweeps),
        ),
        (
            "oracle equivalence, path-dependent",
            oracle_sweep(Mode::PathDependent, &mut sweeps),
        ),
        ("hd vs dense baseline", dense_regression(&mut sweeps)),
        ("kernel vs dense reconstruction", kernel()),
        ("operation counts", op_counts()),
        ("quadrant structure", structure()),
        ("memory and time scaling", memory_and_time()),
        ("local accuracy", local_accuracy(&sweeps)),
        ("streaming generator memory", streaming()),
        ("per-cube functionals vs enumeration", gate),
    ];

    let mut failed = 0;
    for (i, (name, o)) in results.iter().enumerate() {
        let status = if o.pass { "PASS" } else { "FAIL" };
        println!("{status} [{}] {name}: {}", i + 1, o.detail);
        failed += usize::from(!o.pass);
    }
    println!(
        "{} of {} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
