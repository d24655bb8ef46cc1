//! The matrix-vector kernel on its own: a structured `2^k x 2^k` matrix is
//! described by its secondary diagonal, and `M · f` costs `k·2^k` additions
//! and `2^k` multiplications.
//!
//! cargo run --example strassen_kernel

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use treeshap_hd::fastmult::{reconstruct_dense, strassen_like_mult_counted, OpCounts};
use treeshap_hd::{compute_ms, strassen_like_mult, DiagonalVector, ValueFunctional};

fn main() -> treeshap_hd::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);

    // Arbitrary diagonal, checked against the explicit matrix.
    let k = 4;
    let diag: Vec<f64> = (0..1 << k).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let f: Vec<f64> = (0..1 << k).map(|_| rng.gen_range(0.0..1.0)).collect();
    let fast = strassen_like_mult(&diag, &f)?;
    let dense = reconstruct_dense(&DiagonalVector::new(diag.clone())?)?.mul_vec(&f);
    let err = fast
        .iter()
        .zip(&dense)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("k={k}: max |fast - dense| = {err:.2e}");

    // The diagonal that yields Shapley values for the first player.
    let cache = compute_ms(k, ValueFunctional::Shapley, k, u64::MAX)?;
    println!("shapley diagonal for k={k}: {:.4?}", cache.vector(k, 0));

    for k in [8, 12, 16, 20] {
        let diag = vec![1.0; 1 << k];
        let f = vec![0.5; 1 << k];
        let mut ops = OpCounts::default();
        strassen_like_mult_counted(&diag, &f, &mut ops)?;
        println!("k={k:>2}: adds {:>10} muls {:>8}", ops.adds, ops.muls);
    }
    Ok(())
}
