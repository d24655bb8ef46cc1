//! Time and memory against tree depth for both kernels.
//!
//! cargo run --release --example depth_benchmark

use treeshap_hd::alloc::CountingAlloc;
use treeshap_hd::bench::{run_bench, BenchConfig};
use treeshap_hd::Method;

#[global_allocator]
static ALLOC: CountingAlloc = CountingAlloc;

fn main() -> treeshap_hd::Result<()> {
    let config = BenchConfig {
        depths: vec![6, 8, 10, 12, 14],
        methods: vec![Method::Hd, Method::DenseBaseline],
        ..BenchConfig::default()
    };
    let report = run_bench(&config)?;
    print!("{}", report.summary());
    Ok(())
}
