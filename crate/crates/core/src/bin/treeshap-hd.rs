use treeshap_hd::alloc::CountingAlloc;

// Lets `bench` report measured peak heap bytes.
#[global_allocator]
static ALLOC: CountingAlloc = CountingAlloc;

fn main() {
    std::process::exit(treeshap_hd::cli::run(std::env::args_os()));
}
