//! Single-threaded timing of one fit per estimator and problem size.
//!
//! `cargo run --release --example bench_timing [NxP ...]`

use ridgepen::cli::{bench, write_bench};
use ridgepen::report::Format;
use ridgepen::Method;

fn main() -> ridgepen::Result<()> {
    let mut sizes: Vec<(usize, usize)> = std::env::args()
        .skip(1)
        .filter_map(|a| {
            let (n, p) = a.split_once('x')?;
            Some((n.parse().ok()?, p.parse().ok()?))
        })
        .collect();
    if sizes.is_empty() {
        sizes = vec![(100, 1_000), (100, 10_000)];
    }
    let methods = [Method::Mml, Method::Mom, Method::Gcv, Method::Hilmm, Method::BayesEb];
    let rows = bench(&sizes, &methods, 1, 10)?;
    write_bench(&rows, Format::Csv, std::io::stdout().lock())
}
