//! A small replicate sweep from a bundled config, summarized per estimator.
//!
//! `cargo run --release --example simulation_sweep [config-name] [replicates]`

use std::path::Path;

use ridgepen::report::{write_summary, Format};
use ridgepen::sim::{run_comparison, SimConfig};

fn main() -> ridgepen::Result<()> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "standard".into());
    let reps: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(10);
    let mut cfg = SimConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join(format!("examples/{name}.toml")))?;
    cfg.replicates = reps;

    let out = run_comparison(&cfg)?;
    eprintln!("{name}: {} replicates, {} rows", reps, out.rows.len());
    write_summary(&out.summary, Format::Csv, std::io::stdout().lock())
}
