//! Every linear-model estimator on one dataset from the standard setting
//! (n = 100, p = 1000, τ² = 0.01, σ² = 10, so λ = 1000 and h² = 0.5).
//!
//! `cargo run --release --example linear_estimators [replicate]`

use ridgepen::dispatch::Problem;
use ridgepen::sim::{gen_replicate, SimConfig};
use ridgepen::Method;

fn show(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.5}"))
}

fn main() -> ridgepen::Result<()> {
    let r: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(0);
    let cfg = SimConfig::standard();
    let data = gen_replicate(&cfg, r, None)?;
    let problem = Problem::new(data.x, data.y, data.seed)?;

    println!("replicate {r} (seed {})", data.seed);
    println!("{:<9} {:>10} {:>10} {:>12} {:>8} {:>9}  note", "method", "sigma2", "tau2", "lambda", "h2", "seconds");
    for m in [Method::Mml, Method::Mom, Method::Basic, Method::Pcr, Method::Gcv, Method::Cv, Method::Hilmm, Method::BayesEb] {
        match problem.run(m) {
            Ok(rep) => {
                let c = rep.components;
                println!(
                    "{:<9} {:>10} {:>10} {:>12} {:>8} {:>9.4}  {}",
                    m.to_string(),
                    show(c.map(|c| c.sigma2)),
                    show(c.map(|c| c.tau2)),
                    show(rep.lambda),
                    show(rep.h2),
                    rep.wall_time_s,
                    rep.note.unwrap_or_default()
                );
            }
            Err(e) => println!("{m:<9} failed: {e}"),
        }
    }
    Ok(())
}
