//! Conjugate Bayes: the log marginal likelihood in ν, its empirical Bayes
//! maximizer, and the σ estimate against a fixed ν = 1/100 (σ² = 3, six
//! nonzero effects among 90).
//!
//! `cargo run --release --example bayes_moran`

use std::path::Path;

use ridgepen::bayes::{bayes_fixed_nu_sigma, bayes_log_ml, eb_estimate, BayesHyper};
use ridgepen::sim::{gen_replicate, SimConfig};

fn main() -> ridgepen::Result<()> {
    let cfg = SimConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/moran.toml"))?;
    let data = gen_replicate(&cfg, 0, None)?;
    let svd = data.x.svd()?;
    let (a, b) = (1.0, 0.001);

    println!("{:>10} {:>12}", "nu", "log ML");
    for k in 0..=12 {
        let nu = 10f64.powf(-4.0 + k as f64 * 0.75);
        println!("{nu:>10.2e} {:>12.4}", bayes_log_ml(&svd, &data.y, &BayesHyper::new(a, b, nu)?)?);
    }

    let eb = eb_estimate(&svd, &data.y, a, b)?;
    let fixed = bayes_fixed_nu_sigma(&svd, &data.y, 0.01, a, b)?;
    println!("EB: nu_hat = {:.4}, sigma = {:.4}", eb.nu, eb.posterior.sigma2().sqrt());
    println!("fixed nu = 0.01: sigma = {:.4}", fixed.sigma2().sqrt());
    println!("truth: sigma = {:.4}", 3f64.sqrt());
    Ok(())
}
