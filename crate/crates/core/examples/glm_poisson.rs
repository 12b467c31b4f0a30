//! Laplace-approximated marginal likelihood for Poisson ridge regression and
//! the resulting λ, next to deviance-based K-fold CV (true λ = 100).
//!
//! `cargo run --release --example glm_poisson`

use std::path::Path;

use ridgepen::glm::{fit_latent_mode, glm_cv_lambda, glm_mml_lambda, GlmFamily, GlmOptions, LatentGaussianPrior};
use ridgepen::sim::{gen_replicate, SimConfig};

fn main() -> ridgepen::Result<()> {
    let cfg = SimConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/poisson.toml"))?;
    let data = gen_replicate(&cfg, 0, None)?;
    let fam = GlmFamily::Poisson;
    println!("n = {}, p = {}, total count {}", data.x.nrows(), data.x.ncols(), data.y.sum());

    let prior = LatentGaussianPrior::from_eigen(&data.x.gram_eigen()?, 1.0)?;
    println!("{:>8} {:>12} {:>7}", "lambda", "Laplace ML", "Newton");
    for lambda in [10.0, 30.0, 100.0, 300.0, 1000.0] {
        let fit = fit_latent_mode(&data.y, &prior.with_lambda(lambda)?, &fam, None, GlmOptions::default())?;
        println!("{lambda:>8} {:>12.4} {:>7}", fit.log_ml, fit.newton_iters);
    }

    let mml = glm_mml_lambda(&data.x, &data.y, &fam)?;
    let cv = glm_cv_lambda(&data.x, &data.y, &fam, 10, data.seed)?;
    println!("glm_mml lambda = {:.2} ({:.2} s)", mml.lambda.unwrap(), mml.wall_time_s);
    println!("glm_cv  lambda = {:.2} ({:.2} s)", cv.lambda.unwrap(), cv.wall_time_s);
    Ok(())
}
