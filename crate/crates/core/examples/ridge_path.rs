//! Ridge fits along a λ path from one thin SVD, with effective degrees of freedom.
//!
//! `cargo run --example ridge_path`

use ridgepen::linalg::{hat_traces, ridge_solve};
use ridgepen::rng::gaussian_matrix;
use ridgepen::DesignMatrix;

fn main() -> ridgepen::Result<()> {
    let (n, p) = (50, 400);
    let x = DesignMatrix::standardized(gaussian_matrix(n, p, 3))?;
    let beta = gaussian_matrix(p, 1, 4).column(0) * 0.1;
    let y = x.values() * beta + gaussian_matrix(n, 1, 5).column(0) * 2.0;

    let svd = x.svd()?;
    println!("n = {n}, p = {p}, rank = {}, d1 = {:.2}", svd.rank, svd.d[0]);
    println!("{:>10} {:>10} {:>10} {:>12}", "lambda", "tr(H)", "tr(HH')", "|beta|");
    for k in -2..=5 {
        let lambda = 10f64.powi(k);
        let fit = ridge_solve(&svd, &y, lambda)?;
        let (t1, t2) = hat_traces(&svd.d, lambda);
        assert!((t1 - fit.hat_trace).abs() < 1e-9);
        println!("{lambda:>10.0e} {:>10.3} {:>10.3} {:>12.5}", t1, t2, fit.beta_hat.norm());
    }
    Ok(())
}
