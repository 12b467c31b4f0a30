//! The bounded optimizers behind every likelihood-based estimator.
//!
//! `cargo run --example optimize`

use ridgepen::optim::{maximize_1d, maximize_nd, OptBounds};

fn main() -> ridgepen::Result<()> {
    // two bumps; the scan finds the narrow global one
    let f = |x: f64| (-(x - 1.0).powi(2)).exp() + 2.0 * (-(x - 8.0).powi(2) / 0.5).exp();
    let r = maximize_1d(f, &OptBounds::scalar(0.0, 10.0)?)?;
    println!("1-d: argmax {:.8}, value {:.6}, {} evaluations", r.argmax, r.value, r.evaluations);

    let rosen = |x: &[f64]| -(1.0 - x[0]).powi(2) - 100.0 * (x[1] - x[0] * x[0]).powi(2);
    let b = OptBounds::new(vec![-2.0, -1.0], vec![2.0, 3.0])?;
    let r = maximize_nd(rosen, &[-1.2, 1.0], &b)?;
    println!(
        "2-d: argmax ({:.8}, {:.8}), converged {}, gradient norm {:.1e}",
        r.argmax[0], r.argmax[1], r.converged, r.gradient_norm
    );

    // maximum on the boundary is reported as such
    let r = maximize_nd(|x: &[f64]| x[0] + x[1], &[0.0, 0.0], &OptBounds::new(vec![-1.0, -1.0], vec![1.0, 2.0])?)?;
    println!("corner: argmax ({:.6}, {:.6}), at_bound {}", r.argmax[0], r.argmax[1], r.at_bound);
    Ok(())
}
