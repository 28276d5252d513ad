//! Constructing Gaussian targets and tuning quantities.
//!
//! ```bash
//! cargo run --release --example build_targets
//! ```
//!
//! Covers the structured precision families (compound-symmetric and AR(1)),
//! orthant truncation, the file format for externally supplied targets, and
//! the Lanczos smallest-eigenvalue estimate that sets the NUTS base
//! integration time.

use zigzag_mc::model::{base_integration_time, min_eigenvalue, TruncatedGaussianTarget};
use zigzag_mc::rng::stream_rng;

fn main() {
    // Compound-symmetric: unit variances, constant correlation rho. The
    // precision has an O(d) matvec, so no factorization is ever needed.
    let d = 1024;
    let rho = 0.99;
    let cs = TruncatedGaussianTarget::compound_symmetric(d, rho).unwrap();
    println!("compound-symmetric d = {d}, rho = {rho}");

    // Smallest precision eigenvalue via Lanczos; for this family it equals
    // 1 / (1 + (d-1) rho) analytically.
    let mut rng = stream_rng(1, 0);
    let est = min_eigenvalue(cs.precision(), 1e-10, 200, &mut rng);
    let analytic = 1.0 / (1.0 + (d as f64 - 1.0) * rho);
    println!(
        "  nu_min = {:.6e} (analytic {:.6e}) in {} matvecs",
        est.nu_min, analytic, est.iterations_used
    );

    // The tuning-free NUTS schedule uses delta_t = nu_min^{-1/2} * t_rel.
    let delta_t = base_integration_time(cs.precision(), 0.1, &mut rng).unwrap();
    println!("  base integration time (t_rel = 0.1): {delta_t:.4}");

    // AR(1): tridiagonal precision, also O(d).
    let ar = TruncatedGaussianTarget::ar1(8, 0.9).unwrap();
    println!(
        "ar1 d = 8: precision row 3 = {:?}",
        &ar.precision().column(3)[1..6]
    );

    // Orthant truncation restricts coordinates to half-lines.
    let truncated = TruncatedGaussianTarget::compound_symmetric(4, 0.5)
        .unwrap()
        .with_positive_orthant();
    println!(
        "positive orthant contains (1,1,1,1): {}",
        truncated.contains(&[1.0; 4])
    );
    println!(
        "positive orthant contains (1,-1,1,1): {}",
        truncated.contains(&[1.0, -1.0, 1.0, 1.0])
    );

    // External targets load from a plain-text file: dimension, mean,
    // precision rows, and an orthant line of +1 / -1 / * tokens.
    let text = "\
# 2-D standard Gaussian restricted to x1 > 0
2
0 0
1 0
0 1
+1 *
";
    let loaded = TruncatedGaussianTarget::parse(text).unwrap();
    println!(
        "loaded file target: d = {}, orthant = {:?}",
        loaded.dim(),
        loaded.orthant()
    );
}
