//! The momentum-refreshment limit, run as an experiment.
//!
//! ```bash
//! cargo run --release --example coupling_limit
//! ```
//!
//! Hamiltonian zigzag with its momentum magnitudes re-sampled every dt is
//! coupled to the Markovian zigzag through shared uniforms: while a
//! coordinate's rate stays nonnegative from the interval start, both solve
//! the same quadratic with the same random input and trace the same path.
//! The probability that the paths separate anywhere on [0, T] shrinks
//! linearly in dt, which is the sense in which Markovian zigzag is the
//! infinite-refreshment limit of Hamiltonian zigzag.

use zigzag_mc::coupling::{divergence_rate, simulate_coupled};
use zigzag_mc::model::TruncatedGaussianTarget;
use zigzag_mc::rng::stream_rng;

fn main() {
    let d = 16;
    let rho = 0.9;
    let target = TruncatedGaussianTarget::compound_symmetric(d, rho).unwrap();
    let width = (1.0 / (1.0 + (d as f64 - 1.0) * rho)).powf(-0.5);

    // One coupled run, inspected directly.
    let x0 = vec![0.0; d];
    let v0: Vec<f64> = (0..d).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let mut rng = stream_rng(11, 0);
    let run = simulate_coupled(&x0, &v0, 0.01 * width, 0.5 * width, &target, &mut rng).unwrap();
    println!(
        "single run at dt = {:.4}: diverged = {} (t_div = {:?}), {} vs {} events",
        run.delta_t, run.diverged, run.t_div, run.hamiltonian_events, run.markovian_events
    );

    // Divergence frequency across a halving grid of refreshment intervals.
    let grid: Vec<f64> = [4e-4, 2e-4, 1e-4, 5e-5].iter().map(|g| g * width).collect();
    let rows = divergence_rate(&x0, &v0, &grid, 0.5 * width, &target, 500, 13).unwrap();
    println!("divergence probability on [0, T], T = {:.3}:", 0.5 * width);
    println!("  {:>10}  {:>10}  {:>8}", "dt", "p_hat", "std_err");
    for row in &rows {
        println!(
            "  {:>10.6}  {:>10.4}  {:>8.4}",
            row.delta_t, row.p_hat, row.std_err
        );
    }
    for pair in rows.windows(2) {
        println!(
            "  halving dt from {:.6}: probability ratio {:.2}",
            pair[0].delta_t,
            pair[0].p_hat / pair[1].p_hat
        );
    }
}
