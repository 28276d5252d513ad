//! How far do the two zigzags travel per event?
//!
//! ```bash
//! cargo run --release --example two_zigzags_race
//! ```
//!
//! Both processes start at x = -1 on a strongly autocorrelated AR(1)
//! Gaussian with the same initial velocity and run for the same number of
//! velocity-switch events. The Hamiltonian path stores kinetic energy on
//! potential downhills and keeps moving through small gradient
//! fluctuations, so its squared distance from the start crosses the
//! independent-sample benchmark trace(Sigma) + |mean - x0|^2 long before
//! the Markovian path diffuses anywhere near it.

use zigzag_mc::diagnostics::{expected_squared_distance, squared_distance};
use zigzag_mc::hamiltonian::{EventKind, HzzSim, HzzState};
use zigzag_mc::markovian::{MzzSim, MzzState, RngUniforms};
use zigzag_mc::model::TruncatedGaussianTarget;
use zigzag_mc::rng::{laplace, stream_rng};

fn main() {
    let d = 256;
    let target = TruncatedGaussianTarget::ar1(d, 0.99).unwrap();
    let x0 = vec![-1.0; d];
    let benchmark = expected_squared_distance(&target, &x0).unwrap();
    let budget = 50_000u64;
    println!("benchmark |x - x0|^2 for an independent draw: {benchmark:.0}");

    let mut rng = stream_rng(31, 0);
    let p0: Vec<f64> = (0..d).map(|_| laplace(&mut rng)).collect();
    let v0: Vec<f64> = p0.iter().map(|&p| if p >= 0.0 { 1.0 } else { -1.0 }).collect();

    // Hamiltonian zigzag, no refreshment.
    let mut hzz = HzzState::new(x0.clone(), p0, &target).unwrap();
    let mut hzz_sim = HzzSim::new(&target);
    let mut hzz_curve = vec![0.0];
    let mut chunk = 1.0;
    while (hzz_curve.len() as u64) <= budget {
        let before = hzz_curve.len();
        hzz_sim
            .run(&mut hzz, chunk, |rec, s| {
                if rec.kind != EventKind::SegmentEnd && (hzz_curve.len() as u64) <= budget {
                    hzz_curve.push(squared_distance(&s.x, &x0));
                }
            })
            .unwrap();
        if hzz_curve.len() == before {
            chunk *= 2.0;
        }
    }

    // Markovian zigzag from the same position and velocity.
    let mut mzz = MzzState::new(x0.clone(), v0, &target).unwrap();
    let mut mzz_sim = MzzSim::new(&target);
    let mut mzz_curve = vec![0.0];
    let mut chunk = 1.0;
    while (mzz_curve.len() as u64) <= budget {
        let before = mzz_curve.len();
        let mut uniforms = RngUniforms(&mut rng);
        mzz_sim
            .run(&mut mzz, chunk, &mut uniforms, |rec, s| {
                if rec.kind != EventKind::SegmentEnd && (mzz_curve.len() as u64) <= budget {
                    mzz_curve.push(squared_distance(&s.x, &x0));
                }
            })
            .unwrap();
        if mzz_curve.len() == before {
            chunk *= 2.0;
        }
    }

    println!("squared distance from x0 by event count:");
    println!("  {:>8}  {:>12}  {:>12}", "events", "hamiltonian", "markovian");
    for &k in &[100usize, 1000, 5000, 10_000, 25_000, 50_000] {
        println!(
            "  {:>8}  {:>12.1}  {:>12.1}",
            k, hzz_curve[k], mzz_curve[k]
        );
    }
    let crossing = hzz_curve.iter().position(|&v| v > benchmark);
    println!("hamiltonian first crossed the benchmark at event {crossing:?}");
}
