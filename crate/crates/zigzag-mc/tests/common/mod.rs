//! Shared oracles for the acceptance suite. Everything here is independent
//! of the implementation paths it checks: rejection sampling for truncated
//! Gaussian moments, and a bisection-plus-sign-scan root finder.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use zigzag_mc::rng::stream_rng;

/// Rejection-sampling oracle for the 2-D compound-symmetric (rho = 0.5)
/// Gaussian restricted to the positive quadrant: draw from the untruncated
/// Gaussian via its Cholesky factor and keep points with both coordinates
/// positive.
pub fn rejection_oracle_2d(n_accept: usize, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = stream_rng(seed, 0);
    let l21 = 0.5;
    let l22 = (1.0f64 - 0.25).sqrt();
    let mut out = Vec::with_capacity(n_accept);
    while out.len() < n_accept {
        let z1: f64 = StandardNormal.sample(&mut rng);
        let z2: f64 = StandardNormal.sample(&mut rng);
        let x1 = z1;
        let x2 = l21 * z1 + l22 * z2;
        if x1 > 0.0 && x2 > 0.0 {
            out.push([x1, x2]);
        }
    }
    out
}

pub fn mean_and_variance(series: &[f64]) -> (f64, f64) {
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let var = series.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var)
}

/// Smallest root of a t^2 + b t + c in [lo, hi] found by scanning a
/// log-spaced grid (plus the vertex and the linear root as breakpoints) for
/// sign changes and bisecting. Returns `None` when no sign change or exact
/// zero is found in the window.
pub fn scan_root_oracle(a: f64, b: f64, c: f64, lo: f64, hi: f64) -> Option<f64> {
    if a == 0.0 && b == 0.0 {
        // Constant polynomial: no crossing (the identically-zero case has no
        // smallest positive root either).
        return None;
    }
    let f = |t: f64| a * t * t + b * t + c;

    let mut points: Vec<f64> = Vec::with_capacity(280);
    let steps = 256;
    let ratio = (hi / lo).ln();
    for k in 0..=steps {
        points.push(lo * (ratio * k as f64 / steps as f64).exp());
    }
    if a != 0.0 {
        let vertex = -b / (2.0 * a);
        if vertex > lo && vertex < hi {
            points.push(vertex);
        }
    }
    if b != 0.0 {
        let linear = -c / b;
        if linear > lo && linear < hi {
            points.push(linear);
        }
    }
    points.sort_by(|x, y| x.partial_cmp(y).unwrap());

    let mut prev_t = points[0];
    let mut prev_f = f(prev_t);
    if prev_f == 0.0 {
        return Some(prev_t);
    }
    for &t in &points[1..] {
        let ft = f(t);
        if ft == 0.0 {
            return Some(t);
        }
        if prev_f.signum() != ft.signum() {
            // Bisect [prev_t, t].
            let mut lo_t = prev_t;
            let mut hi_t = t;
            let mut lo_f = prev_f;
            for _ in 0..200 {
                let mid = 0.5 * (lo_t + hi_t);
                if mid <= lo_t || mid >= hi_t {
                    break;
                }
                let fm = f(mid);
                if fm == 0.0 {
                    return Some(mid);
                }
                if fm.signum() == lo_f.signum() {
                    lo_t = mid;
                    lo_f = fm;
                } else {
                    hi_t = mid;
                }
            }
            return Some(0.5 * (lo_t + hi_t));
        }
        prev_t = t;
        prev_f = ft;
    }
    None
}

/// Draws one fuzz triple: uniform coefficients with occasional exact zeros
/// to hit the degenerate branches.
pub fn fuzz_triple<R: Rng>(rng: &mut R) -> (f64, f64, f64) {
    let mut draw = |zero_prob: f64| {
        if rng.random::<f64>() < zero_prob {
            0.0
        } else {
            rng.random_range(-1.0..1.0)
        }
    };
    (draw(0.1), draw(0.1), draw(0.1))
}
