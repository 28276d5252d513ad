//! Coupled simulation of Hamiltonian and Markovian zigzag.
//!
//! On each refreshment interval [n dt, (n+1) dt] the Hamiltonian path
//! re-samples its momentum magnitudes as |p_i| = -ln(u_{n,i}) keeping the
//! signs, while the Markovian path consumes the same u_{n,i} for its first
//! event-time draws in the interval and fresh uniforms afterwards. While a
//! coordinate's rate stays nonnegative from the interval start, both
//! processes solve the same quadratic with the same random input, so their
//! paths are identical until a genuinely divergent event occurs. The
//! fraction of replicates that diverge on [0, T] shrinks linearly in dt,
//! which is the convergence mechanism this module measures.

use rand::Rng;
use rand_distr::{Distribution, Open01};
use rayon::prelude::*;
use thiserror::Error;

use crate::hamiltonian::{EventKind, HzzSim, HzzState, SimError};
use crate::markovian::{MzzSim, MzzState, UniformSource};
use crate::model::TruncatedGaussianTarget;
use crate::rng::stream_rng;

/// Sup-norm tolerance on (x, v) beyond which the paths count as diverged.
/// Truly coupled paths perform identical float arithmetic, but exact
/// equality is too brittle a definition after long chains of events.
pub const DIVERGENCE_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum CouplingError {
    #[error("the coupling construction requires an untruncated Gaussian target")]
    TruncatedTarget,
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Outcome of one coupled run. Both paths are simulated all the way to the
/// horizon; `diverged` and `t_div` record the first separation, if any.
#[derive(Clone, Debug)]
pub struct CoupledRun {
    pub delta_t: f64,
    pub horizon: f64,
    pub diverged: bool,
    /// First time the paths differed beyond [`DIVERGENCE_TOL`], when any.
    pub t_div: Option<f64>,
    pub hamiltonian_events: u64,
    pub markovian_events: u64,
    pub hamiltonian_final_position: Vec<f64>,
    pub markovian_final_position: Vec<f64>,
}

/// Feeds the shared interval uniforms to the first Markovian segment, then
/// fresh draws for any later segment in the same interval.
struct CoupledUniforms<'a, R: Rng> {
    shared: &'a [f64],
    first_segment: bool,
    rng: &'a mut R,
}

impl<R: Rng> UniformSource for CoupledUniforms<'_, R> {
    fn segment_uniforms(&mut self, out: &mut [f64]) {
        if self.first_segment {
            out.copy_from_slice(self.shared);
            self.first_segment = false;
        } else {
            for slot in out.iter_mut() {
                *slot = Open01.sample(self.rng);
            }
        }
    }
}

struct EventSnapshot {
    time: f64,
    x: Vec<f64>,
    v: Vec<f64>,
}

fn states_match(xa: &[f64], va: &[f64], xb: &[f64], vb: &[f64]) -> bool {
    xa.iter()
        .zip(xb)
        .all(|(a, b)| (a - b).abs() <= DIVERGENCE_TOL)
        && va
            .iter()
            .zip(vb)
            .all(|(a, b)| (a - b).abs() <= DIVERGENCE_TOL)
}

/// Runs the two coupled zigzags from a common state for t in [0, T] with
/// momentum-magnitude refreshments every `delta_t`, and reports whether and
/// when their (x, v) paths first differ. The comparison is made at every
/// velocity-switch event and at each interval boundary.
pub fn simulate_coupled<R: Rng>(
    x0: &[f64],
    v0: &[f64],
    delta_t: f64,
    horizon: f64,
    target: &TruncatedGaussianTarget,
    rng: &mut R,
) -> Result<CoupledRun, CouplingError> {
    if !target.is_untruncated() {
        return Err(CouplingError::TruncatedTarget);
    }
    let d = target.dim();
    // Momentum signs match v0; magnitudes are refreshed before any dynamics
    // runs, so the placeholder values never matter.
    let mut hzz = HzzState::new(x0.to_vec(), v0.to_vec(), target)?;
    let mut mzz = MzzState::new(x0.to_vec(), v0.to_vec(), target)?;
    let mut hzz_sim = HzzSim::new(target);
    let mut mzz_sim = MzzSim::new(target);

    let mut run = CoupledRun {
        delta_t,
        horizon,
        diverged: false,
        t_div: None,
        hamiltonian_events: 0,
        markovian_events: 0,
        hamiltonian_final_position: Vec::new(),
        markovian_final_position: Vec::new(),
    };

    let mut shared = vec![0.0; d];
    let mut elapsed = 0.0;
    while elapsed < horizon {
        let dt = delta_t.min(horizon - elapsed);
        for u in shared.iter_mut() {
            *u = Open01.sample(rng);
        }
        hzz.refresh_magnitudes(&shared);

        // Event snapshots are only needed while the paths still agree.
        let comparing = !run.diverged;
        let mut hzz_events: Vec<EventSnapshot> = Vec::new();
        let hzz_counts = hzz_sim.run(&mut hzz, dt, |record, state| {
            if comparing && record.kind == EventKind::Gradient {
                hzz_events.push(EventSnapshot {
                    time: record.time,
                    x: state.x.clone(),
                    v: state.v.clone(),
                });
            }
        })?;

        let mut mzz_events: Vec<EventSnapshot> = Vec::new();
        let mut uniforms = CoupledUniforms {
            shared: &shared,
            first_segment: true,
            rng,
        };
        let mzz_counts = mzz_sim.run(&mut mzz, dt, &mut uniforms, |record, state| {
            if comparing && record.kind == EventKind::Gradient {
                mzz_events.push(EventSnapshot {
                    time: record.time,
                    x: state.x.clone(),
                    v: state.v.clone(),
                });
            }
        })?;

        run.hamiltonian_events += hzz_counts.total();
        run.markovian_events += mzz_counts.total();

        if comparing {
            for (a, b) in hzz_events.iter().zip(&mzz_events) {
                if !states_match(&a.x, &a.v, &b.x, &b.v) {
                    run.diverged = true;
                    run.t_div = Some(a.time.min(b.time));
                    break;
                }
            }
            if !run.diverged && hzz_events.len() != mzz_events.len() {
                let first_unmatched = hzz_events
                    .get(mzz_events.len())
                    .or_else(|| mzz_events.get(hzz_events.len()))
                    .expect("one list is longer");
                run.diverged = true;
                run.t_div = Some(first_unmatched.time);
            }
            if !run.diverged && !states_match(&hzz.x, &hzz.v, &mzz.x, &mzz.v) {
                // An interval with no Markovian event cannot separate the
                // paths; reaching this branch without events would be a
                // coupling bug.
                debug_assert!(
                    !mzz_events.is_empty(),
                    "paths separated in an event-free interval"
                );
                run.diverged = true;
                run.t_div = Some(hzz.tau);
            }
        }
        elapsed += dt;
    }

    run.hamiltonian_final_position = hzz.x;
    run.markovian_final_position = mzz.x;
    Ok(run)
}

/// One row of the divergence table.
#[derive(Clone, Copy, Debug)]
pub struct DivergenceRow {
    pub delta_t: f64,
    pub replicates: u64,
    pub n_diverged: u64,
    pub p_hat: f64,
    pub std_err: f64,
}

/// Estimates the divergence probability on [0, T] for each refreshment
/// interval in `grid`, from independent coupled replicates. Replicates run
/// in parallel on RNG streams split from `seed`; aggregation is a count, so
/// the result does not depend on scheduling. Estimates carry binomial
/// standard errors; at least a few hundred replicates per grid point are
/// needed before those are meaningful.
pub fn divergence_rate(
    x0: &[f64],
    v0: &[f64],
    grid: &[f64],
    horizon: f64,
    target: &TruncatedGaussianTarget,
    replicates: u64,
    seed: u64,
) -> Result<Vec<DivergenceRow>, CouplingError> {
    if !target.is_untruncated() {
        return Err(CouplingError::TruncatedTarget);
    }
    let mut rows = Vec::with_capacity(grid.len());
    for (gi, &delta_t) in grid.iter().enumerate() {
        let n_diverged: u64 = (0..replicates)
            .into_par_iter()
            .map(|rep| {
                let mut rng = stream_rng(seed, ((gi as u64) << 32) | rep);
                let run = simulate_coupled(x0, v0, delta_t, horizon, target, &mut rng)?;
                Ok(u64::from(run.diverged))
            })
            .try_reduce(|| 0u64, |a, b| Ok(a + b))
            .map_err(|e: CouplingError| e)?;
        let p_hat = n_diverged as f64 / replicates as f64;
        let std_err = (p_hat * (1.0 - p_hat) / replicates as f64).sqrt();
        rows.push(DivergenceRow {
            delta_t,
            replicates,
            n_diverged,
            p_hat,
            std_err,
        });
    }
    Ok(rows)
}
