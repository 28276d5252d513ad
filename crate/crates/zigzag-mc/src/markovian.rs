//! Exact simulation of the Markovian zigzag process on (truncated) Gaussian
//! targets.
//!
//! Coordinate i flips its velocity at Poisson rate [v_i d_i U(x)]^+. On a
//! Gaussian the rate integrand is linear in time, so the inhomogeneous
//! event-time distribution inverts analytically: find the first time t_dag at
//! which the rate becomes nonnegative, then solve a quadratic for the time at
//! which the accumulated rate mass reaches -ln(u).

use rand::Rng;
use rand_distr::{Distribution, Open01};

use crate::hamiltonian::{
    boundary_event_times_into, min_positive_root, next_event, on_closed_support,
    snap_to_support, EventKind, EventRecord, SegmentCounts, SimError, DEFAULT_MAX_EVENTS,
};
use crate::model::TruncatedGaussianTarget;

/// Dense caches are rebuilt this often, as in the Hamiltonian simulator.
const DENSE_REBUILD_PERIOD: u64 = 1000;

/// Markovian zigzag state with cached matvecs; same caches as the
/// Hamiltonian state but no momentum.
#[derive(Clone, Debug)]
pub struct MzzState {
    pub x: Vec<f64>,
    /// Velocity in {+1, -1}^d.
    pub v: Vec<f64>,
    /// Cached Phi (x - mu).
    pub grad: Vec<f64>,
    /// Cached Phi v.
    pub grad_slope: Vec<f64>,
    /// Elapsed process time.
    pub tau: f64,
}

impl MzzState {
    pub fn new(
        x: Vec<f64>,
        v: Vec<f64>,
        target: &TruncatedGaussianTarget,
    ) -> Result<Self, SimError> {
        let d = target.dim();
        if x.len() != d || v.len() != d {
            return Err(SimError::DimensionMismatch {
                expected: d,
                got: x.len(),
            });
        }
        if !on_closed_support(&x, target.orthant()) {
            return Err(SimError::StartOutsideSupport);
        }
        let grad = target.gradient(&x);
        let grad_slope = target.precision().matvec(&v);
        Ok(MzzState {
            x,
            v,
            grad,
            grad_slope,
            tau: 0.0,
        })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn advance(&mut self, t: f64) {
        debug_assert!(t >= 0.0);
        for i in 0..self.x.len() {
            self.x[i] += t * self.v[i];
            self.grad[i] += t * self.grad_slope[i];
        }
        self.tau += t;
    }

    fn flip(&mut self, i: usize, target: &TruncatedGaussianTarget, col: &mut [f64]) {
        self.v[i] = -self.v[i];
        target.precision().column_into(i, col);
        let two_v = 2.0 * self.v[i];
        for (s, c) in self.grad_slope.iter_mut().zip(col.iter()) {
            *s += two_v * c;
        }
    }

    pub fn rebuild_caches(&mut self, target: &TruncatedGaussianTarget) {
        let centered: Vec<f64> = self
            .x
            .iter()
            .zip(target.mean())
            .map(|(a, b)| a - b)
            .collect();
        target.precision().matvec_into(&centered, &mut self.grad);
        target.precision().matvec_into(&self.v, &mut self.grad_slope);
    }
}

/// First s >= 0 at which the linear rate integrand
/// s -> v_i phi_x_i + s v_i phi_v_i becomes nonnegative: 0 when it already
/// is, the root -phi_x_i / phi_v_i when the slope will lift it there, and
/// +inf when the rate stays negative forever.
pub fn first_positive_time(v_i: f64, grad_i: f64, slope_i: f64) -> f64 {
    if v_i * grad_i >= 0.0 {
        0.0
    } else if v_i * slope_i > 0.0 {
        -grad_i / slope_i
    } else {
        f64::INFINITY
    }
}

/// Per-coordinate first time t >= t_dag_i at which the integrated positive
/// part of the rate reaches -ln(u_i), or +inf when the rate mass never does.
pub fn markovian_event_times(state: &MzzState, uniforms: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; state.dim()];
    markovian_event_times_into(state, uniforms, &mut out);
    out
}

pub(crate) fn markovian_event_times_into(state: &MzzState, uniforms: &[f64], out: &mut [f64]) {
    debug_assert_eq!(uniforms.len(), state.dim());
    for i in 0..state.dim() {
        let v = state.v[i];
        let rate0 = v * state.grad[i];
        let slope = v * state.grad_slope[i];
        let t_dag = first_positive_time(v, state.grad[i], state.grad_slope[i]);
        out[i] = if t_dag.is_finite() {
            // Quadratic in s = t - t_dag; shifting avoids cancellation near
            // t_dag, where the rate is zero by construction.
            let rate_at_dag = rate0 + t_dag * slope;
            t_dag + min_positive_root(0.5 * slope, rate_at_dag, uniforms[i].ln())
        } else {
            f64::INFINITY
        };
    }
}

/// Source of the per-segment uniform vector. The default draws fresh
/// Unif(0, 1) values; the coupling construction substitutes shared draws for
/// the first segment of each refreshment interval.
pub trait UniformSource {
    fn segment_uniforms(&mut self, out: &mut [f64]);
}

pub struct RngUniforms<'r, R: Rng + ?Sized>(pub &'r mut R);

impl<R: Rng + ?Sized> UniformSource for RngUniforms<'_, R> {
    fn segment_uniforms(&mut self, out: &mut [f64]) {
        for slot in out.iter_mut() {
            *slot = Open01.sample(self.0);
        }
    }
}

/// Reusable Markovian zigzag simulator holding per-run scratch buffers.
pub struct MzzSim<'a> {
    target: &'a TruncatedGaussianTarget,
    max_events: u64,
    uniforms: Vec<f64>,
    t_grad: Vec<f64>,
    t_bdry: Vec<f64>,
    col: Vec<f64>,
    events_since_rebuild: u64,
}

impl<'a> MzzSim<'a> {
    pub fn new(target: &'a TruncatedGaussianTarget) -> Self {
        let d = target.dim();
        MzzSim {
            target,
            max_events: DEFAULT_MAX_EVENTS,
            uniforms: vec![0.0; d],
            t_grad: vec![0.0; d],
            t_bdry: vec![0.0; d],
            col: vec![0.0; d],
            events_since_rebuild: 0,
        }
    }

    pub fn with_max_events(mut self, max_events: u64) -> Self {
        self.max_events = max_events;
        self
    }

    /// Runs the process for `duration` units of time. Fresh uniforms are
    /// drawn for all d coordinates at every linear segment; memorylessness
    /// makes discarding the unused ones valid. The observer fires after each
    /// applied flip and once at the final partial advance.
    pub fn run<U, F>(
        &mut self,
        state: &mut MzzState,
        duration: f64,
        uniforms: &mut U,
        mut observe: F,
    ) -> Result<SegmentCounts, SimError>
    where
        U: UniformSource,
        F: FnMut(&EventRecord, &MzzState),
    {
        debug_assert!(duration >= 0.0);
        let t_end = state.tau + duration;
        let mut counts = SegmentCounts::default();
        loop {
            uniforms.segment_uniforms(&mut self.uniforms);
            markovian_event_times_into(state, &self.uniforms, &mut self.t_grad);
            boundary_event_times_into(
                &state.x,
                &state.v,
                self.target.orthant(),
                &mut self.t_bdry,
            );
            let (t_star, i_star, kind) = next_event(&self.t_grad, &self.t_bdry);

            if state.tau + t_star >= t_end {
                let remaining = t_end - state.tau;
                if remaining > 0.0 {
                    state.advance(remaining);
                    snap_to_support(&mut state.x, self.target.orthant());
                } else {
                    state.tau = t_end;
                }
                observe(
                    &EventRecord {
                        time: state.tau,
                        kind: EventKind::SegmentEnd,
                        coord: None,
                    },
                    state,
                );
                return Ok(counts);
            }

            state.advance(t_star);
            snap_to_support(&mut state.x, self.target.orthant());
            match kind {
                EventKind::Gradient => counts.gradient += 1,
                EventKind::Boundary => {
                    // Velocity-only reflection; pin the coordinate to the
                    // hyperplane exactly.
                    state.x[i_star] = 0.0;
                    counts.boundary += 1;
                }
                _ => unreachable!(),
            }
            state.flip(i_star, self.target, &mut self.col);
            observe(
                &EventRecord {
                    time: state.tau,
                    kind,
                    coord: Some(i_star),
                },
                state,
            );

            if counts.total() > self.max_events {
                return Err(SimError::EventStarvation(self.max_events));
            }
            self.events_since_rebuild += 1;
            if !self.target.precision().is_structured()
                && self.events_since_rebuild >= DENSE_REBUILD_PERIOD
            {
                state.rebuild_caches(self.target);
                self.events_since_rebuild = 0;
            }
        }
    }
}

/// Simulates the process for t in [0, T], collecting the event log.
pub fn simulate<R: Rng + ?Sized>(
    x0: &[f64],
    v0: &[f64],
    duration: f64,
    target: &TruncatedGaussianTarget,
    rng: &mut R,
) -> Result<(MzzState, Vec<EventRecord>), SimError> {
    let mut state = MzzState::new(x0.to_vec(), v0.to_vec(), target)?;
    let mut log = Vec::new();
    let mut sim = MzzSim::new(target);
    let mut uniforms = RngUniforms(rng);
    sim.run(&mut state, duration, &mut uniforms, |record, _| {
        log.push(*record)
    })?;
    Ok((state, log))
}
