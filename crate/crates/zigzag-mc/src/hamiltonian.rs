//! Exact simulation of Laplace-momentum Hamiltonian dynamics on (truncated)
//! Gaussian targets.
//!
//! Between velocity switches the position moves linearly, the momentum
//! quadratically: p(t) = p - t phi_x - t^2/2 phi_v with phi_x = Phi (x - mu)
//! and phi_v = Phi v. A gradient event happens when some p_i crosses zero, a
//! boundary event when a constrained coordinate hits its hyperplane; both
//! flip the velocity coordinate, and the cached vectors are updated with one
//! column extraction instead of a full matvec.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use thiserror::Error;

use crate::model::{Constraint, PrecisionOp, TruncatedGaussianTarget};

/// Roots at or below this are treated as non-positive, so instantaneous
/// re-fires after an event cannot loop.
pub const ROOT_EPS: f64 = 1e-14;

/// Default event budget before a simulation aborts.
pub const DEFAULT_MAX_EVENTS: u64 = 100_000_000;

/// Dense precision caches are rebuilt from scratch this often to bound drift;
/// structured forms are exact under incremental updates and never rebuilt.
const DENSE_REBUILD_PERIOD: u64 = 1000;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("event starvation: exceeded {0} events before reaching the time horizon")]
    EventStarvation(u64),
    #[error("initial position lies outside the target support")]
    StartOutsideSupport,
    #[error("state dimension {got} does not match target dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventKind {
    Gradient,
    Boundary,
    Refresh,
    SegmentEnd,
}

#[derive(Clone, Copy, Debug)]
pub struct EventRecord {
    /// Elapsed dynamics time at the event.
    pub time: f64,
    pub kind: EventKind,
    pub coord: Option<usize>,
}

/// Velocity-switch counts for one simulated stretch.
#[derive(Clone, Copy, Debug, Default)]
pub struct SegmentCounts {
    pub gradient: u64,
    pub boundary: u64,
}

impl SegmentCounts {
    pub fn total(&self) -> u64 {
        self.gradient + self.boundary
    }
}

/// Hamiltonian zigzag state with cached matvecs.
#[derive(Clone, Debug)]
pub struct HzzState {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    /// sign(p), with sign(0) = +1.
    pub v: Vec<f64>,
    /// Cached Phi (x - mu).
    pub grad: Vec<f64>,
    /// Cached Phi v.
    pub grad_slope: Vec<f64>,
    /// Elapsed dynamics time.
    pub tau: f64,
}

impl HzzState {
    pub fn new(
        x: Vec<f64>,
        p: Vec<f64>,
        target: &TruncatedGaussianTarget,
    ) -> Result<Self, SimError> {
        let d = target.dim();
        if x.len() != d || p.len() != d {
            return Err(SimError::DimensionMismatch {
                expected: d,
                got: x.len(),
            });
        }
        if !on_closed_support(&x, target.orthant()) {
            return Err(SimError::StartOutsideSupport);
        }
        let v: Vec<f64> = p.iter().map(|&pi| sign(pi)).collect();
        let grad = target.gradient(&x);
        let grad_slope = target.precision().matvec(&v);
        Ok(HzzState {
            x,
            p,
            v,
            grad,
            grad_slope,
            tau: 0.0,
        })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// Advances the free flight by `t`; valid only if no event occurs
    /// strictly inside (0, t).
    pub fn advance(&mut self, t: f64) {
        debug_assert!(t >= 0.0);
        for i in 0..self.x.len() {
            self.x[i] += t * self.v[i];
            self.p[i] -= t * self.grad[i] + 0.5 * t * t * self.grad_slope[i];
            self.grad[i] += t * self.grad_slope[i];
        }
        self.tau += t;
    }

    /// Momentum zero-crossing at coordinate `i`: flip the velocity and patch
    /// the cached Phi v with one column extraction. `col` is scratch space.
    pub fn apply_gradient_event(&mut self, i: usize, precision: &PrecisionOp, col: &mut [f64]) {
        // p_i is zero at the event by definition; write it exactly so later
        // root solves on this coordinate start clean.
        debug_assert!(self.p[i].abs() < 1e-9, "gradient event with |p| = {}", self.p[i]);
        self.p[i] = 0.0;
        self.v[i] = -self.v[i];
        precision.column_into(i, col);
        let two_v = 2.0 * self.v[i]; // post-flip sign convention
        for (s, c) in self.grad_slope.iter_mut().zip(col.iter()) {
            *s += two_v * c;
        }
    }

    /// Boundary reflection at coordinate `i`: momentum and velocity flip,
    /// preserving |p_i| and hence the total energy.
    pub fn apply_boundary_event(&mut self, i: usize, precision: &PrecisionOp, col: &mut [f64]) {
        self.x[i] = 0.0;
        self.p[i] = -self.p[i];
        self.v[i] = -self.v[i];
        precision.column_into(i, col);
        let two_v = 2.0 * self.v[i];
        for (s, c) in self.grad_slope.iter_mut().zip(col.iter()) {
            *s += two_v * c;
        }
    }

    /// Draws p_i ~ Laplace(scale = 1) i.i.d., resets v = sign(p), and
    /// recomputes the velocity cache with a fresh matvec.
    pub fn refresh_momentum<R: Rng + ?Sized>(
        &mut self,
        target: &TruncatedGaussianTarget,
        rng: &mut R,
    ) {
        for pi in self.p.iter_mut() {
            let magnitude: f64 = Exp1.sample(rng);
            *pi = if rng.random::<bool>() {
                magnitude
            } else {
                -magnitude
            };
        }
        for (vi, pi) in self.v.iter_mut().zip(&self.p) {
            *vi = sign(*pi);
        }
        target.precision().matvec_into(&self.v, &mut self.grad_slope);
    }

    /// Re-samples only the momentum magnitudes |p_i| = -ln(u_i), keeping the
    /// current signs (the refreshment used in the coupling construction).
    pub fn refresh_magnitudes(&mut self, uniforms: &[f64]) {
        debug_assert_eq!(uniforms.len(), self.p.len());
        for ((pi, vi), u) in self.p.iter_mut().zip(&self.v).zip(uniforms) {
            *pi = vi * (-u.ln());
        }
    }

    /// Negates momentum and velocity (and the Phi v cache, exactly).
    pub fn negate_momentum(&mut self) {
        for pi in self.p.iter_mut() {
            *pi = -*pi;
        }
        for vi in self.v.iter_mut() {
            *vi = -*vi;
        }
        for si in self.grad_slope.iter_mut() {
            *si = -*si;
        }
    }

    /// Total energy H = (x-mu)^T Phi (x-mu) / 2 + sum |p_i|, from the cached
    /// gradient.
    pub fn energy(&self, target: &TruncatedGaussianTarget) -> f64 {
        let potential: f64 = 0.5
            * self
                .x
                .iter()
                .zip(target.mean())
                .zip(&self.grad)
                .map(|((xi, mi), gi)| (xi - mi) * gi)
                .sum::<f64>();
        let kinetic: f64 = self.p.iter().map(|p| p.abs()).sum();
        potential + kinetic
    }

    /// Rebuilds both caches from scratch.
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

fn sign(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// States live on the closed support: a coordinate may sit exactly on its
/// hyperplane at an event instant.
pub(crate) fn on_closed_support(x: &[f64], orthant: &[Constraint]) -> bool {
    x.iter().zip(orthant).all(|(&xi, c)| match c {
        Constraint::Free => true,
        Constraint::Positive => xi >= 0.0,
        Constraint::Negative => xi <= 0.0,
    })
}

/// Rounds float dust from a linear advance back onto the boundary
/// hyperplane; a legal segment never truly crosses.
pub(crate) fn snap_to_support(x: &mut [f64], orthant: &[Constraint]) {
    for (xi, c) in x.iter_mut().zip(orthant) {
        let violated = match c {
            Constraint::Free => false,
            Constraint::Positive => *xi < 0.0,
            Constraint::Negative => *xi > 0.0,
        };
        if violated {
            debug_assert!(xi.abs() < 1e-9, "support violation beyond float dust: {xi}");
            *xi = 0.0;
        }
    }
}

/// Smallest t > 0 with a t^2 + b t + c = 0, or +inf when none exists.
/// Degenerate a = 0 is solved as a linear equation; a = b = 0 has no root.
pub fn min_positive_root(a: f64, b: f64, c: f64) -> f64 {
    if !c.is_finite() {
        return f64::INFINITY;
    }
    if a == 0.0 {
        if b == 0.0 {
            return f64::INFINITY;
        }
        let t = -c / b;
        return if t > ROOT_EPS { t } else { f64::INFINITY };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return f64::INFINITY;
    }
    let sqrt_disc = disc.sqrt();
    // Larger-magnitude root first, companion from c/(a q); stable near
    // cancellation.
    let q = if b >= 0.0 {
        -0.5 * (b + sqrt_disc)
    } else {
        -0.5 * (b - sqrt_disc)
    };
    let mut best = f64::INFINITY;
    if q != 0.0 {
        let r1 = q / a;
        let r2 = c / q;
        if r1 > ROOT_EPS {
            best = r1;
        }
        if r2 > ROOT_EPS && r2 < best {
            best = r2;
        }
    }
    best
}

/// Per-coordinate time until the momentum reaches zero:
/// p_i = t phi_x_i + t^2/2 phi_v_i.
pub fn gradient_event_times(state: &HzzState) -> Vec<f64> {
    let mut out = vec![0.0; state.dim()];
    gradient_event_times_into(state, &mut out);
    out
}

pub(crate) fn gradient_event_times_into(state: &HzzState, out: &mut [f64]) {
    for i in 0..state.dim() {
        let p = state.p[i];
        let v = state.v[i];
        out[i] = if v * p < 0.0 {
            // The momentum already crossed zero: a transversal crossing
            // missed by float dust when another coordinate won a near-tied
            // event. Fire now.
            0.0
        } else if p == 0.0 {
            // At a flip instant. The coordinate that just flipped has the
            // gradient aligned with its new velocity and must not re-fire;
            // a coordinate whose momentum reaches zero exactly when another
            // event wins the tie has the gradient opposing its velocity and
            // flips immediately.
            if v * state.grad[i] > 0.0 {
                0.0
            } else {
                min_positive_root(0.5 * state.grad_slope[i], state.grad[i], 0.0)
            }
        } else {
            min_positive_root(0.5 * state.grad_slope[i], state.grad[i], -p)
        };
    }
}

/// Per-coordinate time until a constrained coordinate reaches its boundary
/// hyperplane {x_i = 0}; unconstrained coordinates never do.
pub fn boundary_event_times(x: &[f64], v: &[f64], orthant: &[Constraint]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    boundary_event_times_into(x, v, orthant, &mut out);
    out
}

pub(crate) fn boundary_event_times_into(
    x: &[f64],
    v: &[f64],
    orthant: &[Constraint],
    out: &mut [f64],
) {
    for i in 0..x.len() {
        let outward = match orthant[i] {
            Constraint::Free => false,
            Constraint::Positive => v[i] < 0.0,
            Constraint::Negative => v[i] > 0.0,
        };
        out[i] = if !outward {
            f64::INFINITY
        } else {
            let t = -x[i] / v[i];
            // A coordinate sitting exactly on its hyperplane (or past it by
            // float dust) while moving outward reflects immediately;
            // otherwise events at the horizon would let it slip through.
            if t > 0.0 {
                t
            } else {
                0.0
            }
        };
    }
}

/// Picks the winning event: strictly smaller time wins, the lowest index
/// breaks coordinate ties, and a boundary beats a gradient event at exactly
/// equal times (the reflection also flips momentum, keeping x in the closed
/// support).
pub(crate) fn next_event(t_grad: &[f64], t_bdry: &[f64]) -> (f64, usize, EventKind) {
    let mut best_t = f64::INFINITY;
    let mut best_i = 0;
    let mut best_kind = EventKind::Gradient;
    for (i, &t) in t_bdry.iter().enumerate() {
        if t < best_t {
            best_t = t;
            best_i = i;
            best_kind = EventKind::Boundary;
        }
    }
    for (i, &t) in t_grad.iter().enumerate() {
        if t < best_t {
            best_t = t;
            best_i = i;
            best_kind = EventKind::Gradient;
        }
    }
    (best_t, best_i, best_kind)
}

/// Reusable Hamiltonian zigzag simulator holding per-run scratch buffers.
pub struct HzzSim<'a> {
    target: &'a TruncatedGaussianTarget,
    max_events: u64,
    t_grad: Vec<f64>,
    t_bdry: Vec<f64>,
    col: Vec<f64>,
    events_since_rebuild: u64,
}

impl<'a> HzzSim<'a> {
    pub fn new(target: &'a TruncatedGaussianTarget) -> Self {
        let d = target.dim();
        HzzSim {
            target,
            max_events: DEFAULT_MAX_EVENTS,
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

    pub fn target(&self) -> &TruncatedGaussianTarget {
        self.target
    }

    /// Runs the exact dynamics for `duration` units of time, invoking
    /// `observe` after every applied event and once at the final partial
    /// advance (kind `SegmentEnd`). An event landing exactly on the horizon
    /// is not applied: the simulated window is half-open.
    pub fn run<F>(
        &mut self,
        state: &mut HzzState,
        duration: f64,
        mut observe: F,
    ) -> Result<SegmentCounts, SimError>
    where
        F: FnMut(&EventRecord, &HzzState),
    {
        debug_assert!(duration >= 0.0);
        let t_end = state.tau + duration;
        let mut counts = SegmentCounts::default();
        loop {
            gradient_event_times_into(state, &mut self.t_grad);
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
                EventKind::Gradient => {
                    state.apply_gradient_event(i_star, self.target.precision(), &mut self.col);
                    counts.gradient += 1;
                }
                EventKind::Boundary => {
                    state.apply_boundary_event(i_star, self.target.precision(), &mut self.col);
                    counts.boundary += 1;
                }
                _ => unreachable!(),
            }
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

/// Deterministic trajectory simulation for t in [0, T], collecting the event
/// log. See [`HzzSim::run`] for the streaming variant.
pub fn simulate(
    x0: &[f64],
    p0: &[f64],
    duration: f64,
    target: &TruncatedGaussianTarget,
) -> Result<(HzzState, Vec<EventRecord>), SimError> {
    let mut state = HzzState::new(x0.to_vec(), p0.to_vec(), target)?;
    let mut log = Vec::new();
    let mut sim = HzzSim::new(target);
    sim.run(&mut state, duration, |record, _| log.push(*record))?;
    Ok((state, log))
}
