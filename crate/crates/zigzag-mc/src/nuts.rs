//! No-U-turn driver over Hamiltonian zigzag.
//!
//! A transition refreshes the Laplace momentum, then grows a binary
//! trajectory tree by doubling: each level extends the trajectory by
//! 2^depth exact segments of length delta_t in a uniformly chosen time
//! direction (backward simulation negates momentum, valid by
//! reversibility). Growth stops at the first U-turn or at the depth cap.
//!
//! Because the dynamics is exact, the energy is constant across the tree and
//! all leaves have equal weight in the augmented target. The candidate
//! bookkeeping below is the standard doubling scheme with those degenerate
//! weights: within a new subtree the candidate is uniform among its leaves,
//! and a completed doubling always hands the candidate over since the new
//! subtree matches the old tree leaf for leaf. A subtree that develops an
//! internal U-turn is rejected wholesale. Energy flatness across leaves is
//! tracked as a correctness tripwire in place of step-size divergence
//! checks.

use rand::Rng;

use crate::hamiltonian::{HzzSim, HzzState, SimError};
use crate::model::TruncatedGaussianTarget;

/// Configuration for a single NUTS transition.
#[derive(Clone, Copy, Debug)]
pub struct NutsConfig {
    /// Base integration time; the doubling unit.
    pub delta_t: f64,
    /// Maximum number of completed doublings.
    pub max_depth: u32,
}

impl NutsConfig {
    pub fn new(delta_t: f64) -> Self {
        NutsConfig {
            delta_t,
            max_depth: 10,
        }
    }

    pub fn with_max_depth(mut self, max_depth: u32) -> Self {
        self.max_depth = max_depth;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TerminationReason {
    /// U-turn across the full tree.
    UTurn,
    /// U-turn inside the newest subtree; the doubling was rejected.
    UTurnInSubtree,
    /// Depth cap reached; not an error.
    DepthCap,
}

#[derive(Clone, Copy, Debug)]
pub struct NutsStats {
    /// Completed doublings.
    pub depth: u32,
    /// Leaves of the accepted tree, the root included.
    pub leaves: u64,
    pub gradient_events: u64,
    pub boundary_events: u64,
    pub terminated: TerminationReason,
    /// max over visited leaves of |H(leaf) - H(root)| / max(1, |H(root)|).
    pub energy_rel_error: f64,
}

impl NutsStats {
    pub fn events(&self) -> u64 {
        self.gradient_events + self.boundary_events
    }
}

/// Velocity-based U-turn criterion on the two ends of a (sub)tree: the tree
/// has U-turned when the end-to-end displacement opposes the direction of
/// motion at either end. Under Laplace momentum the magnitudes |p_i| have
/// unbounded scale, so displacement is paired with sign(p) rather than p.
pub fn u_turn(x_minus: &[f64], p_minus: &[f64], x_plus: &[f64], p_plus: &[f64]) -> bool {
    let mut dot_minus = 0.0;
    let mut dot_plus = 0.0;
    for i in 0..x_minus.len() {
        let dx = x_plus[i] - x_minus[i];
        dot_minus += dx * sign(p_minus[i]);
        dot_plus += dx * sign(p_plus[i]);
    }
    dot_minus < 0.0 || dot_plus < 0.0
}

fn sign(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

fn u_turn_states(left: &HzzState, right: &HzzState) -> bool {
    u_turn(&left.x, &left.p, &right.x, &right.p)
}

/// One NUTS transition from `x0`. Returns the selected position and
/// per-transition statistics.
pub fn nuts_transition<R: Rng + ?Sized>(
    x0: &[f64],
    target: &TruncatedGaussianTarget,
    config: &NutsConfig,
    rng: &mut R,
) -> Result<(Vec<f64>, NutsStats), SimError> {
    let mut root = HzzState::new(x0.to_vec(), vec![1.0; x0.len()], target)?;
    root.refresh_momentum(target, rng);
    let h0 = root.energy(target);

    let mut sim = HzzSim::new(target);
    let mut left = root.clone();
    let mut right = root.clone();
    let mut candidate = root.x.clone();
    let mut stats = NutsStats {
        depth: 0,
        leaves: 1,
        gradient_events: 0,
        boundary_events: 0,
        terminated: TerminationReason::DepthCap,
        energy_rel_error: 0.0,
    };

    loop {
        let forward = rng.random::<bool>();
        let steps = 1u64 << stats.depth;
        let grown = if forward {
            grow_subtree(
                &mut sim, target, &right, steps, config.delta_t, h0, &mut stats, rng,
            )?
        } else {
            let mut seed = left.clone();
            seed.negate_momentum();
            grow_subtree(
                &mut sim, target, &seed, steps, config.delta_t, h0, &mut stats, rng,
            )?
        };
        let Some((sub_candidate, mut new_end)) = grown else {
            stats.terminated = TerminationReason::UTurnInSubtree;
            break;
        };
        if forward {
            right = new_end;
        } else {
            new_end.negate_momentum();
            left = new_end;
        }
        // The new subtree has exactly as many leaves as the current tree, so
        // the standard min(1, n_new/n_old) handover is certain.
        candidate = sub_candidate;
        stats.leaves += steps;
        stats.depth += 1;

        if u_turn_states(&left, &right) {
            stats.terminated = TerminationReason::UTurn;
            break;
        }
        if stats.depth > config.max_depth {
            stats.terminated = TerminationReason::DepthCap;
            break;
        }
    }
    Ok((candidate, stats))
}

/// Simulates `steps` consecutive delta_t segments from `from` (exclusive),
/// checking every balanced subtree for a U-turn as it completes. Returns
/// `None` when an internal U-turn stops the doubling, otherwise a candidate
/// drawn uniformly among the new leaves and the outermost new state.
///
/// Works entirely in the forward frame of `from`: the U-turn criterion is
/// invariant under negating both momenta and swapping the ends, so backward
/// extensions can reuse it unchanged. Only O(log steps) states are held.
#[allow(clippy::too_many_arguments)]
fn grow_subtree<R: Rng + ?Sized>(
    sim: &mut HzzSim<'_>,
    target: &TruncatedGaussianTarget,
    from: &HzzState,
    steps: u64,
    delta_t: f64,
    h0: f64,
    stats: &mut NutsStats,
    rng: &mut R,
) -> Result<Option<(Vec<f64>, HzzState)>, SimError> {
    let levels = steps.trailing_zeros() as usize + 1;
    let mut span_starts: Vec<Option<HzzState>> = vec![None; levels];
    let mut cur = from.clone();
    let mut candidate: Option<Vec<f64>> = None;

    for i in 0..steps {
        let counts = sim.run(&mut cur, delta_t, |_, _| {})?;
        stats.gradient_events += counts.gradient;
        stats.boundary_events += counts.boundary;

        let h = cur.energy(target);
        let rel = (h - h0).abs() / h0.abs().max(1.0);
        if rel > stats.energy_rel_error {
            stats.energy_rel_error = rel;
        }

        // Uniform reservoir over the leaves generated so far.
        if rng.random_range(0..=i) == 0 {
            candidate = Some(cur.x.clone());
        }

        // Leaf i begins every balanced span whose size divides its index;
        // record those starts, then check each span that ends here.
        for (lvl, slot) in span_starts.iter_mut().enumerate().skip(1) {
            let size = 1u64 << lvl;
            if i % size == 0 {
                *slot = Some(cur.clone());
            }
            if (i + 1) % size == 0 {
                let start = slot.as_ref().expect("span start recorded");
                if u_turn_states(start, &cur) {
                    return Ok(None);
                }
            }
        }
    }
    Ok(Some((candidate.expect("at least one leaf"), cur)))
}
