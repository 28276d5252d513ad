//! Zigzag samplers for (truncated) multivariate Gaussian targets.
//!
//! Two exact, factorization-free samplers built from the same piecewise
//! linear dynamics:
//!
//! * [`hamiltonian`] — zigzag Hamiltonian dynamics under Laplace momentum,
//!   simulated exactly via per-coordinate quadratic root solves, with
//!   boundary reflections for orthant truncations;
//! * [`markovian`] — the Markovian zigzag process, with the inhomogeneous
//!   Poisson event times inverted analytically.
//!
//! On top of those sit a no-U-turn driver with automatic integration-time
//! tuning ([`nuts`]), an executable coupling of the two processes that
//! demonstrates the momentum-refreshment limit ([`coupling`]), chain-quality
//! metrics ([`diagnostics`]), and a reproducible experiment runner
//! ([`runner`]) behind the `zigzag-mc` binary.
//!
//! Every run is driven by a root seed and counter-split RNG streams
//! ([`rng`]), so identical configurations give identical outputs.
//!
//! See the `examples/` directory for one runnable walkthrough per
//! capability.

pub mod coupling;
pub mod diagnostics;
pub mod hamiltonian;
pub mod markovian;
pub mod model;
pub mod nuts;
pub mod rng;
pub mod runner;

pub use hamiltonian::{EventKind, EventRecord, HzzState, SimError};
pub use markovian::MzzState;
pub use model::{Constraint, ModelError, PrecisionOp, SpectralEstimate, TruncatedGaussianTarget};
pub use nuts::{NutsConfig, NutsStats};
