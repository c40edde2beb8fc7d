//! Certification toolkit for smoothed reinforcement-learning policies.
//!
//! Given only black-box rollout access to a smoothed policy, this crate
//! computes confidence-backed lower bounds on the expected cumulative
//! reward under norm-bounded adversarial perturbations:
//!
//! * `l2` / `l1` perturbations of observations, defended by Gaussian
//!   observation smoothing,
//! * `l0` perturbations of the action sequence (a bounded number of
//!   attacked time steps), defended by action-flip smoothing.
//!
//! The pipeline measures how far an attacker can push the trajectory
//! distribution in f-divergence, then solves the convex dual
//!
//! ```text
//! max over nu > 0, eta:   nu * ( eta - E[ f*(eta + eps_d - J/nu) ] )
//! ```
//!
//! whose value lower-bounds the worst-case mean reward for *any* feasible
//! `(nu, eta)`. The expectation term is estimated in two phases (optimize
//! on M samples, re-estimate on M-tilde fresh samples with a Hoeffding
//! radius) so the final bound holds with confidence `1 - alpha`.
//!
//! Everything is deterministic given a base seed: per-step noise comes
//! from a counter-based generator keyed by `(episode seed, step)`, so
//! results are independent of worker count and execution order.

pub mod attack;
pub mod divergence;
pub mod dual;
pub mod env;
pub mod error;
pub mod model;
pub mod noise;
pub mod numeric;
pub mod policy;
pub mod rollout;

pub use divergence::DivergenceSpec;
pub use dual::{CertifiedBound, DualSolution, FinitePrimal, WeightedSamples};
pub use env::{EnvDescriptor, EnvKind};
pub use error::Error;
pub use model::{PerturbationBudget, RewardSampleSet, SmoothingConfig, TrajectoryRecord};
pub use policy::Policy;
