//! Seeded, parallelizable collection of cumulative-reward samples from
//! smoothed rollouts.
//!
//! Episode `i` of a batch derives its noise entirely from
//! `seed_base + i`, so a batch is a pure function of its arguments:
//! splitting it across any number of workers yields bit-identical sample
//! sets. The optimization and evaluation phases of certification reserve
//! disjoint seed ranges (the evaluation phase starts at
//! `seed_base + EVAL_SEED_OFFSET`), which is what makes the confidence
//! bound on fresh samples valid.

use crate::env::EnvKind;
use crate::error::Result;
use crate::model::{RewardSampleSet, SmoothingConfig, TrajectoryRecord, TrajectoryStep};
use crate::noise::NoiseSource;
use crate::numeric::compensated_sum;
use crate::policy::{smoothed_act, Policy};
use rayon::prelude::*;

/// Seed offset reserved for evaluation-phase samples. Batch sizes must stay
/// below this so the two phases can never overlap.
pub const EVAL_SEED_OFFSET: u64 = 1 << 20;

/// Runs one smoothed episode with the given episode seed.
pub fn run_episode(
    env_kind: EnvKind,
    policy: &dyn Policy,
    smoothing: SmoothingConfig,
    episode_seed: u64,
    gamma: f64,
) -> Result<TrajectoryRecord> {
    let mut env = env_kind.build();
    let noise = NoiseSource::new(episode_seed);
    let horizon = env.descriptor().horizon;
    let mut state = env.reset(&noise);
    let mut steps = Vec::new();
    for t in 0..horizon {
        let obs = state.clone();
        let action = smoothed_act(policy, &obs, smoothing, &noise, t as u32)?;
        let outcome = env.step(action)?;
        steps.push(TrajectoryStep {
            state,
            observation: obs,
            action,
            reward: outcome.reward,
        });
        state = outcome.state;
        if outcome.done {
            break;
        }
    }
    TrajectoryRecord::new(steps, horizon, gamma, episode_seed)
}

/// Collects `m` cumulative-reward samples; episode `i` is seeded
/// `seed_base + i`. Samples are stored by episode index, so the result is
/// independent of how episodes are scheduled across workers.
pub fn smoothing_reward_set(
    env_kind: EnvKind,
    policy: &dyn Policy,
    smoothing: SmoothingConfig,
    m: usize,
    seed_base: u64,
    gamma: f64,
) -> Result<RewardSampleSet> {
    assert!(m >= 1, "need at least one episode");
    assert!(
        (m as u64) < EVAL_SEED_OFFSET,
        "batch size collides with the evaluation-phase seed range"
    );
    let values: Result<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| {
            run_episode(env_kind, policy, smoothing, seed_base + i as u64, gamma)
                .map(|rec| rec.cumulative_reward)
        })
        .collect();
    let horizon = env_kind.descriptor().horizon;
    RewardSampleSet::new(values?, env_kind.id(), smoothing, seed_base, gamma, horizon)
}

/// Compensated mean together with the extreme values.
pub fn empirical_mean_and_range(samples: &[f64]) -> (f64, f64, f64) {
    assert!(!samples.is_empty(), "empty sample set");
    let mean = compensated_sum(samples.iter().copied()) / samples.len() as f64;
    let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let max = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (mean, min, max)
}
