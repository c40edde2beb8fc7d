//! Empirical adversaries. Their sample means are upper-bound evidence that
//! sandwiches the certified lower bounds: every attack here respects its
//! declared budget and stays inside the threat model the certificates
//! cover, so `certified bound <= attacked mean + confidence slack` must
//! hold for every implemented attack and budget.

use crate::env::EnvKind;
use crate::error::{Error, Result};
use crate::model::{NormKind, RewardSampleSet, SmoothingConfig};
use crate::noise::{derive_seed, NoiseSource, StreamRole};
use crate::policy::{argmax, argmin, flip_around, gaussian_smooth_act, Policy};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

/// Observation-attack configuration.
#[derive(Debug, Clone, Copy)]
pub struct ObsAttackParams {
    pub epsilon: f64,
    /// `L2` or `L1`; candidate perturbations are normalized in this norm.
    pub norm: NormKind,
    pub num_episodes: usize,
    /// Random candidate directions per episode, on top of the signed
    /// coordinate directions.
    pub num_candidates: usize,
    /// Steps of the short-horizon preview used to rank candidates.
    pub score_horizon: usize,
    /// Preview repetitions per candidate.
    pub score_reps: usize,
    pub seed: u64,
    pub gamma: f64,
}

impl ObsAttackParams {
    pub fn new(norm: NormKind, epsilon: f64, num_episodes: usize, seed: u64) -> Result<Self> {
        if norm == NormKind::L0Steps {
            return Err(Error::IncompatibleBudget(
                "observation attacks take l2 or l1 budgets".into(),
            ));
        }
        if epsilon < 0.0 {
            return Err(Error::invalid("epsilon must be >= 0"));
        }
        Ok(ObsAttackParams {
            epsilon,
            norm,
            num_episodes,
            num_candidates: 8,
            score_horizon: 20,
            score_reps: 5,
            seed,
            gamma: 1.0,
        })
    }
}

fn norm_of(delta: &[f64], norm: NormKind) -> f64 {
    match norm {
        NormKind::L2 => delta.iter().map(|d| d * d).sum::<f64>().sqrt(),
        NormKind::L1 => delta.iter().map(|d| d.abs()).sum(),
        NormKind::L0Steps => unreachable!("observation attacks never use l0"),
    }
}

/// Spends the full budget on the initial observation: ranks candidate
/// perturbations by a short smoothed preview and commits to the worst
/// scorer, then plays the episode out. Returns the attacked reward
/// samples.
pub fn obs_attack(
    env: EnvKind,
    policy: &dyn Policy,
    smoothing: SmoothingConfig,
    params: &ObsAttackParams,
) -> Result<RewardSampleSet> {
    let sigma = match smoothing {
        SmoothingConfig::GaussianObservation { sigma } => sigma,
        SmoothingConfig::ActionFlip { .. } => {
            return Err(Error::IncompatibleBudget(
                "observation attacks require Gaussian observation smoothing".into(),
            ))
        }
    };
    if params.num_episodes == 0 {
        return Err(Error::invalid("need at least one attack episode"));
    }
    let dim = env.descriptor().state_dim;
    let horizon = env.descriptor().horizon;

    let values: Result<Vec<f64>> = (0..params.num_episodes)
        .into_par_iter()
        .map(|i| {
            let episode_seed = params.seed + i as u64;
            let delta = choose_perturbation(env, policy, sigma, params, episode_seed, dim)?;
            let measured = norm_of(&delta, params.norm);
            assert!(
                measured <= params.epsilon + 1e-9,
                "attack exceeded its budget: {measured} > {}",
                params.epsilon
            );
            attacked_episode(env, policy, sigma, &delta, episode_seed, horizon, params.gamma)
        })
        .collect();

    RewardSampleSet::new(values?, env.id(), smoothing, params.seed, params.gamma, horizon)
}

/// `l2`-budget observation attack with default preview settings.
pub fn l2_obs_attack(
    env: EnvKind,
    policy: &dyn Policy,
    smoothing: SmoothingConfig,
    epsilon: f64,
    num_episodes: usize,
    num_candidates: usize,
    seed: u64,
) -> Result<RewardSampleSet> {
    let mut params = ObsAttackParams::new(NormKind::L2, epsilon, num_episodes, seed)?;
    params.num_candidates = num_candidates;
    obs_attack(env, policy, smoothing, &params)
}

fn candidate_directions(
    params: &ObsAttackParams,
    episode_seed: u64,
    dim: usize,
) -> Vec<Vec<f64>> {
    let mut candidates = Vec::with_capacity(params.num_candidates + 2 * dim + 1);
    candidates.push(vec![0.0; dim]);
    if params.epsilon == 0.0 {
        return candidates;
    }
    // signed coordinate directions have equal l1 and l2 length
    for j in 0..dim {
        for sign in [1.0, -1.0] {
            let mut d = vec![0.0; dim];
            d[j] = sign * params.epsilon;
            candidates.push(d);
        }
    }
    let ns = NoiseSource::new(episode_seed);
    let mut rng = ns.stream(0, StreamRole::Attack);
    for _ in 0..params.num_candidates {
        let raw: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let len = norm_of(&raw, params.norm);
        if len > 0.0 {
            candidates.push(raw.iter().map(|r| r * params.epsilon / len).collect());
        }
    }
    candidates
}

fn choose_perturbation(
    env: EnvKind,
    policy: &dyn Policy,
    sigma: f64,
    params: &ObsAttackParams,
    episode_seed: u64,
    dim: usize,
) -> Result<Vec<f64>> {
    let candidates = candidate_directions(params, episode_seed, dim);
    if candidates.len() == 1 {
        return Ok(candidates.into_iter().next().unwrap());
    }
    let mut best = 0usize;
    let mut best_score = f64::INFINITY;
    for (c, delta) in candidates.iter().enumerate() {
        let mut total = 0.0;
        for rep in 0..params.score_reps {
            // the preview shares the episode's initial state but not its
            // future smoothing noise, which the attacker cannot observe
            let preview = derive_seed(episode_seed, (c as u64) << 20 | rep as u64 | 1 << 40);
            total += preview_episode(env, policy, sigma, delta, episode_seed, preview, params.score_horizon)?;
        }
        if total < best_score {
            best_score = total;
            best = c;
        }
    }
    Ok(candidates.into_iter().nth(best).unwrap())
}

fn preview_episode(
    env_kind: EnvKind,
    policy: &dyn Policy,
    sigma: f64,
    delta: &[f64],
    episode_seed: u64,
    preview_seed: u64,
    horizon: usize,
) -> Result<f64> {
    let mut env = env_kind.build();
    let reset_noise = NoiseSource::new(episode_seed);
    let preview_noise = NoiseSource::new(preview_seed);
    let mut state = env.reset(&reset_noise);
    let mut total = 0.0;
    for t in 0..horizon {
        let mut obs = state.clone();
        if t == 0 {
            for (o, d) in obs.iter_mut().zip(delta) {
                *o += d;
            }
        }
        let action = gaussian_smooth_act(policy, &obs, sigma, &preview_noise, t as u32);
        let out = env.step(action)?;
        total += out.reward;
        state = out.state;
        if out.done {
            break;
        }
    }
    Ok(total)
}

fn attacked_episode(
    env_kind: EnvKind,
    policy: &dyn Policy,
    sigma: f64,
    delta: &[f64],
    episode_seed: u64,
    horizon: usize,
    gamma: f64,
) -> Result<f64> {
    let mut env = env_kind.build();
    let noise = NoiseSource::new(episode_seed);
    let mut state = env.reset(&noise);
    let mut total = 0.0;
    let mut discount = 1.0;
    for t in 0..horizon {
        let mut obs = state.clone();
        if t == 0 {
            for (o, d) in obs.iter_mut().zip(delta) {
                *o += d;
            }
        }
        let action = gaussian_smooth_act(policy, &obs, sigma, &noise, t as u32);
        let out = env.step(action)?;
        total += discount * out.reward;
        discount *= gamma;
        state = out.state;
        if out.done {
            break;
        }
    }
    Ok(total)
}

/// Action-space attack: at each step, while override budget remains and
/// the action-value gap exceeds `gap_threshold`, the greedy proposal fed
/// into the flip smoother is replaced by the argmin-Q action.
///
/// The executed action is still drawn from the flip distribution around
/// the (possibly overridden) proposal, which is exactly the perturbed
/// action distribution the l0 certificates bound; a hard deterministic
/// override would leave the certified divergence ball.
pub fn l0_action_attack(
    env: EnvKind,
    policy: &dyn Policy,
    smoothing: SmoothingConfig,
    max_flips: usize,
    gap_threshold: f64,
    num_episodes: usize,
    seed: u64,
) -> Result<RewardSampleSet> {
    let p = match smoothing {
        SmoothingConfig::ActionFlip { p } => p,
        SmoothingConfig::GaussianObservation { .. } => {
            return Err(Error::IncompatibleBudget(
                "action attacks require action-flip smoothing".into(),
            ))
        }
    };
    if num_episodes == 0 {
        return Err(Error::invalid("need at least one attack episode"));
    }
    let horizon = env.descriptor().horizon;

    let values: Result<Vec<f64>> = (0..num_episodes)
        .into_par_iter()
        .map(|i| {
            let episode_seed = seed + i as u64;
            let noise = NoiseSource::new(episode_seed);
            let mut environment = env.build();
            let mut state = environment.reset(&noise);
            let mut flips_left = max_flips;
            let mut flips_used = 0usize;
            let mut total = 0.0;
            for t in 0..horizon {
                let q = policy.q_values(&state).ok_or(Error::MissingQValues)?;
                let greedy = argmax(&q);
                let gap = q.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                    - q.iter().copied().fold(f64::INFINITY, f64::min);
                let proposal = if flips_left > 0 && gap > gap_threshold {
                    flips_left -= 1;
                    flips_used += 1;
                    argmin(&q)
                } else {
                    greedy
                };
                let action = if p == 0.0 {
                    proposal
                } else {
                    flip_around(proposal, p, q.len(), noise.flip_uniform(t as u32))
                };
                let out = environment.step(action)?;
                total += out.reward;
                state = out.state;
                if out.done {
                    break;
                }
            }
            assert!(flips_used <= max_flips, "attack exceeded its flip budget");
            Ok(total)
        })
        .collect();

    RewardSampleSet::new(values?, env.id(), smoothing, seed, 1.0, horizon)
}
