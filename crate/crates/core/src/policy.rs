//! Black-box policies and the smoothing wrappers around them.
//!
//! Certification never inspects a policy's internals: everything downstream
//! only calls [`Policy::act`] and [`Policy::q_values`]. The smoothing
//! wrappers implement the two evaluation-time defenses: Gaussian
//! observation noise and stochastic action flipping.

use crate::env::ChainMdp;
use crate::error::{Error, Result};
use crate::model::SmoothingConfig;
use crate::noise::NoiseSource;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;

/// Black-box policy interface.
///
/// When `q_values` is available, `act` must return its argmax with ties
/// broken toward the lowest index.
pub trait Policy: Send + Sync {
    fn act(&self, obs: &[f64]) -> usize;

    /// Per-action values, when the policy exposes them. Attacks that rank
    /// actions need this capability; plain certification does not.
    fn q_values(&self, _obs: &[f64]) -> Option<Vec<f64>> {
        None
    }
}

/// Argmax with lowest-index tie-breaking.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Argmin with lowest-index tie-breaking.
pub fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = i;
        }
    }
    best
}

// ---------------------------------------------------------------------------
// Scripted controllers
// ---------------------------------------------------------------------------

/// Proportional-derivative cartpole controller: push right iff
/// `w . obs > 0` with fixed gains `w = (0, 0, 1, 0.5)` on
/// `(x, x_dot, theta, theta_dot)`.
///
/// Near-optimal on the clean environment (full 200 reward) yet degradable
/// by observation noise, which is what makes its certification curves
/// informative.
#[derive(Debug, Clone, Copy, Default)]
pub struct PdController;

impl PdController {
    pub const GAINS: [f64; 4] = [0.0, 0.0, 1.0, 0.5];

    fn score(obs: &[f64]) -> f64 {
        Self::GAINS.iter().zip(obs).map(|(w, o)| w * o).sum()
    }
}

impl Policy for PdController {
    fn act(&self, obs: &[f64]) -> usize {
        usize::from(Self::score(obs) > 0.0)
    }

    fn q_values(&self, obs: &[f64]) -> Option<Vec<f64>> {
        // synthetic action values whose argmax reproduces `act` and whose
        // gap scales with how decisive the controller is
        let s = Self::score(obs);
        Some(vec![-s, s])
    }
}

/// One-dimensional threshold policy: action 1 iff `obs[0] > threshold`.
///
/// With Gaussian smoothing at `sigma` the smoothed action-1 probability
/// from a zero observation is exactly `1 - Phi(threshold / sigma)`.
#[derive(Debug, Clone, Copy)]
pub struct ThresholdPolicy {
    pub threshold: f64,
}

impl ThresholdPolicy {
    /// Pairing with [`crate::env::BernoulliEnv`] under sigma = 1 smoothing:
    /// threshold at the 0.3 standard-normal quantile makes the smoothed
    /// mean reward exactly 0.7.
    pub fn bernoulli_seventy() -> Self {
        ThresholdPolicy {
            threshold: crate::numeric::std_normal_quantile(0.3),
        }
    }
}

impl Policy for ThresholdPolicy {
    fn act(&self, obs: &[f64]) -> usize {
        usize::from(obs[0] > self.threshold)
    }

    fn q_values(&self, obs: &[f64]) -> Option<Vec<f64>> {
        let margin = obs[0] - self.threshold;
        Some(vec![-margin, margin])
    }
}

// ---------------------------------------------------------------------------
// Tabular Q learning
// ---------------------------------------------------------------------------

/// Tabular Q policy over integer state indices (observation is the state
/// index as a 1-D real vector).
#[derive(Debug, Clone, PartialEq)]
pub struct TabularQ {
    /// `table[state][action]`
    pub table: Vec<Vec<f64>>,
}

impl TabularQ {
    fn state_index(&self, obs: &[f64]) -> usize {
        let idx = obs[0].round();
        if idx < 0.0 {
            0
        } else {
            (idx as usize).min(self.table.len() - 1)
        }
    }

    /// Text serialization: a version line, then one `state q0 q1 ...` line
    /// per state.
    pub fn to_text(&self) -> String {
        let mut out = String::from("tabularq v1\n");
        for (s, row) in self.table.iter().enumerate() {
            let _ = write!(out, "{s}");
            for q in row {
                let _ = write!(out, " {q:.16e}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some("tabularq v1") => {}
            other => {
                return Err(Error::MalformedFile(format!(
                    "expected 'tabularq v1' header, got {other:?}"
                )))
            }
        }
        let mut table = Vec::new();
        for line in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let state: usize = fields
                .next()
                .unwrap()
                .parse()
                .map_err(|e| Error::MalformedFile(format!("bad state index: {e}")))?;
            if state != table.len() {
                return Err(Error::MalformedFile(format!(
                    "state indices must be consecutive, got {state} at row {}",
                    table.len()
                )));
            }
            let row: std::result::Result<Vec<f64>, _> =
                fields.map(|f| f.parse::<f64>()).collect();
            table.push(row.map_err(|e| Error::MalformedFile(format!("bad q value: {e}")))?);
        }
        if table.is_empty() {
            return Err(Error::MalformedFile("empty q table".into()));
        }
        Ok(TabularQ { table })
    }
}

impl Policy for TabularQ {
    fn act(&self, obs: &[f64]) -> usize {
        argmax(&self.table[self.state_index(obs)])
    }

    fn q_values(&self, obs: &[f64]) -> Option<Vec<f64>> {
        Some(self.table[self.state_index(obs)].clone())
    }
}

/// Epsilon-greedy tabular Q-learning on the chain MDP.
///
/// Deterministic given the seed. Only environments with a finite state
/// index space are accepted; passing any other id is rejected rather than
/// silently discretized.
pub fn train_tabular_q(
    env_id: &str,
    episodes: usize,
    learning_rate: f64,
    epsilon_start: f64,
    seed: u64,
) -> Result<TabularQ> {
    if env_id != "chain" {
        return Err(Error::NotDiscretizable(format!(
            "tabular training supports 'chain', got '{env_id}'"
        )));
    }
    let num_states = ChainMdp::NUM_STATES;
    let mut table = vec![vec![0.0_f64; 2]; num_states];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    for episode in 0..episodes {
        // linear epsilon decay to 0 over the training run
        let eps = epsilon_start * (1.0 - episode as f64 / episodes as f64);
        let mut s = 0usize;
        for t in 0..ChainMdp::HORIZON {
            let a = if rng.gen::<f64>() < eps {
                rng.gen_range(0..2)
            } else {
                argmax(&table[s])
            };
            let r = ChainMdp::reward(s, a);
            let s_next = ChainMdp::transition(s, a);
            let future = if t + 1 < ChainMdp::HORIZON {
                table[s_next][argmax(&table[s_next])]
            } else {
                0.0
            };
            table[s][a] += learning_rate * (r + future - table[s][a]);
            s = s_next;
        }
    }
    Ok(TabularQ { table })
}

// ---------------------------------------------------------------------------
// Smoothing wrappers
// ---------------------------------------------------------------------------

/// Gaussian observation smoothing: act on `obs + noise` with noise drawn
/// from the counter-based source at the given step.
pub fn gaussian_smooth_act(
    policy: &dyn Policy,
    obs: &[f64],
    sigma: f64,
    noise: &NoiseSource,
    step: u32,
) -> usize {
    let delta = noise.gaussian_vec(step, obs.len(), sigma);
    let noisy: Vec<f64> = obs.iter().zip(&delta).map(|(o, d)| o + d).collect();
    policy.act(&noisy)
}

/// Maps a uniform draw to the flip-smoothed action around `center`:
/// keep `center` with probability `1 - p`, otherwise pick uniformly among
/// the other `num_actions - 1` actions.
pub fn flip_around(center: usize, p: f64, num_actions: usize, u: f64) -> usize {
    if u < 1.0 - p {
        return center;
    }
    let k = ((u - (1.0 - p)) / p * (num_actions - 1) as f64) as usize;
    let k = k.min(num_actions - 2);
    // k-th action skipping the center
    if k < center {
        k
    } else {
        k + 1
    }
}

/// Action-flip smoothing: with probability `1 - p` play the greedy action,
/// otherwise a uniformly chosen alternative. Requires `q_values`.
pub fn action_flip_act(
    policy: &dyn Policy,
    obs: &[f64],
    p: f64,
    noise: &NoiseSource,
    step: u32,
) -> Result<usize> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::invalid(format!(
            "flip probability must lie in [0,1), got {p}"
        )));
    }
    let q = policy.q_values(obs).ok_or(Error::MissingQValues)?;
    let greedy = argmax(&q);
    if p == 0.0 {
        return Ok(greedy);
    }
    Ok(flip_around(greedy, p, q.len(), noise.flip_uniform(step)))
}

/// Applies the configured smoothing to pick the action at `step`.
pub fn smoothed_act(
    policy: &dyn Policy,
    obs: &[f64],
    smoothing: SmoothingConfig,
    noise: &NoiseSource,
    step: u32,
) -> Result<usize> {
    match smoothing {
        SmoothingConfig::GaussianObservation { sigma } => {
            Ok(gaussian_smooth_act(policy, obs, sigma, noise, step))
        }
        SmoothingConfig::ActionFlip { p } => action_flip_act(policy, obs, p, noise, step),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pd_controller_reacts_to_angle() {
        assert_eq!(PdController.act(&[0.0, 0.0, 0.1, 0.0]), 1);
        assert_eq!(PdController.act(&[0.0, 0.0, -0.1, 0.0]), 0);
    }

    #[test]
    fn act_is_argmax_of_q_values() {
        let obs = [0.3, -0.2, 0.05, -0.4];
        let q = PdController.q_values(&obs).unwrap();
        assert_eq!(PdController.act(&obs), argmax(&q));
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[1.0, 1.0, 0.5]), 0);
        assert_eq!(argmin(&[0.5, 0.2, 0.2]), 1);
    }

    #[test]
    fn tabular_q_matches_value_iteration_optimum() {
        let q = train_tabular_q("chain", 4000, 0.2, 1.0, 11).unwrap();
        let mut s = 0usize;
        let mut total = 0.0;
        for _ in 0..ChainMdp::HORIZON {
            let a = q.act(&[s as f64]);
            total += ChainMdp::reward(s, a);
            s = ChainMdp::transition(s, a);
        }
        assert_eq!(total, ChainMdp::optimal_return());
    }

    #[test]
    fn tabular_q_zero_episodes_is_uniform() {
        let q = train_tabular_q("chain", 0, 0.2, 1.0, 0).unwrap();
        for s in 0..ChainMdp::NUM_STATES {
            assert_eq!(q.act(&[s as f64]), 0); // all-zero table, tie-break low
        }
    }

    #[test]
    fn tabular_q_training_is_deterministic() {
        let a = train_tabular_q("chain", 500, 0.3, 0.8, 7).unwrap();
        let b = train_tabular_q("chain", 500, 0.3, 0.8, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn tabular_q_rejects_continuous_envs() {
        assert!(matches!(
            train_tabular_q("cartpole", 10, 0.1, 1.0, 0),
            Err(Error::NotDiscretizable(_))
        ));
    }

    #[test]
    fn tabular_q_text_round_trip() {
        let q = train_tabular_q("chain", 200, 0.3, 0.8, 3).unwrap();
        let back = TabularQ::from_text(&q.to_text()).unwrap();
        assert_eq!(q, back);
        assert!(TabularQ::from_text("bogus\n0 1 2").is_err());
    }

    #[test]
    fn vanishing_noise_recovers_base_action() {
        let ns = NoiseSource::new(5);
        let obs = [0.0, 0.0, 0.07, -0.01];
        let base = PdController.act(&obs);
        assert_eq!(
            gaussian_smooth_act(&PdController, &obs, 1e-12, &ns, 0),
            base
        );
    }

    #[test]
    fn smoothing_is_deterministic_per_key() {
        let ns = NoiseSource::new(5);
        let obs = [0.0, 0.0, 0.01, 0.0];
        let a = gaussian_smooth_act(&PdController, &obs, 0.2, &ns, 3);
        let b = gaussian_smooth_act(&PdController, &obs, 0.2, &ns, 3);
        assert_eq!(a, b);
    }

    #[test]
    fn flip_p_zero_is_always_greedy() {
        let ns = NoiseSource::new(1);
        let obs = [0.0, 0.0, 0.1, 0.0];
        for t in 0..50 {
            assert_eq!(
                action_flip_act(&PdController, &obs, 0.0, &ns, t).unwrap(),
                1
            );
        }
    }

    #[test]
    fn flip_frequency_matches_p() {
        // 1e5 keyed draws; frequency of the non-greedy action within 0.005
        let obs = [0.0, 0.0, 0.1, 0.0];
        let mut flips = 0usize;
        let n = 100_000;
        for i in 0..n {
            let ns = NoiseSource::new(1_000 + i as u64);
            let a = action_flip_act(&PdController, &obs, 0.3, &ns, 0).unwrap();
            if a != 1 {
                flips += 1;
            }
        }
        let freq = flips as f64 / n as f64;
        assert!((freq - 0.3).abs() < 0.005, "freq = {freq}");
    }

    #[test]
    fn flip_uniform_case_covers_all_actions_equally() {
        // p = (N-1)/N with N = 4 must be uniform over all actions
        struct FourArm;
        impl Policy for FourArm {
            fn act(&self, _obs: &[f64]) -> usize {
                2
            }
            fn q_values(&self, _obs: &[f64]) -> Option<Vec<f64>> {
                Some(vec![0.0, 0.1, 0.9, 0.4])
            }
        }
        let mut counts = [0usize; 4];
        let n = 80_000;
        for i in 0..n {
            let ns = NoiseSource::new(i as u64);
            let a = action_flip_act(&FourArm, &[0.0], 0.75, &ns, 0).unwrap();
            counts[a] += 1;
        }
        for (a, &c) in counts.iter().enumerate() {
            let freq = c as f64 / n as f64;
            assert!((freq - 0.25).abs() < 0.01, "action {a} freq {freq}");
        }
    }

    #[test]
    fn flip_rejects_policies_without_q() {
        struct Blind;
        impl Policy for Blind {
            fn act(&self, _obs: &[f64]) -> usize {
                0
            }
        }
        let ns = NoiseSource::new(0);
        assert!(matches!(
            action_flip_act(&Blind, &[0.0], 0.2, &ns, 0),
            Err(Error::MissingQValues)
        ));
    }

    #[test]
    fn threshold_policy_bernoulli_pairing() {
        let p = ThresholdPolicy::bernoulli_seventy();
        // acting on noise alone: P(noise > threshold) = 0.7
        let mut ones = 0usize;
        let n = 200_000;
        for i in 0..n {
            let ns = NoiseSource::new(i as u64);
            let a = gaussian_smooth_act(&p, &[0.0], 1.0, &ns, 0);
            ones += a;
        }
        let freq = ones as f64 / n as f64;
        assert!((freq - 0.7).abs() < 0.004, "freq = {freq}");
    }
}
