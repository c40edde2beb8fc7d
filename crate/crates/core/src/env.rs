//! Self-contained evaluation environments.
//!
//! * [`Cartpole`] — the classic pole-balancing benchmark with the standard
//!   public constants, simulated from scratch for bit-exact
//!   reproducibility.
//! * [`ChainMdp`] — a 3-state, 2-action, horizon-3 chain whose smoothed
//!   trajectory distribution has finite support (8 action sequences), so
//!   certification can be cross-checked against exact enumeration.
//! * [`BernoulliEnv`] — a 1-step environment whose smoothed mean reward is
//!   exactly 0.7 by construction, used for statistical coverage tests.
//!
//! Instances are single-use and single-threaded; workers each build their
//! own instance from an [`EnvKind`].

use crate::error::{Error, Result};
use crate::noise::NoiseSource;

/// Static facts about an environment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvDescriptor {
    pub state_dim: usize,
    pub num_actions: usize,
    pub horizon: usize,
    /// Per-step reward range (r_min, r_max).
    pub reward_range: (f64, f64),
}

impl EnvDescriptor {
    /// Cumulative-reward support implied by the per-step range.
    pub fn reward_bounds(&self) -> (f64, f64) {
        let t = self.horizon as f64;
        (t * self.reward_range.0, t * self.reward_range.1)
    }
}

/// One environment transition.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

/// Minimal black-box environment interface.
pub trait Environment: Send {
    fn descriptor(&self) -> EnvDescriptor;

    /// Deterministic initial state for the given episode seed.
    fn reset(&mut self, noise: &NoiseSource) -> Vec<f64>;

    /// Advances one step. Stepping a terminated or exhausted episode is
    /// rejected.
    fn step(&mut self, action: usize) -> Result<StepOutcome>;
}

/// Environment selector; builds fresh single-use instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvKind {
    Cartpole,
    Chain,
    Bernoulli,
}

impl EnvKind {
    pub fn from_id(id: &str) -> Result<Self> {
        match id {
            "cartpole" => Ok(EnvKind::Cartpole),
            "chain" => Ok(EnvKind::Chain),
            "bernoulli" => Ok(EnvKind::Bernoulli),
            other => Err(Error::invalid(format!("unknown environment '{other}'"))),
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            EnvKind::Cartpole => "cartpole",
            EnvKind::Chain => "chain",
            EnvKind::Bernoulli => "bernoulli",
        }
    }

    pub fn build(&self) -> Box<dyn Environment> {
        match self {
            EnvKind::Cartpole => Box::new(Cartpole::new()),
            EnvKind::Chain => Box::new(ChainMdp::new()),
            EnvKind::Bernoulli => Box::new(BernoulliEnv::new()),
        }
    }

    pub fn descriptor(&self) -> EnvDescriptor {
        self.build().descriptor()
    }
}

// ---------------------------------------------------------------------------
// Cartpole
// ---------------------------------------------------------------------------

/// Standard benchmark constants, centralized so every run is bit-exact.
pub mod cartpole_constants {
    pub const GRAVITY: f64 = 9.8;
    pub const MASS_CART: f64 = 1.0;
    pub const MASS_POLE: f64 = 0.1;
    pub const TOTAL_MASS: f64 = MASS_CART + MASS_POLE;
    /// Half the pole length.
    pub const POLE_HALF_LENGTH: f64 = 0.5;
    pub const POLE_MASS_LENGTH: f64 = MASS_POLE * POLE_HALF_LENGTH;
    pub const FORCE_MAG: f64 = 10.0;
    /// Euler integration step (seconds).
    pub const TAU: f64 = 0.02;
    pub const X_THRESHOLD: f64 = 2.4;
    /// 12 degrees.
    pub const THETA_THRESHOLD: f64 = 12.0 * std::f64::consts::PI / 180.0;
    pub const HORIZON: usize = 200;
    pub const RESET_BOUND: f64 = 0.05;
}

/// Pole balancing with state (x, x_dot, theta, theta_dot), forward-Euler
/// dynamics and +1 reward per step survived, horizon 200.
pub struct Cartpole {
    state: [f64; 4],
    steps_taken: usize,
    done: bool,
}

impl Cartpole {
    pub fn new() -> Self {
        Cartpole {
            state: [0.0; 4],
            steps_taken: 0,
            done: false,
        }
    }

    /// Sets the state directly; used by dynamics tests.
    pub fn set_state(&mut self, state: [f64; 4]) {
        self.state = state;
        self.done = false;
        self.steps_taken = 0;
    }
}

impl Default for Cartpole {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for Cartpole {
    fn descriptor(&self) -> EnvDescriptor {
        EnvDescriptor {
            state_dim: 4,
            num_actions: 2,
            horizon: cartpole_constants::HORIZON,
            reward_range: (0.0, 1.0),
        }
    }

    fn reset(&mut self, noise: &NoiseSource) -> Vec<f64> {
        use cartpole_constants::RESET_BOUND;
        let init = noise.reset_uniform_vec(4, -RESET_BOUND, RESET_BOUND);
        self.state = [init[0], init[1], init[2], init[3]];
        self.steps_taken = 0;
        self.done = false;
        self.state.to_vec()
    }

    fn step(&mut self, action: usize) -> Result<StepOutcome> {
        use cartpole_constants::*;
        if self.done || self.steps_taken >= HORIZON {
            return Err(Error::EpisodeTerminated);
        }
        if action >= 2 {
            return Err(Error::invalid(format!(
                "cartpole action must be 0 or 1, got {action}"
            )));
        }
        let [x, x_dot, theta, theta_dot] = self.state;
        let force = if action == 1 { FORCE_MAG } else { -FORCE_MAG };
        let cos_theta = theta.cos();
        let sin_theta = theta.sin();
        let temp = (force + POLE_MASS_LENGTH * theta_dot * theta_dot * sin_theta) / TOTAL_MASS;
        let theta_acc = (GRAVITY * sin_theta - cos_theta * temp)
            / (POLE_HALF_LENGTH * (4.0 / 3.0 - MASS_POLE * cos_theta * cos_theta / TOTAL_MASS));
        let x_acc = temp - POLE_MASS_LENGTH * theta_acc * cos_theta / TOTAL_MASS;

        // forward Euler: positions advance with the old velocities
        self.state = [
            x + TAU * x_dot,
            x_dot + TAU * x_acc,
            theta + TAU * theta_dot,
            theta_dot + TAU * theta_acc,
        ];
        self.steps_taken += 1;

        let fell = self.state[0].abs() > X_THRESHOLD || self.state[2].abs() > THETA_THRESHOLD;
        self.done = fell || self.steps_taken >= HORIZON;
        Ok(StepOutcome {
            state: self.state.to_vec(),
            reward: 1.0,
            done: self.done,
        })
    }
}

// ---------------------------------------------------------------------------
// ChainMDP
// ---------------------------------------------------------------------------

/// Deterministic 3-state chain, horizon 3.
///
/// Action 1 advances (capped at state 2), action 0 stays. Reward 1 is paid
/// when the agent is at state 2, or leaves state 1 via action 1; otherwise
/// 0. The optimal return from state 0 is 2 (advance twice, then anything).
pub struct ChainMdp {
    state: usize,
    steps_taken: usize,
    done: bool,
}

impl ChainMdp {
    pub const NUM_STATES: usize = 3;
    pub const HORIZON: usize = 3;

    pub fn new() -> Self {
        ChainMdp {
            state: 0,
            steps_taken: 0,
            done: false,
        }
    }

    pub fn reward(state: usize, action: usize) -> f64 {
        if state == 2 || (state == 1 && action == 1) {
            1.0
        } else {
            0.0
        }
    }

    pub fn transition(state: usize, action: usize) -> usize {
        if action == 1 {
            (state + 1).min(Self::NUM_STATES - 1)
        } else {
            state
        }
    }

    /// Cumulative reward of a full action sequence from state 0.
    pub fn trace(actions: &[usize]) -> f64 {
        let mut s = 0;
        let mut total = 0.0;
        for &a in actions {
            total += Self::reward(s, a);
            s = Self::transition(s, a);
        }
        total
    }

    /// Exact optimal return from state 0 by finite-horizon value iteration.
    pub fn optimal_return() -> f64 {
        let mut value = vec![0.0_f64; Self::NUM_STATES];
        for _ in 0..Self::HORIZON {
            let mut next = vec![0.0_f64; Self::NUM_STATES];
            for s in 0..Self::NUM_STATES {
                next[s] = (0..2)
                    .map(|a| Self::reward(s, a) + value[Self::transition(s, a)])
                    .fold(f64::NEG_INFINITY, f64::max);
            }
            value = next;
        }
        value[0]
    }
}

impl Default for ChainMdp {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for ChainMdp {
    fn descriptor(&self) -> EnvDescriptor {
        EnvDescriptor {
            state_dim: 1,
            num_actions: 2,
            horizon: Self::HORIZON,
            reward_range: (0.0, 1.0),
        }
    }

    fn reset(&mut self, _noise: &NoiseSource) -> Vec<f64> {
        self.state = 0;
        self.steps_taken = 0;
        self.done = false;
        vec![0.0]
    }

    fn step(&mut self, action: usize) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::EpisodeTerminated);
        }
        if action >= 2 {
            return Err(Error::invalid(format!(
                "chain action must be 0 or 1, got {action}"
            )));
        }
        let reward = Self::reward(self.state, action);
        self.state = Self::transition(self.state, action);
        self.steps_taken += 1;
        self.done = self.steps_taken >= Self::HORIZON;
        Ok(StepOutcome {
            state: vec![self.state as f64],
            reward,
            done: self.done,
        })
    }
}

// ---------------------------------------------------------------------------
// Synthetic known-mean environment
// ---------------------------------------------------------------------------

/// One step, reward equal to the chosen action (0 or 1).
///
/// Paired with [`crate::policy::ThresholdPolicy`] under Gaussian smoothing
/// with sigma = 1, action 1 is chosen with probability exactly 0.7, so the
/// smoothed mean cumulative reward is 0.7 with no estimation involved.
pub struct BernoulliEnv {
    steps_taken: usize,
    done: bool,
}

impl BernoulliEnv {
    /// Smoothed mean reward of the canonical threshold-policy pairing.
    pub const TRUE_SMOOTHED_MEAN: f64 = 0.7;

    pub fn new() -> Self {
        BernoulliEnv {
            steps_taken: 0,
            done: false,
        }
    }
}

impl Default for BernoulliEnv {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for BernoulliEnv {
    fn descriptor(&self) -> EnvDescriptor {
        EnvDescriptor {
            state_dim: 1,
            num_actions: 2,
            horizon: 1,
            reward_range: (0.0, 1.0),
        }
    }

    fn reset(&mut self, _noise: &NoiseSource) -> Vec<f64> {
        self.steps_taken = 0;
        self.done = false;
        vec![0.0]
    }

    fn step(&mut self, action: usize) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::EpisodeTerminated);
        }
        if action >= 2 {
            return Err(Error::invalid(format!("action must be 0 or 1, got {action}")));
        }
        self.steps_taken = 1;
        self.done = true;
        Ok(StepOutcome {
            state: vec![0.0],
            reward: action as f64,
            done: true,
        })
    }
}
