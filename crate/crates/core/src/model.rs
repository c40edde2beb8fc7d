//! Shared domain types: trajectories, reward sample sets, smoothing and
//! perturbation-budget descriptions, plus the line-oriented sample-set
//! file format.
//!
//! All types here are immutable after construction and safe to share
//! between workers.

use crate::error::{Error, Result};
use crate::numeric::compensated_sum;
use std::fmt::Write as _;
use std::path::Path;

/// One recorded step: pre-step state, the (noisy) observation the policy
/// saw, the executed action and the reward received.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStep {
    pub state: Vec<f64>,
    pub observation: Vec<f64>,
    pub action: usize,
    pub reward: f64,
}

/// A full evaluation-time trajectory of at most `horizon` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub steps: Vec<TrajectoryStep>,
    pub horizon: usize,
    pub cumulative_reward: f64,
    pub seed: u64,
}

impl TrajectoryRecord {
    /// Builds a record and fills in the gamma-discounted cumulative reward.
    pub fn new(steps: Vec<TrajectoryStep>, horizon: usize, gamma: f64, seed: u64) -> Result<Self> {
        if steps.len() > horizon {
            return Err(Error::invalid(format!(
                "trajectory has {} steps, horizon is {horizon}",
                steps.len()
            )));
        }
        let mut rec = TrajectoryRecord {
            steps,
            horizon,
            cumulative_reward: 0.0,
            seed,
        };
        rec.cumulative_reward = cumulative_reward(&rec, gamma)?;
        Ok(rec)
    }
}

/// Discounted cumulative reward `sum_t gamma^t r_t` over the record's steps.
pub fn cumulative_reward(record: &TrajectoryRecord, gamma: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::invalid(format!("gamma must lie in [0,1], got {gamma}")));
    }
    let mut discount = 1.0;
    let mut terms = Vec::with_capacity(record.steps.len());
    for step in &record.steps {
        terms.push(discount * step.reward);
        discount *= gamma;
    }
    Ok(compensated_sum(terms))
}

/// How the policy is smoothed at evaluation time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SmoothingConfig {
    /// Add N(0, sigma^2 I_D) noise to every observation before acting.
    GaussianObservation { sigma: f64 },
    /// With probability `p`, replace the greedy action by a uniformly
    /// chosen non-greedy one.
    ActionFlip { p: f64 },
}

impl SmoothingConfig {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        if sigma <= 0.0 || !sigma.is_finite() {
            return Err(Error::invalid(format!("sigma must be > 0, got {sigma}")));
        }
        Ok(SmoothingConfig::GaussianObservation { sigma })
    }

    pub fn action_flip(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!("flip probability must lie in [0,1], got {p}")));
        }
        Ok(SmoothingConfig::ActionFlip { p })
    }

    fn header_fields(&self) -> String {
        match self {
            SmoothingConfig::GaussianObservation { sigma } => {
                format!("smoothing=gaussian sigma={sigma:.17e}")
            }
            SmoothingConfig::ActionFlip { p } => format!("smoothing=action_flip p={p:.17e}"),
        }
    }
}

/// Which norm the attacker's perturbation is measured in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    L2,
    L1,
    /// Number of attacked time steps (integer budget).
    L0Steps,
}

impl NormKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            NormKind::L2 => "l2",
            NormKind::L1 => "l1",
            NormKind::L0Steps => "l0_steps",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "l2" => Ok(NormKind::L2),
            "l1" => Ok(NormKind::L1),
            "l0_steps" | "l0" => Ok(NormKind::L0Steps),
            other => Err(Error::invalid(format!("unknown norm '{other}'"))),
        }
    }
}

/// Attacker model: norm kind and radius. For `L0Steps` the radius is an
/// integer count of attacked time steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationBudget {
    pub norm: NormKind,
    pub epsilon: f64,
}

impl PerturbationBudget {
    pub fn new(norm: NormKind, epsilon: f64) -> Result<Self> {
        if epsilon < 0.0 || !epsilon.is_finite() {
            return Err(Error::invalid(format!("epsilon must be >= 0, got {epsilon}")));
        }
        if norm == NormKind::L0Steps && epsilon.fract() != 0.0 {
            return Err(Error::invalid(format!(
                "l0_steps budget must be an integer step count, got {epsilon}"
            )));
        }
        Ok(PerturbationBudget { norm, epsilon })
    }

    pub fn attacked_steps(&self) -> usize {
        self.epsilon as usize
    }
}

/// I.i.d. cumulative rewards from smoothed rollouts; the only statistic
/// the certifier consumes. Sample `i` was produced with seed
/// `seed_base + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardSampleSet {
    pub values: Vec<f64>,
    pub env_id: String,
    pub smoothing: SmoothingConfig,
    pub seed_base: u64,
    pub gamma: f64,
    pub horizon: usize,
}

impl RewardSampleSet {
    pub fn new(
        values: Vec<f64>,
        env_id: impl Into<String>,
        smoothing: SmoothingConfig,
        seed_base: u64,
        gamma: f64,
        horizon: usize,
    ) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("sample set must be non-empty"));
        }
        Ok(RewardSampleSet {
            values,
            env_id: env_id.into(),
            smoothing,
            seed_base,
            gamma,
            horizon,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Serializes to the line-oriented text format: one header line
    /// (env id, smoothing kind/params, seed base, gamma, horizon), then
    /// one reward per line with 17 significant digits so values
    /// round-trip bit-exactly.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# env={} {} seed_base={} gamma={:.17e} T={} m={}",
            self.env_id,
            self.smoothing.header_fields(),
            self.seed_base,
            self.gamma,
            self.horizon,
            self.values.len()
        );
        for v in &self.values {
            let _ = writeln!(out, "{v:.16e}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::MalformedFile("empty file".into()))?;
        let header = header
            .strip_prefix('#')
            .ok_or_else(|| Error::MalformedFile("header must start with '#'".into()))?;

        let mut env_id = None;
        let mut kind = None;
        let mut sigma = None;
        let mut p = None;
        let mut seed_base = None;
        let mut gamma = None;
        let mut horizon = None;
        for field in header.split_whitespace() {
            let (k, v) = field
                .split_once('=')
                .ok_or_else(|| Error::MalformedFile(format!("bad header field '{field}'")))?;
            match k {
                "env" => env_id = Some(v.to_string()),
                "smoothing" => kind = Some(v.to_string()),
                "sigma" => sigma = Some(parse_f64(v)?),
                "p" => p = Some(parse_f64(v)?),
                "seed_base" => {
                    seed_base = Some(v.parse::<u64>().map_err(|e| {
                        Error::MalformedFile(format!("bad seed_base '{v}': {e}"))
                    })?)
                }
                "gamma" => gamma = Some(parse_f64(v)?),
                "T" => {
                    horizon = Some(v.parse::<usize>().map_err(|e| {
                        Error::MalformedFile(format!("bad horizon '{v}': {e}"))
                    })?)
                }
                _ => {} // attack metadata and future fields are tolerated
            }
        }
        let smoothing = match kind.as_deref() {
            Some("gaussian") => SmoothingConfig::GaussianObservation {
                sigma: sigma.ok_or_else(|| Error::MalformedFile("missing sigma".into()))?,
            },
            Some("action_flip") => SmoothingConfig::ActionFlip {
                p: p.ok_or_else(|| Error::MalformedFile("missing p".into()))?,
            },
            other => {
                return Err(Error::MalformedFile(format!(
                    "unknown smoothing kind {other:?}"
                )))
            }
        };

        let mut values = Vec::new();
        for line in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            values.push(parse_f64(line)?);
        }
        RewardSampleSet::new(
            values,
            env_id.ok_or_else(|| Error::MalformedFile("missing env id".into()))?,
            smoothing,
            seed_base.ok_or_else(|| Error::MalformedFile("missing seed_base".into()))?,
            gamma.ok_or_else(|| Error::MalformedFile("missing gamma".into()))?,
            horizon.ok_or_else(|| Error::MalformedFile("missing horizon".into()))?,
        )
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|e| Error::MalformedFile(format!("bad float '{s}': {e}")))
}
