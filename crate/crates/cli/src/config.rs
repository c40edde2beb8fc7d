//! Flat `key = value` experiment configs with one `[section]` per command.
//!
//! The format is deliberately plain text so experiment records diff
//! cleanly and seeds are auditable. Keys placed before any section header
//! apply to every section; section keys override them. Unknown keys are
//! rejected rather than ignored.

use certrl::divergence::DivergenceSpec;
use certrl::env::EnvKind;
use certrl::model::{NormKind, SmoothingConfig};
use certrl::policy::{PdController, Policy, ThresholdPolicy};
use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

/// Raw parsed file: global keys plus per-section key/value maps.
#[derive(Debug, Default)]
pub struct RawConfig {
    global: BTreeMap<String, String>,
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<RawConfig, ConfigError> {
        let mut cfg = RawConfig::default();
        let mut current: Option<String> = None;
        for (lineno, raw_line) in text.lines().enumerate() {
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| err(format!("line {}: unterminated section", lineno + 1)))?
                    .trim()
                    .to_string();
                cfg.sections.entry(name.clone()).or_default();
                current = Some(name);
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("line {}: expected 'key = value'", lineno + 1)))?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            match &current {
                Some(section) => {
                    cfg.sections.get_mut(section).unwrap().insert(key, value);
                }
                None => {
                    cfg.global.insert(key, value);
                }
            }
        }
        Ok(cfg)
    }

    /// Section keys merged over globals.
    pub fn section(&self, name: &str) -> Result<BTreeMap<String, String>, ConfigError> {
        let section = self
            .sections
            .get(name)
            .ok_or_else(|| err(format!("missing [{name}] section")))?;
        let mut merged = self.global.clone();
        merged.extend(section.clone());
        Ok(merged)
    }
}

/// Typed view over a section that tracks which keys were consumed.
struct Keys {
    map: BTreeMap<String, String>,
    used: Vec<String>,
}

impl Keys {
    fn new(map: BTreeMap<String, String>) -> Self {
        Keys { map, used: Vec::new() }
    }

    fn raw(&mut self, key: &str) -> Option<String> {
        self.used.push(key.to_string());
        self.map.get(key).cloned()
    }

    fn required(&mut self, key: &str) -> Result<String, ConfigError> {
        self.raw(key).ok_or_else(|| err(format!("missing key '{key}'")))
    }

    fn parse_f64(&mut self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<f64>()
                .map(Some)
                .map_err(|e| err(format!("key '{key}': bad number '{v}': {e}"))),
        }
    }

    fn f64_or(&mut self, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.parse_f64(key)?.unwrap_or(default))
    }

    fn usize_or(&mut self, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v
                .parse::<usize>()
                .map_err(|e| err(format!("key '{key}': bad integer '{v}': {e}"))),
        }
    }

    fn u64_or(&mut self, key: &str, default: u64) -> Result<u64, ConfigError> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v
                .parse::<u64>()
                .map_err(|e| err(format!("key '{key}': bad integer '{v}': {e}"))),
        }
    }

    fn bool_or(&mut self, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => match v.as_str() {
                "on" | "true" | "1" => Ok(true),
                "off" | "false" | "0" => Ok(false),
                other => Err(err(format!("key '{key}': expected on/off, got '{other}'"))),
            },
        }
    }

    fn grid(&mut self, key: &str) -> Result<Vec<f64>, ConfigError> {
        let raw = self.required(key)?;
        let values: Result<Vec<f64>, _> = raw
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect();
        let values = values.map_err(|e| err(format!("key '{key}': bad grid '{raw}': {e}")))?;
        if values.is_empty() {
            return Err(err(format!("key '{key}': empty grid")));
        }
        Ok(values)
    }

    fn reject_unknown(&self) -> Result<(), ConfigError> {
        for key in self.map.keys() {
            if !self.used.contains(key) {
                return Err(err(format!("unknown key '{key}'")));
            }
        }
        Ok(())
    }
}

/// Experiment ingredients shared by certify and attack sections.
pub struct ExperimentSetup {
    pub env: EnvKind,
    pub policy: Box<dyn Policy>,
    pub smoothing: SmoothingConfig,
    pub norm: NormKind,
    pub budgets: Vec<f64>,
    pub seed: u64,
    pub gamma: f64,
    pub timing: bool,
}

fn build_policy(name: &str, env: EnvKind, seed: u64) -> Result<Box<dyn Policy>, ConfigError> {
    match (name, env) {
        ("pd", EnvKind::Cartpole) => Ok(Box::new(PdController)),
        ("threshold", EnvKind::Bernoulli) => Ok(Box::new(ThresholdPolicy::bernoulli_seventy())),
        ("chain_q", EnvKind::Chain) => {
            let q = certrl::policy::train_tabular_q("chain", 4000, 0.2, 1.0, seed)
                .map_err(|e| err(format!("tabular training failed: {e}")))?;
            Ok(Box::new(q))
        }
        (p, e) => Err(err(format!("policy '{p}' does not pair with environment '{}'", e.id()))),
    }
}

fn setup_from(keys: &mut Keys) -> Result<ExperimentSetup, ConfigError> {
    let env = EnvKind::from_id(&keys.required("env")?)
        .map_err(|e| err(format!("{e}")))?;
    let seed = keys.u64_or("seed", 0)?;
    let policy = build_policy(&keys.required("policy")?, env, seed)?;
    let smoothing = match keys.required("smoothing")?.as_str() {
        "gaussian" => {
            let sigma = keys
                .parse_f64("sigma")?
                .ok_or_else(|| err("gaussian smoothing needs 'sigma'"))?;
            SmoothingConfig::gaussian(sigma).map_err(|e| err(format!("{e}")))?
        }
        "action_flip" => {
            let p = keys
                .parse_f64("flip_prob")?
                .ok_or_else(|| err("action_flip smoothing needs 'flip_prob'"))?;
            SmoothingConfig::action_flip(p).map_err(|e| err(format!("{e}")))?
        }
        other => return Err(err(format!("unknown smoothing '{other}'"))),
    };
    let norm = NormKind::parse(&keys.required("norm")?).map_err(|e| err(format!("{e}")))?;
    let budgets = keys.grid("budgets")?;
    if budgets.iter().any(|&b| b < 0.0) {
        return Err(err("budgets must be nonnegative"));
    }
    let gamma = keys.f64_or("gamma", 1.0)?;
    let timing = keys.bool_or("timing", true)?;
    Ok(ExperimentSetup { env, policy, smoothing, norm, budgets, seed, gamma, timing })
}

fn divergence_from(keys: &mut Keys) -> Result<DivergenceSpec, ConfigError> {
    match keys.required("divergence")?.as_str() {
        "hockey_stick" => {
            let lambda = keys.f64_or("lambda", 1.0)?;
            DivergenceSpec::hockey_stick(lambda).map_err(|e| err(format!("{e}")))
        }
        "total_variation" => Ok(DivergenceSpec::total_variation()),
        "power_renyi" => {
            let beta = keys.f64_or("beta", 2.0)?;
            DivergenceSpec::power_renyi(beta).map_err(|e| err(format!("{e}")))
        }
        other => Err(err(format!("unknown divergence '{other}'"))),
    }
}

/// `[certify]` section.
pub struct CertifyConfig {
    pub setup: ExperimentSetup,
    pub divergence: DivergenceSpec,
    pub m_opt: usize,
    pub m_eval: usize,
    pub alpha: f64,
}

impl CertifyConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, ConfigError> {
        let mut keys = Keys::new(raw.section("certify")?);
        let setup = setup_from(&mut keys)?;
        let divergence = divergence_from(&mut keys)?;
        let m_opt = keys.usize_or("m_opt", 1000)?;
        let m_eval = keys.usize_or("m_eval", 10000)?;
        let alpha = keys.f64_or("alpha", 0.01)?;
        if m_opt == 0 || m_eval == 0 {
            return Err(err("m_opt and m_eval must be positive"));
        }
        if !(0.0..1.0).contains(&alpha) || alpha == 0.0 {
            return Err(err(format!("alpha must lie in (0,1), got {alpha}")));
        }
        keys.reject_unknown()?;
        Ok(CertifyConfig { setup, divergence, m_opt, m_eval, alpha })
    }
}

/// `[attack]` section.
pub struct AttackConfig {
    pub setup: ExperimentSetup,
    pub episodes: usize,
    pub candidates: usize,
    pub score_horizon: usize,
    pub score_reps: usize,
    pub gap_threshold: f64,
}

impl AttackConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, ConfigError> {
        let mut keys = Keys::new(raw.section("attack")?);
        let setup = setup_from(&mut keys)?;
        let episodes = keys.usize_or("episodes", 200)?;
        let candidates = keys.usize_or("candidates", 8)?;
        let score_horizon = keys.usize_or("score_horizon", 20)?;
        let score_reps = keys.usize_or("score_reps", 5)?;
        let gap_threshold = keys.f64_or("gap_threshold", 0.0)?;
        if episodes == 0 {
            return Err(err("episodes must be positive"));
        }
        keys.reject_unknown()?;
        Ok(AttackConfig { setup, episodes, candidates, score_horizon, score_reps, gap_threshold })
    }
}

/// `[oracle]` section.
pub struct OracleConfig {
    pub conjugate_points: usize,
    pub budget_trials: usize,
    pub primal_instances: usize,
    pub seed: u64,
}

impl OracleConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, ConfigError> {
        let mut keys = Keys::new(raw.section("oracle")?);
        let conjugate_points = keys.usize_or("conjugate_points", 200)?;
        let budget_trials = keys.usize_or("budget_trials", 100)?;
        let primal_instances = keys.usize_or("primal_instances", 50)?;
        let seed = keys.u64_or("seed", 7)?;
        keys.reject_unknown()?;
        Ok(OracleConfig { conjugate_points, budget_trials, primal_instances, seed })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
# experiment record
seed = 42

[certify]
env = cartpole
policy = pd
smoothing = gaussian
sigma = 0.2
divergence = hockey_stick
lambda = 1.0
norm = l2
budgets = 0, 0.2, 0.4

[attack]
env = cartpole
policy = pd
smoothing = gaussian
sigma = 0.2
norm = l2
budgets = 0,1,2
episodes = 10
";

    #[test]
    fn parses_sections_with_global_seed() {
        let raw = RawConfig::parse(SAMPLE).unwrap();
        let certify = CertifyConfig::from_raw(&raw).unwrap();
        assert_eq!(certify.setup.seed, 42);
        assert_eq!(certify.setup.budgets, vec![0.0, 0.2, 0.4]);
        assert_eq!(certify.m_opt, 1000);
        let attack = AttackConfig::from_raw(&raw).unwrap();
        assert_eq!(attack.episodes, 10);
        assert_eq!(attack.setup.norm, NormKind::L2);
    }

    #[test]
    fn rejects_unknown_keys() {
        let text = format!("{SAMPLE}\ntypo_key = 1\n");
        let raw = RawConfig::parse(&text).unwrap();
        assert!(AttackConfig::from_raw(&raw).is_err());
    }

    #[test]
    fn rejects_bad_lines_and_missing_sections() {
        assert!(RawConfig::parse("not a kv line").is_err());
        let raw = RawConfig::parse("[certify]\nenv = cartpole\n").unwrap();
        assert!(CertifyConfig::from_raw(&raw).is_err()); // missing keys
        assert!(raw.section("oracle").is_err());
    }

    #[test]
    fn rejects_mismatched_policy_env() {
        let text = "\
[certify]
env = chain
policy = pd
smoothing = gaussian
sigma = 0.2
divergence = total_variation
norm = l1
budgets = 0
";
        let raw = RawConfig::parse(text).unwrap();
        assert!(CertifyConfig::from_raw(&raw).is_err());
    }

    #[test]
    fn oracle_defaults() {
        let raw = RawConfig::parse("[oracle]\nseed = 3\n").unwrap();
        let cfg = OracleConfig::from_raw(&raw).unwrap();
        assert_eq!(cfg.conjugate_points, 200);
        assert_eq!(cfg.budget_trials, 100);
        assert_eq!(cfg.primal_instances, 50);
        assert_eq!(cfg.seed, 3);
    }
}
