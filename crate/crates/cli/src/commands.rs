//! The three batch commands. Each reads its section of the config file,
//! runs the experiment grid and writes one CSV (or key=value report) to
//! the requested output.
//!
//! Column contracts (stable across versions):
//!
//! * `certify`: `epsilon,eps_d,bound,nu,eta,zeta,empirical_mean,runtime_ms`
//! * `attack`:  `epsilon,attacked_mean,attack_min,attack_max,episodes,runtime_ms`
//!
//! All randomness flows from the config seed; `runtime_ms` (wall clock
//! around the dual solve / the attack run) is the only nondeterministic
//! field and prints as `0.000` when the config sets `timing = off`.

use crate::config::{AttackConfig, CertifyConfig, ConfigError, OracleConfig, RawConfig};
use certrl::attack::{l0_action_attack, obs_attack, ObsAttackParams};
use certrl::divergence::oracle::{numeric_budget_oracle, numeric_conjugate_oracle};
use certrl::divergence::{hs_budget, tv_budget, DivergenceSpec};
use certrl::dual::{
    certify_with_samples, primal_oracle, solve_dual, solve_dual_anchored, CertifyParams,
    FinitePrimal, WeightedSamples,
};
use certrl::model::{NormKind, PerturbationBudget};
use certrl::rollout::{empirical_mean_and_range, smoothing_reward_set, EVAL_SEED_OFFSET};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

/// Command failure, split by exit-code class.
#[derive(Debug)]
pub enum CmdError {
    Config(String),
    Runtime(String),
}

impl std::fmt::Display for CmdError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CmdError::Config(m) => write!(f, "{m}"),
            CmdError::Runtime(m) => write!(f, "{m}"),
        }
    }
}

impl From<ConfigError> for CmdError {
    fn from(e: ConfigError) -> Self {
        CmdError::Config(e.to_string())
    }
}

impl From<certrl::Error> for CmdError {
    fn from(e: certrl::Error) -> Self {
        CmdError::Runtime(e.to_string())
    }
}

fn load(config_path: &Path) -> Result<RawConfig, CmdError> {
    let text = std::fs::read_to_string(config_path).map_err(|e| {
        CmdError::Config(format!("cannot read config {}: {e}", config_path.display()))
    })?;
    Ok(RawConfig::parse(&text)?)
}

fn emit(out: Option<&Path>, content: &str) -> Result<(), CmdError> {
    match out {
        Some(path) => std::fs::write(path, content)
            .map_err(|e| CmdError::Runtime(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

/// Runs the `[certify]` experiment: one CSV row per budget grid point.
pub fn cmd_certify(config_path: &Path, out: Option<&Path>) -> Result<(), CmdError> {
    let cfg = CertifyConfig::from_raw(&load(config_path)?)?;
    let setup = &cfg.setup;
    let params = CertifyParams {
        m_opt: cfg.m_opt,
        m_eval: cfg.m_eval,
        alpha: cfg.alpha,
        seed_base: setup.seed,
        gamma: setup.gamma,
    };

    // both phases are drawn once and reused across the budget grid
    let opt_set = smoothing_reward_set(
        setup.env,
        setup.policy.as_ref(),
        setup.smoothing,
        cfg.m_opt,
        setup.seed,
        setup.gamma,
    )?;
    let eval_set = smoothing_reward_set(
        setup.env,
        setup.policy.as_ref(),
        setup.smoothing,
        cfg.m_eval,
        setup.seed + EVAL_SEED_OFFSET,
        setup.gamma,
    )?;

    let mut csv = String::from("epsilon,eps_d,bound,nu,eta,zeta,empirical_mean,runtime_ms\n");
    for &eps in &setup.budgets {
        let budget = PerturbationBudget::new(setup.norm, eps)?;
        let cert = certify_with_samples(
            setup.env,
            setup.smoothing,
            &cfg.divergence,
            budget,
            &params,
            &opt_set,
            &eval_set,
        )?;
        let runtime_ms = if setup.timing {
            // the per-budget runtime claim covers the solve alone, so time
            // a standalone solve on the same inputs
            let samples = WeightedSamples::uniform(&opt_set.values)?;
            let floor = setup.env.descriptor().reward_bounds().0;
            let t0 = Instant::now();
            let _ = solve_dual_anchored(&samples, &cfg.divergence, cert.eps_d, Some(floor))?;
            t0.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        };
        let _ = writeln!(
            csv,
            "{:.6},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.3}",
            eps, cert.eps_d, cert.bound, cert.dual.nu, cert.dual.eta, cert.zeta, cert.eval_mean,
            runtime_ms
        );
    }
    emit(out, &csv)
}

/// Runs the `[attack]` experiment: one CSV row per budget grid point.
pub fn cmd_attack(config_path: &Path, out: Option<&Path>) -> Result<(), CmdError> {
    let cfg = AttackConfig::from_raw(&load(config_path)?)?;
    let setup = &cfg.setup;

    let mut csv = String::from("epsilon,attacked_mean,attack_min,attack_max,episodes,runtime_ms\n");
    for &eps in &setup.budgets {
        let budget = PerturbationBudget::new(setup.norm, eps)?;
        let t0 = Instant::now();
        let set = match setup.norm {
            NormKind::L2 | NormKind::L1 => {
                let mut params = ObsAttackParams::new(setup.norm, eps, cfg.episodes, setup.seed)?;
                params.num_candidates = cfg.candidates;
                params.score_horizon = cfg.score_horizon;
                params.score_reps = cfg.score_reps;
                params.gamma = setup.gamma;
                obs_attack(setup.env, setup.policy.as_ref(), setup.smoothing, &params)?
            }
            NormKind::L0Steps => l0_action_attack(
                setup.env,
                setup.policy.as_ref(),
                setup.smoothing,
                budget.attacked_steps(),
                cfg.gap_threshold,
                cfg.episodes,
                setup.seed,
            )?,
        };
        let runtime_ms = if setup.timing {
            t0.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        };
        let (mean, min, max) = empirical_mean_and_range(&set.values);
        let _ = writeln!(
            csv,
            "{:.6},{:.10e},{:.10e},{:.10e},{},{:.3}",
            eps, mean, min, max, cfg.episodes, runtime_ms
        );
    }
    emit(out, &csv)
}

/// Report from the oracle suites with the largest observed deviations.
pub struct OracleReport {
    pub conjugate_max_abs_dev: f64,
    pub budget_max_abs_dev: f64,
    pub hs_tv_lambda1_max_dev: f64,
    pub duality_max_abs_gap: f64,
    pub weak_duality_violations: usize,
}

impl OracleReport {
    pub fn within_tolerances(&self) -> bool {
        self.conjugate_max_abs_dev < 1e-6
            && self.budget_max_abs_dev < 1e-6
            && self.hs_tv_lambda1_max_dev < 1e-9
            && self.duality_max_abs_gap <= 1e-4
            && self.weak_duality_violations == 0
    }

    pub fn to_text(&self) -> String {
        format!(
            "conjugate_max_abs_dev={:.3e}\nbudget_max_abs_dev={:.3e}\nhs_tv_lambda1_max_dev={:.3e}\nduality_max_abs_gap={:.3e}\nweak_duality_violations={}\n",
            self.conjugate_max_abs_dev,
            self.budget_max_abs_dev,
            self.hs_tv_lambda1_max_dev,
            self.duality_max_abs_gap,
            self.weak_duality_violations
        )
    }
}

/// The divergence set the conjugate suite sweeps.
pub fn conjugate_suite_specs() -> Vec<DivergenceSpec> {
    vec![
        DivergenceSpec::hockey_stick(0.5).unwrap(),
        DivergenceSpec::hockey_stick(1.0).unwrap(),
        DivergenceSpec::hockey_stick(2.0).unwrap(),
        DivergenceSpec::hockey_stick(5.0).unwrap(),
        DivergenceSpec::total_variation(),
        DivergenceSpec::power_renyi(0.5).unwrap(),
        DivergenceSpec::power_renyi(2.0).unwrap(),
        DivergenceSpec::power_renyi(4.0).unwrap(),
    ]
}

/// Closed-form conjugates vs the grid-supremum oracle over in-domain
/// points.
pub fn run_conjugate_suite(points: usize, seed: u64) -> Result<f64, CmdError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_dev = 0.0_f64;
    for spec in conjugate_suite_specs() {
        for _ in 0..points {
            let y = match spec {
                DivergenceSpec::HockeyStick { .. } => rng.gen_range(-3.0..1.0),
                DivergenceSpec::TotalVariation => rng.gen_range(-3.0..0.5),
                DivergenceSpec::PowerRenyi { beta } => {
                    if beta > 1.0 {
                        rng.gen_range(-3.0..3.0)
                    } else {
                        rng.gen_range(-4.0..-0.02)
                    }
                }
            };
            let closed = spec.conjugate(y);
            let oracle = numeric_conjugate_oracle(&spec, y)?;
            let dev = (closed - oracle).abs();
            if dev > max_dev {
                max_dev = dev;
            }
        }
    }
    Ok(max_dev)
}

/// Gaussian budget closed forms vs adaptive quadrature on random
/// `(epsilon, sigma, lambda)` triples; also tracks the hockey-stick
/// lambda=1 vs total-variation identity.
pub fn run_budget_suite(trials: usize, seed: u64) -> Result<(f64, f64), CmdError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_dev = 0.0_f64;
    let mut max_id_dev = 0.0_f64;
    for _ in 0..trials {
        let eps = rng.gen_range(0.0..3.0);
        let sigma = rng.gen_range(0.1..2.0);
        let lambda = rng.gen_range(0.5..5.0);

        let hs_spec = DivergenceSpec::hockey_stick(lambda).unwrap();
        let closed = hs_budget(eps, sigma, lambda)?;
        let quad = numeric_budget_oracle(&hs_spec, eps, sigma)?;
        max_dev = max_dev.max((closed - quad).abs());

        let tv_closed = tv_budget(eps, sigma)?;
        let tv_quad = numeric_budget_oracle(&DivergenceSpec::total_variation(), eps, sigma)?;
        max_dev = max_dev.max((tv_closed - tv_quad).abs());

        max_id_dev = max_id_dev.max((hs_budget(eps, sigma, 1.0)? - tv_closed).abs());
    }
    Ok((max_dev, max_id_dev))
}

/// A random finite-support instance for the duality suite.
pub fn random_primal_instance(rng: &mut ChaCha8Rng, trial: usize) -> FinitePrimal {
    let m = rng.gen_range(2..=32);
    let mut probs: Vec<f64> = (0..m).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    let rewards: Vec<f64> = (0..m).map(|_| rng.gen_range(-3.0..5.0)).collect();
    let spec = match trial % 5 {
        0 => DivergenceSpec::hockey_stick(rng.gen_range(0.5..5.0)).unwrap(),
        1 => DivergenceSpec::hockey_stick(1.0).unwrap(),
        2 => DivergenceSpec::total_variation(),
        3 => DivergenceSpec::power_renyi(2.0).unwrap(),
        _ => DivergenceSpec::power_renyi(0.5).unwrap(),
    };
    let eps_d = match spec {
        DivergenceSpec::TotalVariation => rng.gen_range(0.0..0.9),
        _ => rng.gen_range(0.0..1.5),
    };
    FinitePrimal::new(probs, rewards, spec, eps_d).unwrap()
}

/// solve_dual vs the brute-force primal on random finite instances.
/// Returns `(max |gap|, weak-duality violations)`.
pub fn run_duality_suite(instances: usize, seed: u64) -> Result<(f64, usize), CmdError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_gap = 0.0_f64;
    let mut violations = 0usize;
    for trial in 0..instances {
        let instance = random_primal_instance(&mut rng, trial);
        let samples = WeightedSamples::from_pairs(
            instance.rewards.iter().copied().zip(instance.probs.iter().copied()),
        )?;
        let dual = solve_dual(&samples, &instance.spec, instance.eps_d)?.objective;
        let primal = primal_oracle(&instance)?;
        if dual > primal + 1e-9 {
            violations += 1;
        }
        max_gap = max_gap.max((dual - primal).abs());
    }
    Ok((max_gap, violations))
}

/// Runs all three oracle suites and writes the deviation report.
pub fn cmd_oracle(config_path: &Path, out: Option<&Path>) -> Result<(), CmdError> {
    let cfg = OracleConfig::from_raw(&load(config_path)?)?;
    let conjugate_max_abs_dev = run_conjugate_suite(cfg.conjugate_points, cfg.seed)?;
    let (budget_max_abs_dev, hs_tv_lambda1_max_dev) =
        run_budget_suite(cfg.budget_trials, cfg.seed.wrapping_add(1))?;
    let (duality_max_abs_gap, weak_duality_violations) =
        run_duality_suite(cfg.primal_instances, cfg.seed.wrapping_add(2))?;
    let report = OracleReport {
        conjugate_max_abs_dev,
        budget_max_abs_dev,
        hs_tv_lambda1_max_dev,
        duality_max_abs_gap,
        weak_duality_violations,
    };
    emit(out, &report.to_text())?;
    if !report.within_tolerances() {
        return Err(CmdError::Runtime(format!(
            "oracle deviations exceed tolerances:\n{}",
            report.to_text()
        )));
    }
    Ok(())
}
