//! Acceptance suite: the release gate for the certification toolkit.
//!
//! Each test implements one numbered criterion at its stated tolerance and
//! prints a `criterion NN ...: PASS` line with the measured margins (run
//! with `--nocapture` to see them). A failed assertion marks the criterion
//! FAILED through the harness.

use certrl::attack::{l0_action_attack, obs_attack, ObsAttackParams};
use certrl::divergence::DivergenceSpec;
use certrl::dual::{
    certify, certify_with_samples, hoeffding_radius, solve_dual, CertifyParams, WeightedSamples,
};
use certrl::env::EnvKind;
use certrl::model::{NormKind, PerturbationBudget, SmoothingConfig};
use certrl::policy::{PdController, ThresholdPolicy};
use certrl::rollout::{smoothing_reward_set, EVAL_SEED_OFFSET};
use certrl_cli::commands::{run_budget_suite, run_conjugate_suite, run_duality_suite};
use std::path::Path;
use std::time::Instant;

const GRID_SEED: u64 = 42;

#[test]
fn criterion_01_conjugate_correctness() {
    let t0 = Instant::now();
    let max_dev = run_conjugate_suite(200, 20240801).unwrap();
    let elapsed = t0.elapsed();
    assert!(max_dev < 1e-6, "max conjugate deviation {max_dev}");
    assert!(elapsed.as_secs_f64() < 10.0, "conjugate suite took {elapsed:?}");
    println!(
        "criterion 01 conjugate-correctness: PASS (max dev {max_dev:.2e} over 8 specs x 200 points, {elapsed:.2?})"
    );
}

#[test]
fn criterion_02_budget_correctness() {
    let (max_dev, id_dev) = run_budget_suite(100, 20240802).unwrap();
    assert!(max_dev < 1e-6, "budget closed form vs quadrature deviation {max_dev}");
    assert!(id_dev < 1e-9, "hs(lambda=1) vs tv deviation {id_dev}");
    println!(
        "criterion 02 budget-correctness: PASS (quadrature dev {max_dev:.2e}, hs1=tv dev {id_dev:.2e})"
    );
}

#[test]
fn criterion_03_duality() {
    let t0 = Instant::now();
    let (max_gap, violations) = run_duality_suite(50, 20240803).unwrap();
    let elapsed = t0.elapsed();
    assert_eq!(violations, 0, "weak duality violated on {violations} instances");
    assert!(max_gap <= 1e-4, "duality gap {max_gap}");
    assert!(elapsed.as_secs_f64() < 30.0, "duality suite took {elapsed:?}");
    println!(
        "criterion 03 duality: PASS (max gap {max_gap:.2e}, 0 weak-duality violations, {elapsed:.2?})"
    );
}

#[test]
fn criterion_04_cdf_baseline_dominance() {
    use certrl::dual::{cdf_baseline, CdfMode};
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(20240804);
    let mut refining = 0usize;
    for set_idx in 0..20 {
        let samples: Vec<f64> = (0..60).map(|_| rng.gen_range(0.0..10.0)).collect();
        let spec = match set_idx % 4 {
            0 => DivergenceSpec::hockey_stick(2.0).unwrap(),
            1 => DivergenceSpec::hockey_stick(1.0).unwrap(),
            2 => DivergenceSpec::total_variation(),
            _ => DivergenceSpec::power_renyi(2.0).unwrap(),
        };
        let eps_d = rng.gen_range(0.0..0.6);
        let full = solve_dual(&WeightedSamples::uniform(&samples).unwrap(), &spec, eps_d)
            .unwrap()
            .objective;
        let mut gaps = Vec::new();
        for n in [1usize, 5, 20] {
            let thresholds: Vec<f64> =
                (1..=n).map(|i| 10.0 * i as f64 / (n as f64 + 1.0)).collect();
            let baseline = cdf_baseline(
                &samples,
                &thresholds,
                (-0.5, 10.5),
                &spec,
                eps_d,
                CdfMode::Plain,
            )
            .unwrap();
            assert!(
                full >= baseline - 1e-9,
                "set {set_idx} n={n}: baseline {baseline} above dual {full}"
            );
            gaps.push(full - baseline);
        }
        if gaps[0] >= gaps[1] - 1e-9 && gaps[1] >= gaps[2] - 1e-9 {
            refining += 1;
        }
    }
    assert!(refining >= 18, "gap shrank under refinement on only {refining}/20 sets");
    println!(
        "criterion 04 cdf-baseline-dominance: PASS (dominance on 20/20 sets, refinement on {refining}/20)"
    );
}

#[test]
fn criterion_05_zero_budget_consistency() {
    let cert = certify(
        EnvKind::Cartpole,
        &PdController,
        SmoothingConfig::gaussian(0.2).unwrap(),
        &DivergenceSpec::hockey_stick(1.0).unwrap(),
        PerturbationBudget::new(NormKind::L2, 0.0).unwrap(),
        &CertifyParams { seed_base: GRID_SEED, ..Default::default() },
    )
    .unwrap();
    let slack = cert.dual.nu * cert.zeta;
    assert!(
        cert.bound >= cert.eval_mean - slack - 1e-6,
        "bound {} below mean - nu*zeta - 1e-6 = {}",
        cert.bound,
        cert.eval_mean - slack - 1e-6
    );
    assert!(cert.bound <= cert.eval_mean, "bound {} above mean {}", cert.bound, cert.eval_mean);
    let relative = slack / 200.0;
    assert!(relative < 0.02, "relative slack {relative}");
    println!(
        "criterion 05 zero-budget-consistency: PASS (bound {:.4}, eval mean {:.4}, slack {:.4} = {:.2}% of 200)",
        cert.bound,
        cert.eval_mean,
        slack,
        relative * 100.0
    );
}

/// The six criterion-6 grids: (label, smoothing, divergence, norm, budgets).
fn grid_configs() -> Vec<(String, SmoothingConfig, DivergenceSpec, NormKind, Vec<f64>)> {
    let eps_grid: Vec<f64> = (0..11).map(|i| i as f64 * 0.2).collect();
    let flip_grid: Vec<f64> = (0..11).map(|i| i as f64).collect();
    let mut grids = Vec::new();
    for &sigma in &[0.2, 0.6] {
        grids.push((
            format!("l2 sigma={sigma}"),
            SmoothingConfig::gaussian(sigma).unwrap(),
            DivergenceSpec::hockey_stick(1.0).unwrap(),
            NormKind::L2,
            eps_grid.clone(),
        ));
    }
    for &sigma in &[0.2, 0.6] {
        grids.push((
            format!("l1 sigma={sigma}"),
            SmoothingConfig::gaussian(sigma).unwrap(),
            DivergenceSpec::total_variation(),
            NormKind::L1,
            eps_grid.clone(),
        ));
    }
    for &p in &[0.1, 0.2] {
        grids.push((
            format!("l0 p={p}"),
            SmoothingConfig::action_flip(p).unwrap(),
            DivergenceSpec::power_renyi(2.0).unwrap(),
            NormKind::L0Steps,
            flip_grid.clone(),
        ));
    }
    grids
}

/// Certified bounds for one grid, drawing each phase once.
fn certified_curve(
    smoothing: SmoothingConfig,
    spec: &DivergenceSpec,
    norm: NormKind,
    budgets: &[f64],
) -> Vec<f64> {
    let params = CertifyParams { seed_base: GRID_SEED, ..Default::default() };
    let opt_set = smoothing_reward_set(
        EnvKind::Cartpole,
        &PdController,
        smoothing,
        params.m_opt,
        params.seed_base,
        params.gamma,
    )
    .unwrap();
    let eval_set = smoothing_reward_set(
        EnvKind::Cartpole,
        &PdController,
        smoothing,
        params.m_eval,
        params.seed_base + EVAL_SEED_OFFSET,
        params.gamma,
    )
    .unwrap();
    budgets
        .iter()
        .map(|&eps| {
            certify_with_samples(
                EnvKind::Cartpole,
                smoothing,
                spec,
                PerturbationBudget::new(norm, eps).unwrap(),
                &params,
                &opt_set,
                &eval_set,
            )
            .unwrap()
            .bound
        })
        .collect()
}

#[test]
fn criterion_06_monotonicity() {
    let t0 = Instant::now();
    for (label, smoothing, spec, norm, budgets) in grid_configs() {
        let bounds = certified_curve(smoothing, &spec, norm, &budgets);
        for w in bounds.windows(2) {
            assert!(
                w[1] <= w[0],
                "{label}: bound increased along the grid: {bounds:?}"
            );
        }
    }
    let elapsed = t0.elapsed();
    assert!(elapsed.as_secs_f64() < 900.0, "grids took {elapsed:?}");
    println!(
        "criterion 06 monotonicity: PASS (6 grids x 11 budgets nonincreasing, {elapsed:.2?})"
    );
}

#[test]
fn criterion_07_soundness_sandwich() {
    let t0 = Instant::now();
    let attack_episodes = 200;
    let slack = 2.0 * hoeffding_radius(200.0, attack_episodes, 0.01).unwrap();
    let mut pairs = 0usize;
    let mut violations = 0usize;
    for (label, smoothing, spec, norm, budgets) in grid_configs() {
        let bounds = certified_curve(smoothing, &spec, norm, &budgets);
        for (&eps, &bound) in budgets.iter().zip(&bounds) {
            let attacked = match norm {
                NormKind::L2 | NormKind::L1 => {
                    let params =
                        ObsAttackParams::new(norm, eps, attack_episodes, GRID_SEED).unwrap();
                    obs_attack(EnvKind::Cartpole, &PdController, smoothing, &params).unwrap()
                }
                NormKind::L0Steps => l0_action_attack(
                    EnvKind::Cartpole,
                    &PdController,
                    smoothing,
                    eps as usize,
                    0.0,
                    attack_episodes,
                    GRID_SEED,
                )
                .unwrap(),
            };
            let mean: f64 =
                attacked.values.iter().sum::<f64>() / attacked.values.len() as f64;
            pairs += 1;
            if bound > mean + slack {
                violations += 1;
                eprintln!(
                    "sandwich violated: {label} eps={eps}: bound {bound:.3} > attacked {mean:.3} + {slack:.3}"
                );
            }
        }
    }
    assert_eq!(violations, 0, "{violations} sandwich violations");
    println!(
        "criterion 07 soundness-sandwich: PASS ({pairs} attack/budget pairs, 0 violations, slack {slack:.2}, {:.2?})",
        t0.elapsed()
    );
}

#[test]
fn criterion_08_statistical_coverage() {
    let policy = ThresholdPolicy::bernoulli_seventy();
    let smoothing = SmoothingConfig::gaussian(1.0).unwrap();
    let spec = DivergenceSpec::hockey_stick(1.0).unwrap();
    let budget = PerturbationBudget::new(NormKind::L2, 0.0).unwrap();
    let true_mean = EnvKind::Bernoulli.build().descriptor().reward_range.1 * 0.7;
    let mut violations = 0usize;
    for run in 0..200u64 {
        let params = CertifyParams { seed_base: run << 22, ..Default::default() };
        let cert = certify(EnvKind::Bernoulli, &policy, smoothing, &spec, budget, &params).unwrap();
        if cert.bound > true_mean {
            violations += 1;
        }
    }
    assert!(violations <= 4, "bound exceeded the true mean {violations} times");
    println!(
        "criterion 08 statistical-coverage: PASS ({violations}/200 exceedances, nominal 2, allowed 4)"
    );
}

#[test]
fn criterion_09_solver_speed() {
    let set = smoothing_reward_set(
        EnvKind::Cartpole,
        &PdController,
        SmoothingConfig::gaussian(0.2).unwrap(),
        10_000,
        7,
        1.0,
    )
    .unwrap();
    let samples = WeightedSamples::uniform(&set.values).unwrap();
    let mut worst = 0.0_f64;
    for spec in [
        DivergenceSpec::hockey_stick(1.0).unwrap(),
        DivergenceSpec::hockey_stick(2.0).unwrap(),
        DivergenceSpec::total_variation(),
        DivergenceSpec::power_renyi(2.0).unwrap(),
        DivergenceSpec::power_renyi(0.5).unwrap(),
    ] {
        // best of three, so scheduler noise from parallel tests cannot
        // flunk a timing criterion
        let mut best = f64::INFINITY;
        for _ in 0..3 {
            let t0 = Instant::now();
            let sol = solve_dual(&samples, &spec, 0.3).unwrap();
            best = best.min(t0.elapsed().as_secs_f64());
            assert!(sol.objective.is_finite());
        }
        assert!(best <= 0.1, "{spec:?} solve took {best:.4}s on 10k samples");
        worst = worst.max(best);
    }
    println!(
        "criterion 09 solver-speed: PASS (slowest divergence {:.1} ms per budget on 10k samples, limit 100 ms)",
        worst * 1e3
    );
}

#[test]
fn criterion_10_determinism_across_workers() {
    let binary = env!("CARGO_BIN_EXE_certrl");
    let dir = tempfile::tempdir().unwrap();
    let configs = [
        (
            "l2.cfg",
            "\
[certify]
env = cartpole
policy = pd
smoothing = gaussian
sigma = 0.2
divergence = hockey_stick
lambda = 1.0
norm = l2
budgets = 0,0.2,0.4,0.6,0.8,1.0,1.2,1.4,1.6,1.8,2.0
m_opt = 1000
m_eval = 10000
alpha = 0.01
seed = 42
timing = off
",
        ),
        (
            "l0.cfg",
            "\
[certify]
env = cartpole
policy = pd
smoothing = action_flip
flip_prob = 0.1
divergence = power_renyi
beta = 2.0
norm = l0_steps
budgets = 0,1,2,3,4,5,6,7,8,9,10
m_opt = 1000
m_eval = 10000
alpha = 0.01
seed = 42
timing = off
",
        ),
    ];
    for (name, body) in configs {
        let config = dir.path().join(name);
        std::fs::write(&config, body).unwrap();
        let run = |workers: &str, out_name: &str| -> Vec<u8> {
            let out = dir.path().join(out_name);
            let status = std::process::Command::new(binary)
                .args([
                    "certify",
                    config.to_str().unwrap(),
                    "--out",
                    out.to_str().unwrap(),
                    "--workers",
                    workers,
                ])
                .status()
                .unwrap();
            assert!(status.success());
            std::fs::read(&out).unwrap()
        };
        let w1 = run("1", &format!("{name}.w1.csv"));
        let w4 = run("4", &format!("{name}.w4.csv"));
        let w1_again = run("1", &format!("{name}.w1b.csv"));
        assert_eq!(w1, w4, "{name}: worker count changed the CSV bytes");
        assert_eq!(w1, w1_again, "{name}: rerun changed the CSV bytes");
        let text = String::from_utf8(w1).unwrap();
        assert_eq!(text.lines().count(), 12, "{name}: header + 11 rows");
    }
    println!(
        "criterion 10 determinism: PASS (2 configs x workers {{1,4}} x rerun byte-identical)"
    );
}

/// Smoke check that the sample-set files written by rollouts reload
/// losslessly (the interchange surface between rollout and solver).
#[test]
fn sample_set_file_interchange() {
    use certrl::model::RewardSampleSet;
    let dir = tempfile::tempdir().unwrap();
    let set = smoothing_reward_set(
        EnvKind::Cartpole,
        &PdController,
        SmoothingConfig::gaussian(0.4).unwrap(),
        50,
        3,
        1.0,
    )
    .unwrap();
    let path: std::path::PathBuf = Path::new(dir.path()).join("samples.txt");
    set.write_file(&path).unwrap();
    let back = RewardSampleSet::read_file(&path).unwrap();
    assert_eq!(back, set);
}
