use certrl::dual::{certify_with_samples, solve_dual_anchored, CertifyParams, WeightedSamples};
use certrl::env::EnvKind;
use certrl::model::{NormKind, PerturbationBudget, SmoothingConfig};
use certrl::policy::PdController;
use certrl::rollout::{smoothing_reward_set, EVAL_SEED_OFFSET};
use certrl::DivergenceSpec;

fn main() {
    let smoothing = SmoothingConfig::gaussian(0.2).unwrap();
    let params = CertifyParams { seed_base: 42, ..Default::default() };
    let opt = smoothing_reward_set(EnvKind::Cartpole, &PdController, smoothing, 1000, 42, 1.0).unwrap();
    let eval = smoothing_reward_set(EnvKind::Cartpole, &PdController, smoothing, 10000, 42 + EVAL_SEED_OFFSET, 1.0).unwrap();
    let spec = DivergenceSpec::hockey_stick(1.0).unwrap();
    let samples = WeightedSamples::uniform(&opt.values).unwrap();
    let (p1min, p2min) = (
        opt.values.iter().cloned().fold(f64::MAX, f64::min),
        eval.values.iter().cloned().fold(f64::MAX, f64::min),
    );
    println!("phase1 min={p1min} phase2 min={p2min}");
    for eps in [0.8, 1.0, 1.2, 1.4, 1.6] {
        let eps_d = certrl::divergence::hs_budget(eps, 0.2, 1.0).unwrap();
        let sol = solve_dual_anchored(&samples, &spec, eps_d, Some(0.0)).unwrap();
        let cert = certify_with_samples(
            EnvKind::Cartpole, smoothing, &spec,
            PerturbationBudget::new(NormKind::L2, eps).unwrap(),
            &params, &opt, &eval,
        ).unwrap();
        // phase-2 h statistics
        let h: Vec<f64> = eval.values.iter().map(|&j| spec.conjugate(sol.eta + eps_d - j / sol.nu)).collect();
        let h_mean: f64 = h.iter().sum::<f64>() / h.len() as f64;
        println!(
            "eps={eps}: eps_d={eps_d:.6} nu={:.4} eta={:.6} obj1={:.4} h2mean={:.6} nu*h2={:.4} nu*zeta={:.4} bound={:.4}",
            sol.nu, sol.eta, sol.objective, h_mean, sol.nu * h_mean, sol.nu * cert.zeta, cert.bound
        );
    }
}
