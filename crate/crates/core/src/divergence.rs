//! f-divergences used for certification, their convex conjugates, and the
//! maps from perturbation radii to divergence budgets.
//!
//! Three families are supported (`f` convex, `f(1) = 0` in all cases):
//!
//! | kind            | f(x)                              | used for |
//! |-----------------|-----------------------------------|----------|
//! | hockey-stick    | max(x - lambda, 0) - max(1 - lambda, 0) | l2 observation budgets |
//! | total variation | |x - 1| / 2                       | l1 observation budgets |
//! | power           | (x^beta - 1) / (beta - 1)         | l0 action budgets |
//!
//! The conjugate is taken over the nonnegative half-line,
//! `f*(y) = sup_{x >= 0} (x y - f(x))`, and returns `f64::INFINITY` where
//! the supremum diverges; the dual solver treats that as an infeasible
//! point, not an error.
//!
//! Each closed form is paired with an independent numeric oracle (grid
//! supremum for conjugates, adaptive quadrature for Gaussian budgets) in
//! [`oracle`]; the test suite refuses to trust a closed form the oracle
//! does not reproduce.

use crate::error::{Error, Result};
use crate::numeric::std_normal_cdf;

pub mod oracle;

/// Which f-divergence, with its parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DivergenceSpec {
    /// f(x) = max(x - lambda, 0) - max(1 - lambda, 0), lambda > 0.
    HockeyStick { lambda: f64 },
    /// f(x) = |x - 1| / 2.
    TotalVariation,
    /// f(x) = (x^beta - 1) / (beta - 1), beta > 1 or 0 <= beta < 1.
    PowerRenyi { beta: f64 },
}

impl DivergenceSpec {
    pub fn hockey_stick(lambda: f64) -> Result<Self> {
        if lambda <= 0.0 || !lambda.is_finite() {
            return Err(Error::invalid(format!("lambda must be > 0, got {lambda}")));
        }
        Ok(DivergenceSpec::HockeyStick { lambda })
    }

    pub fn total_variation() -> Self {
        DivergenceSpec::TotalVariation
    }

    pub fn power_renyi(beta: f64) -> Result<Self> {
        if !beta.is_finite() || beta < 0.0 || (1.0 - 1e-9..=1.0 + 1e-9).contains(&beta) {
            return Err(Error::invalid(format!(
                "beta must satisfy beta > 1 or 0 <= beta < 1, got {beta}"
            )));
        }
        Ok(DivergenceSpec::PowerRenyi { beta })
    }

    pub fn name(&self) -> &'static str {
        match self {
            DivergenceSpec::HockeyStick { .. } => "hockey_stick",
            DivergenceSpec::TotalVariation => "total_variation",
            DivergenceSpec::PowerRenyi { .. } => "power_renyi",
        }
    }

    /// The generator f evaluated at `x >= 0`.
    pub fn f_value(&self, x: f64) -> Result<f64> {
        if x < 0.0 || !x.is_finite() {
            return Err(Error::invalid(format!("f is only defined for x >= 0, got {x}")));
        }
        Ok(match *self {
            DivergenceSpec::HockeyStick { lambda } => {
                (x - lambda).max(0.0) - (1.0 - lambda).max(0.0)
            }
            DivergenceSpec::TotalVariation => 0.5 * (x - 1.0).abs(),
            DivergenceSpec::PowerRenyi { beta } => {
                if beta == 0.0 {
                    // x^0 = 1 on the whole half-line, so f vanishes.
                    0.0
                } else {
                    (x.powf(beta) - 1.0) / (beta - 1.0)
                }
            }
        })
    }

    /// Convex conjugate `f*(y) = sup_{x >= 0} (x y - f(x))`.
    ///
    /// Returns `f64::INFINITY` where the supremum diverges. Closed forms:
    ///
    /// * hockey-stick: `lambda * max(y, 0) + max(1 - lambda, 0)` for
    ///   `y <= 1`, infinite beyond;
    /// * total variation: `max(y, -1/2)` for `y <= 1/2`, infinite beyond;
    /// * power, beta > 1: `((beta-1) max(y,0) / beta)^(beta/(beta-1)) + 1/(beta-1)`
    ///   on all of R;
    /// * power, 0 < beta < 1: `((1-beta)(-y)/beta)^(beta/(beta-1)) - 1/(1-beta)`
    ///   for `y < 0`, infinite for `y >= 0`;
    /// * power, beta = 0: 0 for `y <= 0`, infinite beyond (f is identically
    ///   zero there).
    pub fn conjugate(&self, y: f64) -> f64 {
        match *self {
            DivergenceSpec::HockeyStick { lambda } => {
                if y > 1.0 {
                    f64::INFINITY
                } else {
                    lambda * y.max(0.0) + (1.0 - lambda).max(0.0)
                }
            }
            DivergenceSpec::TotalVariation => {
                if y > 0.5 {
                    f64::INFINITY
                } else {
                    y.max(-0.5)
                }
            }
            DivergenceSpec::PowerRenyi { beta } => {
                if beta > 1.0 {
                    ((beta - 1.0) * y.max(0.0) / beta).powf(beta / (beta - 1.0))
                        + 1.0 / (beta - 1.0)
                } else if beta == 0.0 {
                    if y > 0.0 {
                        f64::INFINITY
                    } else {
                        0.0
                    }
                } else if y >= 0.0 {
                    f64::INFINITY
                } else {
                    ((1.0 - beta) * (-y) / beta).powf(beta / (beta - 1.0)) - 1.0 / (1.0 - beta)
                }
            }
        }
    }

    /// Derivative of the conjugate where it is finite; this is the
    /// supremizing `x` in the conjugate's defining problem, which is what
    /// the primal oracle and the smooth inner solver need.
    pub fn conjugate_argmax(&self, y: f64) -> f64 {
        match *self {
            DivergenceSpec::HockeyStick { lambda } => {
                if y > 0.0 {
                    lambda
                } else {
                    0.0
                }
            }
            DivergenceSpec::TotalVariation => {
                if y > -0.5 {
                    1.0
                } else {
                    0.0
                }
            }
            DivergenceSpec::PowerRenyi { beta } => {
                if beta > 1.0 {
                    ((beta - 1.0) * y.max(0.0) / beta).powf(1.0 / (beta - 1.0))
                } else if beta == 0.0 {
                    0.0
                } else if y >= 0.0 {
                    f64::INFINITY
                } else {
                    ((1.0 - beta) * (-y) / beta).powf(1.0 / (beta - 1.0))
                }
            }
        }
    }

    /// Largest `y` with `f*(y)` finite, if the domain is bounded above.
    pub fn conjugate_domain_max(&self) -> Option<f64> {
        match *self {
            DivergenceSpec::HockeyStick { .. } => Some(1.0),
            DivergenceSpec::TotalVariation => Some(0.5),
            DivergenceSpec::PowerRenyi { beta } => {
                if beta > 1.0 {
                    None
                } else {
                    Some(0.0)
                }
            }
        }
    }
}

/// Hockey-stick divergence between N(0, sigma^2 I_D) and N(delta, sigma^2 I_D)
/// with ||delta||_2 = epsilon.
///
/// The likelihood ratio of the two Gaussians depends only on the
/// projection onto the shift direction, so the D-dimensional divergence
/// reduces exactly to the 1-D pair N(0, sigma^2) vs N(epsilon, sigma^2).
/// With `a = epsilon / sigma`:
///
/// ```text
/// D_HS,lambda = Phi(a/2 - ln(lambda)/a) - lambda * Phi(-a/2 - ln(lambda)/a)
///               - max(1 - lambda, 0)
/// ```
///
/// The trailing constant comes from f's own `-max(1 - lambda, 0)` term and
/// makes the budget vanish at epsilon = 0 for every lambda. The Phi
/// expression alone tends to `max(1 - lambda, 0)` as `a -> 0`, which is
/// handled as an explicit limit instead of evaluating `ln(lambda)/a`.
pub fn hs_budget(epsilon: f64, sigma: f64, lambda: f64) -> Result<f64> {
    if sigma <= 0.0 || !sigma.is_finite() {
        return Err(Error::invalid(format!("sigma must be > 0, got {sigma}")));
    }
    if epsilon < 0.0 {
        return Err(Error::invalid(format!("epsilon must be >= 0, got {epsilon}")));
    }
    if lambda <= 0.0 || !lambda.is_finite() {
        return Err(Error::invalid(format!("lambda must be > 0, got {lambda}")));
    }
    let a = epsilon / sigma;
    if a == 0.0 {
        return Ok(0.0);
    }
    let shift = lambda.ln() / a;
    let value =
        std_normal_cdf(a / 2.0 - shift) - lambda * std_normal_cdf(-a / 2.0 - shift);
    Ok((value - (1.0 - lambda).max(0.0)).max(0.0))
}

/// Total variation distance between N(0, sigma^2 I_D) and
/// N(delta, sigma^2 I_D) with ||delta||_2 = epsilon: `2 Phi(eps/(2 sigma)) - 1`.
pub fn tv_budget(epsilon: f64, sigma: f64) -> Result<f64> {
    if sigma <= 0.0 || !sigma.is_finite() {
        return Err(Error::invalid(format!("sigma must be > 0, got {sigma}")));
    }
    if epsilon < 0.0 {
        return Err(Error::invalid(format!("epsilon must be >= 0, got {epsilon}")));
    }
    Ok(2.0 * std_normal_cdf(epsilon / (2.0 * sigma)) - 1.0)
}

/// Power-divergence budget for `attacked_steps` manipulated actions under
/// action-flip smoothing.
///
/// Per attacked step the clean action distribution puts mass `1 - p` on
/// the greedy action and `p/(N-1)` on each alternative; the attacked one
/// is the same distribution recentered on the adversary's action. Their
/// power moment is
///
/// ```text
/// E_p[(q/p)^beta] = (p/(N-1))^beta (1-p)^(1-beta)
///                 + (1-p)^beta (p/(N-1))^(1-beta)
///                 + (N-2) p/(N-1)
/// ```
///
/// Steps are independent, so the moments multiply across attacked steps
/// and the budget is `(prod - 1)/(beta - 1)`.
pub fn l0_budget(attacked_steps: usize, p: f64, num_actions: usize, beta: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&p) || p == 0.0 {
        return Err(Error::invalid(format!(
            "flip probability must lie strictly inside (0,1), got {p}"
        )));
    }
    if num_actions < 2 {
        return Err(Error::invalid(format!(
            "need at least 2 actions, got {num_actions}"
        )));
    }
    // validate beta through the spec constructor
    let spec = DivergenceSpec::power_renyi(beta)?;
    if attacked_steps == 0 {
        return Ok(0.0);
    }
    if beta == 0.0 {
        return Ok(0.0); // f is identically zero
    }
    let n = num_actions as f64;
    let alt = p / (n - 1.0);
    let keep = 1.0 - p;
    let per_step = alt.powf(beta) * keep.powf(1.0 - beta)
        + keep.powf(beta) * alt.powf(1.0 - beta)
        + (n - 2.0) * alt;
    let product = per_step.powi(attacked_steps as i32);
    let _ = spec;
    Ok(((product - 1.0) / (beta - 1.0)).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn all_specs() -> Vec<DivergenceSpec> {
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

    #[test]
    fn f_examples() {
        let hs2 = DivergenceSpec::hockey_stick(2.0).unwrap();
        assert_eq!(hs2.f_value(1.0).unwrap(), 0.0);
        let tv = DivergenceSpec::total_variation();
        assert_eq!(tv.f_value(3.0).unwrap(), 1.0);
        let p2 = DivergenceSpec::power_renyi(2.0).unwrap();
        assert_eq!(p2.f_value(2.0).unwrap(), 3.0);
    }

    #[test]
    fn f_rejects_negative_argument() {
        for spec in all_specs() {
            assert!(spec.f_value(-0.1).is_err(), "{spec:?}");
        }
    }

    #[test]
    fn f_vanishes_at_one_for_every_kind() {
        for spec in all_specs() {
            assert!(spec.f_value(1.0).unwrap().abs() < 1e-15, "{spec:?}");
        }
    }

    #[test]
    fn f_is_midpoint_convex_on_grid() {
        for spec in all_specs() {
            let grid: Vec<f64> = (0..200).map(|i| i as f64 * 0.05).collect();
            for w in grid.windows(3) {
                let (a, m, b) = (w[0], w[1], w[2]);
                let lhs = spec.f_value(m).unwrap();
                let rhs =
                    0.5 * (spec.f_value(a).unwrap() + spec.f_value(b).unwrap());
                assert!(lhs <= rhs + 1e-12, "{spec:?} at {m}");
            }
        }
    }

    #[test]
    fn f_dominates_tangent_at_one() {
        // central-difference subgradient at x = 1
        for spec in all_specs() {
            let h = 1e-6;
            let g = (spec.f_value(1.0 + h).unwrap() - spec.f_value(1.0 - h).unwrap())
                / (2.0 * h);
            for i in 0..100 {
                let x = 0.02 + i as f64 * 0.07;
                let fx = spec.f_value(x).unwrap();
                assert!(fx >= g * (x - 1.0) - 1e-9, "{spec:?} at {x}");
            }
        }
    }

    #[test]
    fn conjugate_examples() {
        let hs2 = DivergenceSpec::hockey_stick(2.0).unwrap();
        assert_eq!(hs2.conjugate(0.0), 0.0);
        let tv = DivergenceSpec::total_variation();
        assert_eq!(tv.conjugate(-2.0), -0.5);
        assert!(tv.conjugate(0.6).is_infinite());
        let hs1 = DivergenceSpec::hockey_stick(1.0).unwrap();
        assert!(hs1.conjugate(1.0 + 1e-12).is_infinite());
        let p_half = DivergenceSpec::power_renyi(0.5).unwrap();
        assert!(p_half.conjugate(0.0).is_infinite());
        assert!(p_half.conjugate(-1.0).is_finite());
        let p2 = DivergenceSpec::power_renyi(2.0).unwrap();
        // f*(y) = (y/2)^2 + 1 for y > 0 when beta = 2
        assert!((p2.conjugate(3.0) - (2.25 + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn spec_parameter_validation() {
        assert!(DivergenceSpec::hockey_stick(0.0).is_err());
        assert!(DivergenceSpec::power_renyi(1.0).is_err());
        assert!(DivergenceSpec::power_renyi(-0.2).is_err());
        assert!(DivergenceSpec::power_renyi(0.0).is_ok());
    }

    proptest! {
        // Fenchel-Young: x*y <= f(x) + f*(y) for all x >= 0 and y in the domain.
        #[test]
        fn fenchel_young_inequality(x in 0.0_f64..20.0, y in -5.0_f64..5.0, idx in 0usize..8) {
            let spec = all_specs()[idx];
            let fs = spec.conjugate(y);
            if fs.is_finite() {
                let f = spec.f_value(x).unwrap();
                prop_assert!(x * y <= f + fs + 1e-9);
            }
        }

        // At the conjugate's supremizer the inequality is tight.
        #[test]
        fn fenchel_young_tight_at_argmax(y in -5.0_f64..5.0, idx in 0usize..8) {
            let spec = all_specs()[idx];
            let fs = spec.conjugate(y);
            let xs = spec.conjugate_argmax(y);
            if fs.is_finite() && xs.is_finite() {
                let f = spec.f_value(xs).unwrap();
                prop_assert!((xs * y - f - fs).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn hs_budget_examples() {
        assert_eq!(hs_budget(0.0, 0.7, 1.0).unwrap(), 0.0);
        assert_eq!(hs_budget(0.0, 0.7, 0.3).unwrap(), 0.0);
        // frozen from 30-digit quadrature of the shifted-Gaussian pair
        assert!((hs_budget(1.0, 1.0, 1.0).unwrap() - 0.3829249225480262).abs() < 1e-12);
        assert!((hs_budget(1.0, 1.0, 2.0).unwrap() - 0.1906101152367584).abs() < 1e-12);
        assert!((hs_budget(1.0, 1.0, 0.5).unwrap() - 0.0953050576183792).abs() < 1e-12);
        assert!(hs_budget(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn tv_budget_examples() {
        assert_eq!(tv_budget(0.0, 1.0).unwrap(), 0.0);
        assert!((tv_budget(1.0, 1.0).unwrap() - 0.3829249225480262).abs() < 1e-12);
        assert!((tv_budget(1.0, 10.0).unwrap() - 0.03987761167674492).abs() < 1e-12);
        assert!(tv_budget(1.0, -1.0).is_err());
    }

    #[test]
    fn hs_lambda_one_equals_tv() {
        for i in 0..40 {
            let eps = i as f64 * 0.1;
            for &sigma in &[0.1, 0.5, 1.0, 2.0] {
                let hs = hs_budget(eps, sigma, 1.0).unwrap();
                let tv = tv_budget(eps, sigma).unwrap();
                assert!((hs - tv).abs() < 1e-9, "eps={eps} sigma={sigma}");
            }
        }
    }

    #[test]
    fn budgets_monotone_in_eps_and_sigma() {
        for &lambda in &[0.5, 1.0, 2.0] {
            let mut prev = -1.0;
            for i in 0..30 {
                let b = hs_budget(i as f64 * 0.1, 0.4, lambda).unwrap();
                assert!(b >= prev - 1e-12);
                prev = b;
            }
        }
        let mut prev = f64::INFINITY;
        for i in 1..30 {
            let b = tv_budget(1.0, i as f64 * 0.1).unwrap();
            assert!(b <= prev + 1e-12);
            prev = b;
        }
    }

    #[test]
    fn l0_budget_examples() {
        // direct finite sum: (0.04/0.8 + 0.64/0.2 - 1)/1 = 2.25
        let b = l0_budget(1, 0.2, 2, 2.0).unwrap();
        assert!((b - 2.25).abs() < 1e-12);
        assert_eq!(l0_budget(0, 0.2, 2, 2.0).unwrap(), 0.0);
        // uniform smoothing: attacked and clean coincide
        for steps in [1, 3, 7] {
            let b = l0_budget(steps, 0.5, 2, 2.0).unwrap();
            assert!(b.abs() < 1e-12);
            let b = l0_budget(steps, 2.0 / 3.0, 3, 4.0).unwrap();
            assert!(b.abs() < 1e-10);
        }
        assert!(l0_budget(1, 0.0, 2, 2.0).is_err());
        assert!(l0_budget(1, 1.0, 2, 2.0).is_err());
    }

    #[test]
    fn l0_budget_multiplies_across_steps() {
        // per-step moment for p=0.2, N=2, beta=2 is 3.25
        let b3 = l0_budget(3, 0.2, 2, 2.0).unwrap();
        assert!((b3 - (3.25_f64.powi(3) - 1.0)).abs() < 1e-10);
        // nondecreasing in attacked steps
        let mut prev = -1.0;
        for k in 0..8 {
            let b = l0_budget(k, 0.3, 4, 0.5).unwrap();
            assert!(b >= prev - 1e-12);
            prev = b;
        }
    }
}
