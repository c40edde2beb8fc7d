//! Numeric oracles for the closed forms in the parent module.
//!
//! These deliberately avoid the closed-form expressions they check: the
//! conjugate oracle maximizes `x*y - f(x)` directly (bracket expansion +
//! golden section on a concave objective), and the budget oracle
//! integrates `f(q/p) dp` for the axis-shifted Gaussian pair with
//! adaptive quadrature. Both target absolute accuracy 1e-8 and report
//! failure to converge instead of returning a bad value.

use super::DivergenceSpec;
use crate::error::{Error, Result};
use crate::numeric::{adaptive_simpson, golden_max};

/// Supremum of `x*y - f(x)` over `x >= 0` by bracket expansion and golden
/// section. Returns `f64::INFINITY` when the supremum diverges.
pub fn numeric_conjugate_oracle(spec: &DivergenceSpec, y: f64) -> Result<f64> {
    let g = |x: f64| x * y - spec.f_value(x).unwrap();

    // Expand until the objective stops increasing at the right edge.
    let mut hi = 1.0_f64;
    let mut expansions = 0;
    while g(hi) > g(hi * 0.999) + 1e-300 {
        hi *= 2.0;
        expansions += 1;
        if expansions > 60 {
            return Ok(f64::INFINITY); // still climbing at x ~ 1e18
        }
    }
    let (_, sup) = golden_max(g, 0.0, hi, 1e-12 * (1.0 + hi));
    // golden section brackets the interior; the boundary x = 0 competes.
    Ok(sup.max(g(0.0)))
}

/// f-divergence between N(0, sigma^2) and N(epsilon, sigma^2) by adaptive
/// quadrature of `f(q/p) dp`.
///
/// Densities are evaluated directly (never through the ratio `q/p`, which
/// overflows once `epsilon/sigma` is large); the power case works in
/// log space for the same reason.
pub fn numeric_budget_oracle(spec: &DivergenceSpec, epsilon: f64, sigma: f64) -> Result<f64> {
    if sigma <= 0.0 {
        return Err(Error::invalid(format!("sigma must be > 0, got {sigma}")));
    }
    if epsilon < 0.0 {
        return Err(Error::invalid(format!("epsilon must be >= 0, got {epsilon}")));
    }
    if epsilon == 0.0 {
        return Ok(0.0);
    }

    let log_norm = (sigma * (2.0 * std::f64::consts::PI).sqrt()).ln();
    let log_p = move |x: f64| -x * x / (2.0 * sigma * sigma) - log_norm;
    let log_q = move |x: f64| -(x - epsilon) * (x - epsilon) / (2.0 * sigma * sigma) - log_norm;

    let lo = -14.0 * sigma;
    let hi = epsilon + 14.0 * sigma;

    let (integrand, splits): (Box<dyn Fn(f64) -> f64>, Vec<f64>) = match *spec {
        DivergenceSpec::HockeyStick { lambda } => {
            // f(z) p = max(q - lambda p, 0) - max(1 - lambda, 0) p
            let shift = (1.0 - lambda).max(0.0);
            let kink = sigma * sigma * lambda.ln() / epsilon + epsilon / 2.0;
            (
                Box::new(move |x: f64| {
                    (log_q(x).exp() - lambda * log_p(x).exp()).max(0.0) - shift * log_p(x).exp()
                }),
                vec![kink],
            )
        }
        DivergenceSpec::TotalVariation => {
            let kink = epsilon / 2.0;
            (
                Box::new(move |x: f64| 0.5 * (log_q(x).exp() - log_p(x).exp()).abs()),
                vec![kink],
            )
        }
        DivergenceSpec::PowerRenyi { beta } => {
            if beta == 0.0 {
                return Ok(0.0);
            }
            // f(z) p = (q^beta p^(1-beta) - p) / (beta - 1)
            (
                Box::new(move |x: f64| {
                    let moment = (beta * log_q(x) + (1.0 - beta) * log_p(x)).exp();
                    (moment - log_p(x).exp()) / (beta - 1.0)
                }),
                vec![],
            )
        }
    };

    let value = adaptive_simpson(&integrand, lo, hi, &splits, 1e-9)?;
    if !value.is_finite() {
        return Err(Error::NoConvergence(
            "budget quadrature produced a non-finite value".into(),
        ));
    }
    Ok(value)
}
