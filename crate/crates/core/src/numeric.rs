//! Small numeric building blocks shared across the crate: compensated
//! summation, standard-normal CDF, 1-D concave maximization and adaptive
//! quadrature.

use crate::error::{Error, Result};

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile, by bisection on the CDF.
///
/// Accurate to ~1e-14; only used to construct test fixtures and the
/// synthetic known-mean environment, never in a hot loop.
pub fn std_normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile needs p in (0,1)");
    let (mut lo, mut hi) = (-40.0_f64, 40.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if std_normal_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Neumaier-compensated sum. Exact enough that summation order and
/// partitioning do not leak into results at the 1e-12 level.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Compensated mean of a non-empty slice.
pub fn compensated_mean(values: &[f64]) -> f64 {
    assert!(!values.is_empty());
    compensated_sum(values.iter().copied()) / values.len() as f64
}

const INV_GOLDEN: f64 = 0.618_033_988_749_894_9; // 1/phi

/// Maximize a unimodal function on `[lo, hi]` by golden-section search.
///
/// Returns `(argmax, max)`. For strictly concave objectives this is exact
/// up to `xtol`; on plateaus it lands somewhere inside the flat region
/// (callers that need a deterministic edge run [`plateau_left_edge`]
/// afterwards).
pub fn golden_max(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, xtol: f64) -> (f64, f64) {
    assert!(lo <= hi);
    let mut a = lo;
    let mut b = hi;
    let mut x1 = b - INV_GOLDEN * (b - a);
    let mut x2 = a + INV_GOLDEN * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > xtol {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_GOLDEN * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_GOLDEN * (b - a);
            f1 = f(x1);
        }
    }
    let xm = 0.5 * (a + b);
    let fm = f(xm);
    if f1 >= f2 && f1 >= fm {
        (x1, f1)
    } else if f2 >= f1 && f2 >= fm {
        (x2, f2)
    } else {
        (xm, fm)
    }
}

/// Smallest `x` in `[lo, x_star]` with `f(x) >= f_star - slack`, for a
/// function known to be concave (so the near-maximizer set is an interval).
pub fn plateau_left_edge(
    mut f: impl FnMut(f64) -> f64,
    lo: f64,
    x_star: f64,
    f_star: f64,
    slack: f64,
) -> f64 {
    if f(lo) >= f_star - slack {
        return lo;
    }
    let mut a = lo; // below the plateau
    let mut b = x_star; // on the plateau
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if f(mid) >= f_star - slack {
            b = mid;
        } else {
            a = mid;
        }
        if b - a <= 1e-13 * (1.0 + b.abs()) {
            break;
        }
    }
    b
}

/// Root of a nondecreasing function by bisection: returns `x` with
/// `g(x) ~= target`, assuming `g(lo) <= target <= g(hi)`.
pub fn bisect_nondecreasing(
    mut g: impl FnMut(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    target: f64,
    iters: usize,
) -> f64 {
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        if g(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute accuracy
/// `tol`. `splits` are interior points where the integrand may have kinks;
/// the interval is partitioned there so each piece is smooth.
pub fn adaptive_simpson(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    splits: &[f64],
    tol: f64,
) -> Result<f64> {
    // seed with a uniform partition so narrowly concentrated mass cannot
    // slip between the probe points of a coarse first pass
    const SEED_SEGMENTS: usize = 48;
    let mut knots: Vec<f64> = (0..=SEED_SEGMENTS)
        .map(|i| a + (b - a) * i as f64 / SEED_SEGMENTS as f64)
        .collect();
    for &s in splits {
        if s > a && s < b {
            knots.push(s);
        }
    }
    knots.sort_by(|x, y| x.partial_cmp(y).unwrap());
    knots.dedup();

    let mut total = 0.0;
    for w in knots.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let piece_tol = tol * (hi - lo) / (b - a);
        total += simpson_segment(f, lo, hi, piece_tol.max(1e-16))?;
    }
    Ok(total)
}

fn simpson_rule(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64, f64, f64) {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    ((b - a) / 6.0 * (fa + 4.0 * fm + fb), fa, fm, fb)
}

fn simpson_segment(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> Result<f64> {
        let m = 0.5 * (a + b);
        let (left, ..) = simpson_rule(f, a, m);
        let (right, ..) = simpson_rule(f, m, b);
        let err = left + right - whole;
        if err.abs() <= 15.0 * tol {
            return Ok(left + right + err / 15.0);
        }
        if depth == 0 {
            return Err(Error::NoConvergence(format!(
                "adaptive quadrature depth exhausted on [{a}, {b}]"
            )));
        }
        Ok(recurse(f, a, m, left, tol / 2.0, depth - 1)?
            + recurse(f, m, b, right, tol / 2.0, depth - 1)?)
    }
    let (whole, ..) = simpson_rule(f, a, b);
    recurse(f, a, b, whole, tol, 48)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_cdf_reference_points() {
        assert!((std_normal_cdf(0.0) - 0.5).abs() < 1e-15);
        // 2*Phi(0.5) - 1 is a frozen reference used throughout the crate.
        assert!((2.0 * std_normal_cdf(0.5) - 1.0 - 0.3829249225480262).abs() < 1e-12);
        assert!((std_normal_cdf(-8.0) - 6.22096057427178e-16).abs() < 1e-18);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &p in &[0.001, 0.3, 0.5, 0.75, 0.999] {
            let x = std_normal_quantile(p);
            assert!((std_normal_cdf(x) - p).abs() < 1e-12);
        }
        assert!((std_normal_quantile(0.3) - (-0.5244005127080408)).abs() < 1e-10);
    }

    #[test]
    fn compensated_sum_beats_naive() {
        let n = 1_000_000;
        let mean = compensated_sum(std::iter::repeat(0.1).take(n)) / n as f64;
        assert!((mean - 0.1).abs() < 1e-15);
    }

    #[test]
    fn golden_finds_concave_max() {
        let (x, v) = golden_max(|x| -(x - 0.3) * (x - 0.3) + 2.0, -5.0, 5.0, 1e-12);
        // location is sqrt(machine-eps) limited for a smooth max; the value
        // is second-order accurate
        assert!((x - 0.3).abs() < 1e-7);
        assert!((v - 2.0).abs() < 1e-14);
    }

    #[test]
    fn plateau_edge_is_found() {
        // flat at 1.0 on [2, 10], rising before
        let f = |x: f64| if x < 2.0 { x - 1.0 } else { 1.0 };
        let edge = plateau_left_edge(f, 0.0, 9.0, 1.0, 1e-12);
        assert!((edge - 2.0).abs() < 1e-9);
    }

    #[test]
    fn simpson_integrates_gaussian() {
        let f = |x: f64| (-x * x / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let v = adaptive_simpson(&f, -10.0, 10.0, &[], 1e-12).unwrap();
        assert!((v - 1.0).abs() < 1e-10);
    }

    #[test]
    fn simpson_handles_kink_with_split() {
        let f = |x: f64| (x - 0.37).abs();
        let v = adaptive_simpson(&f, 0.0, 1.0, &[0.37], 1e-12).unwrap();
        let exact = 0.37_f64.powi(2) / 2.0 + 0.63_f64.powi(2) / 2.0;
        assert!((v - exact).abs() < 1e-12);
    }
}
