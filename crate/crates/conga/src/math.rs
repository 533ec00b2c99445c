//! Small numeric helpers shared across modules.

use statrs::function::erf::erfc;
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

/// Numerically stable log(sum(exp(v))).
pub fn logsumexp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = v.iter().map(|x| (x - m).exp()).sum();
    m + s.ln()
}

/// log(x!) for a nonnegative integer x.
#[inline]
pub fn ln_factorial(x: u64) -> f64 {
    if x < 2 {
        // ln_gamma(1) and ln_gamma(2) carry ~1e-16 noise; these are exact.
        return 0.0;
    }
    ln_gamma(x as f64 + 1.0)
}

/// Poisson(lambda) CDF at k.
pub fn poisson_cdf(k: u64, lambda: f64) -> f64 {
    // P(X <= k) = Q(k+1, lambda), the regularized upper incomplete gamma.
    gamma_ur(k as f64 + 1.0, lambda)
}

/// Poisson(lambda) upper tail P(X > k), computed directly so that tiny
/// tails keep full precision instead of cancelling against 1.
pub fn poisson_tail(k: u64, lambda: f64) -> f64 {
    gamma_lr(k as f64 + 1.0, lambda)
}

/// Log of the Poisson pmf.
#[inline]
pub fn poisson_log_pmf(x: u64, lambda: f64) -> f64 {
    x as f64 * lambda.ln() - lambda - ln_factorial(x)
}

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Smallest k with Poisson(lambda) CDF(k) >= p.
pub fn poisson_quantile(p: f64, lambda: f64) -> u64 {
    assert!((0.0..1.0).contains(&p), "quantile needs p in [0,1)");
    let mut k = 0u64;
    let mut pmf = (-lambda).exp();
    let mut cdf = pmf;
    while cdf < p {
        k += 1;
        pmf *= lambda / k as f64;
        cdf += pmf;
        if k > 100_000 {
            // Far tail: pmf underflow would loop forever.
            break;
        }
    }
    k
}

/// Type-7 sample quantile (linear interpolation) of a sorted slice.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Log-density of Gamma(shape, rate) at x > 0, dropping nothing.
pub fn gamma_log_pdf(x: f64, shape: f64, rate: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn logsumexp_matches_naive() {
        let v = [0.5, 2.0, -1.0];
        let naive = (0.5f64.exp() + 2.0f64.exp() + (-1.0f64).exp()).ln();
        assert_relative_eq!(logsumexp(&v), naive, epsilon = 1e-12);
    }

    #[test]
    fn logsumexp_large_inputs() {
        let v = [1234.0, 1232.0];
        assert_relative_eq!(
            logsumexp(&v),
            1232.0 + (2f64.exp() + 1.0).ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn poisson_cdf_sums_pmf() {
        let lambda = 3.7;
        let direct: f64 = (0..=5).map(|x| poisson_log_pmf(x, lambda).exp()).sum();
        assert_relative_eq!(poisson_cdf(5, lambda), direct, epsilon = 1e-12);
    }

    #[test]
    fn poisson_tail_complements_cdf() {
        assert_relative_eq!(
            poisson_tail(5, 3.7),
            1.0 - poisson_cdf(5, 3.7),
            epsilon = 1e-12
        );
        // Far tail keeps precision where 1 - CDF underflows to zero.
        assert_eq!(1.0 - poisson_cdf(70, 5.0), 0.0);
        let tail = poisson_tail(70, 5.0);
        assert!(tail > 0.0 && tail < 1e-50);
    }

    #[test]
    fn quantile_endpoints() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.0), 1.0);
        assert_eq!(quantile_sorted(&v, 1.0), 4.0);
        assert_relative_eq!(quantile_sorted(&v, 0.5), 2.5);
    }

    #[test]
    fn poisson_quantile_median_of_unit_mean() {
        // CDF(0; 1) = 0.3679 < 0.5 <= CDF(1; 1) = 0.7358
        assert_eq!(poisson_quantile(0.5, 1.0), 1);
        assert_eq!(poisson_quantile(0.3, 1.0), 0);
    }

    #[test]
    fn normal_cdf_symmetry() {
        assert_relative_eq!(std_normal_cdf(0.0), 0.5, epsilon = 1e-14);
        assert_relative_eq!(
            std_normal_cdf(1.0) + std_normal_cdf(-1.0),
            1.0,
            epsilon = 1e-14
        );
    }
}
