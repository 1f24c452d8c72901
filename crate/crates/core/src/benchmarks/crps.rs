use std::f64::consts::{PI, SQRT_2};

use super::emos::EmosFamily;
use crate::normal;

/// Exact CRPS of a normal distribution, or of a normal truncated below at
/// zero, with location `mu` and scale `sigma` at observation `y`.
pub fn crps_closed_form(family: EmosFamily, mu: f64, sigma: f64, y: f64) -> f64 {
    match family {
        EmosFamily::Normal => crps_normal(mu, sigma, y),
        EmosFamily::TruncatedNormal => crps_truncated_normal(mu, sigma, y),
    }
}

fn crps_normal(mu: f64, sigma: f64, y: f64) -> f64 {
    let z = (y - mu) / sigma;
    sigma * (z * (2.0 * normal::cdf(z) - 1.0) + 2.0 * normal::pdf(z) - 1.0 / libm::sqrt(PI))
}

fn crps_truncated_normal(mu: f64, sigma: f64, y: f64) -> f64 {
    // Below zero the predictive CDF vanishes, so the score grows linearly.
    if y < 0.0 {
        return crps_truncated_normal(mu, sigma, 0.0) - y;
    }
    let p = normal::cdf(mu / sigma);
    let z = (y - mu) / sigma;
    let bracket = z * p * (2.0 * normal::cdf(z) + p - 2.0) + 2.0 * normal::pdf(z) * p
        - normal::cdf(SQRT_2 * mu / sigma) / libm::sqrt(PI);
    sigma * bracket / (p * p)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Composite Simpson integration of (F(x) - 1{x >= y})^2 on a wide grid.
    fn quadrature(cdf: impl Fn(f64) -> f64, lo: f64, hi: f64, y: f64) -> f64 {
        // Each side of y is integrated separately so the step never falls
        // inside a panel.
        let simpson = |a: f64, b: f64, step: f64| {
            let integrand = |x: f64| (cdf(x) - step).powi(2);
            let n = 20_000;
            let h = (b - a) / n as f64;
            let mut s = integrand(a) + integrand(b);
            for i in 1..n {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                s += w * integrand(a + i as f64 * h);
            }
            s * h / 3.0
        };
        simpson(lo, y, 0.0) + simpson(y, hi, 1.0)
    }

    #[test]
    fn standard_normal_at_zero() {
        let v = crps_closed_form(EmosFamily::Normal, 0.0, 1.0, 0.0);
        let q = quadrature(normal::cdf, -12.0, 12.0, 0.0);
        assert!((v - q).abs() < 1e-9);
        assert!((v - 0.233_694_977_255_109_1).abs() < 1e-12);
    }

    #[test]
    fn normal_scale_equivariance() {
        for &(mu, sigma, y) in &[(1.0, 2.0, 0.3), (-3.0, 0.5, 4.0), (0.0, 7.0, -2.0)] {
            let a = crps_closed_form(EmosFamily::Normal, mu, sigma, y);
            let b = sigma * crps_closed_form(EmosFamily::Normal, 0.0, 1.0, (y - mu) / sigma);
            assert!((a - b).abs() < 1e-12 * (1.0 + a));
        }
    }

    #[test]
    fn degenerate_limit_is_absolute_error() {
        for family in [EmosFamily::Normal, EmosFamily::TruncatedNormal] {
            let v = crps_closed_form(family, 2.0, 1e-9, 3.5);
            assert!((v - 1.5).abs() < 1e-8, "{family:?}: {v}");
        }
    }

    #[test]
    fn truncated_matches_quadrature() {
        for &(mu, sigma, y) in &[(0.0f64, 1.0f64, 0.5f64), (2.0, 1.0, 1.0), (-1.0, 2.0, 3.0), (1.0, 0.5, -1.0), (-2.0, 1.0, 0.2)] {
            let p = normal::cdf(mu / sigma);
            let cdf = |x: f64| {
                if x < 0.0 {
                    0.0
                } else {
                    (normal::cdf((x - mu) / sigma) - normal::cdf(-mu / sigma)) / p
                }
            };
            let lo = y.min(0.0) - 1.0;
            let hi = y.max(mu) + 14.0 * sigma;
            let q = quadrature(cdf, lo, hi, y);
            let v = crps_closed_form(EmosFamily::TruncatedNormal, mu, sigma, y);
            assert!((v - q).abs() < 1e-7, "({mu},{sigma},{y}): {v} vs {q}");
        }
    }

    #[test]
    fn truncated_far_from_boundary_is_normal() {
        let a = crps_closed_form(EmosFamily::TruncatedNormal, 30.0, 2.0, 27.0);
        let b = crps_closed_form(EmosFamily::Normal, 30.0, 2.0, 27.0);
        assert!((a - b).abs() < 1e-12);
    }
}
