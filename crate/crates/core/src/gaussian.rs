//! Gaussian pdf/cdf helpers shared by the chain builder, cost functions and
//! the closed-form oracles.

use statrs::function::erf;

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density.
pub fn std_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Density of N(mu, sigma^2) at `x`.
pub fn pdf(x: f64, mu: f64, sigma: f64) -> f64 {
    std_pdf((x - mu) / sigma) / sigma
}

/// Standard normal distribution function, accurate in both tails.
pub fn std_cdf(z: f64) -> f64 {
    0.5 * erf::erfc(-z / SQRT_2)
}

/// Distribution function of N(mu, sigma^2) at `x`.
pub fn cdf(x: f64, mu: f64, sigma: f64) -> f64 {
    std_cdf((x - mu) / sigma)
}

/// Partial first moment `∫_{-∞}^{alpha} r f(r) dr` for N(mu, sigma^2).
///
/// Equals `F(alpha) * E[r | r <= alpha]` but stays well defined as the
/// truncation mass goes to zero.
pub fn partial_expectation(alpha: f64, mu: f64, sigma: f64) -> f64 {
    let z = (alpha - mu) / sigma;
    mu * std_cdf(z) - sigma * std_pdf(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cdf_at_mean_is_half() {
        assert_eq!(cdf(20.0, 20.0, 10.0), 0.5);
    }

    #[test]
    fn cdf_symmetry() {
        for z in [-3.0, -1.0, -0.2, 0.7, 2.5] {
            assert_relative_eq!(std_cdf(z) + std_cdf(-z), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn tail_cdf_keeps_relative_precision() {
        // erfc-based tail: Phi(-8) = 6.22096e-16 to a few ulps.
        assert_relative_eq!(std_cdf(-8.0), 6.220960574271786e-16, max_relative = 1e-12);
        assert!(std_cdf(-37.5) > 0.0);
    }

    #[test]
    fn partial_expectation_limits() {
        // No truncation: full mean. Far-left truncation: zero mass.
        assert_relative_eq!(partial_expectation(1e6, 20.0, 10.0), 20.0, epsilon = 1e-12);
        assert_relative_eq!(partial_expectation(-1e3, 20.0, 10.0), 0.0, epsilon = 1e-300);
    }
}
