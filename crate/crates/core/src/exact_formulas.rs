//! Closed-form risk quantities for isotonic least squares under exchangeable noise.

use std::f64::consts::PI;

use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Result};
use crate::sequence::RealSequence;

/// `H_n = 1 + 1/2 + … + 1/n`, summed from the smallest term up.
pub fn harmonic(n: usize) -> Result<f64> {
    generalized_harmonic(n, 1.0)
}

/// `H_{n,m} = Σ_{k=1}^n k^{-m}`, summed from the smallest term up.
pub fn generalized_harmonic(n: usize, m: f64) -> Result<f64> {
    if n == 0 {
        return Err(invalid("harmonic numbers need n >= 1"));
    }
    if !(m > 0.0 && m.is_finite()) {
        return Err(invalid(format!("exponent m = {m} must be positive")));
    }
    let term = |k: usize| {
        if m == 1.0 {
            1.0 / k as f64
        } else {
            (k as f64).powf(-m)
        }
    };
    Ok((1..=n).rev().map(term).sum())
}

fn check_correlation(n: usize, rho: f64) -> Result<()> {
    let feasible = rho.is_finite() && rho <= 1.0 && (n <= 1 || rho * (n as f64 - 1.0) >= -1.0);
    if feasible {
        Ok(())
    } else {
        Err(invalid(format!(
            "correlation rho = {rho} is not attainable by an exchangeable vector of length {n}"
        )))
    }
}

/// Expected squared norm of the monotone projection of a standardized
/// exchangeable vector with pairwise correlation `rho`: `rho·n + (1-rho)·H_n`.
pub fn statistical_dimension(n: usize, rho: f64) -> Result<f64> {
    check_correlation(n, rho)?;
    let h = harmonic(n)?;
    if rho == 0.0 {
        return Ok(h);
    }
    Ok(rho * n as f64 + (1.0 - rho) * h)
}

/// Same quantity for the non-negative monotone cone under symmetric noise: half
/// of [`statistical_dimension`].
pub fn nonneg_statistical_dimension(n: usize, rho: f64) -> Result<f64> {
    Ok(statistical_dimension(n, rho)? / 2.0)
}

/// `E|Z|^p = sqrt(2^p/π) Γ((p+1)/2)` for a standard normal `Z`, through log-gamma.
pub fn gaussian_abs_moment(p: f64) -> Result<f64> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(invalid(format!("moment order p = {p} must be positive")));
    }
    Ok((0.5 * p * std::f64::consts::LN_2 - 0.5 * PI.ln() + ln_gamma(0.5 * (p + 1.0))).exp())
}

/// `E‖Π(Z)‖_p^p = H_{n,p/2}·E|Z_1|^p` for standard Gaussian `Z` in dimension `n`.
pub fn gaussian_lp_projection_norm(n: usize, p: f64) -> Result<f64> {
    let moment = gaussian_abs_moment(p)?;
    Ok(generalized_harmonic(n, p / 2.0)? * moment)
}

/// Inputs to [`sharp_mse_block_bound`].
#[derive(Debug, Clone, PartialEq)]
pub struct RiskBoundInput {
    pub theta_star: Option<RealSequence>,
    pub block_lengths: Vec<usize>,
    pub sigma: f64,
    pub rho: f64,
    pub n: usize,
}

impl RiskBoundInput {
    pub fn from_blocks(block_lengths: Vec<usize>, sigma: f64, rho: f64) -> Result<Self> {
        let n = block_lengths.iter().sum();
        let input = Self {
            theta_star: None,
            block_lengths,
            sigma,
            rho,
            n,
        };
        input.validate()?;
        Ok(input)
    }

    /// Blocks are the maximal runs of exactly equal entries of `theta_star`.
    pub fn from_theta_star(theta_star: RealSequence, sigma: f64, rho: f64) -> Result<Self> {
        let block_lengths = constant_piece_lengths(&theta_star);
        let n = theta_star.len();
        let input = Self {
            theta_star: Some(theta_star),
            block_lengths,
            sigma,
            rho,
            n,
        };
        input.validate()?;
        Ok(input)
    }

    fn validate(&self) -> Result<()> {
        if self.block_lengths.is_empty() || self.block_lengths.contains(&0) {
            return Err(invalid("block lengths must be non-empty and positive"));
        }
        if self.block_lengths.iter().sum::<usize>() != self.n {
            return Err(invalid(format!(
                "block lengths {:?} do not sum to n = {}",
                self.block_lengths, self.n
            )));
        }
        if let Some(theta) = &self.theta_star {
            if theta.len() != self.n {
                return Err(invalid("theta_star length differs from n"));
            }
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(invalid(format!("sigma = {} must be positive", self.sigma)));
        }
        Ok(())
    }
}

/// Lengths of the maximal runs of exactly equal adjacent entries.
pub fn constant_piece_lengths(theta: &[f64]) -> Vec<usize> {
    let mut lengths = Vec::new();
    let mut run = 0;
    for (i, &v) in theta.iter().enumerate() {
        if i > 0 && v != theta[i - 1] {
            lengths.push(run);
            run = 0;
        }
        run += 1;
    }
    if run > 0 {
        lengths.push(run);
    }
    lengths
}

/// Number of constant pieces `k(θ)`.
pub fn constant_pieces(theta: &[f64]) -> usize {
    constant_piece_lengths(theta).len()
}

/// Upper bound `(σ²/n)·Σ_i δ_{n_i}` on the normalized risk `(1/n)E‖θ̂ − θ*‖²`,
/// summed over the constant blocks of `θ*`.
pub fn sharp_mse_block_bound(input: &RiskBoundInput) -> Result<f64> {
    input.validate()?;
    let mut total = 0.0;
    for &len in &input.block_lengths {
        total += statistical_dimension(len, input.rho)?;
    }
    Ok(input.sigma * input.sigma * total / input.n as f64)
}

/// `(kσ²/n)·ln(e·n/k)`.
pub fn log_form_risk_bound(k: usize, n: usize, sigma: f64) -> Result<f64> {
    if k == 0 || k > n {
        return Err(invalid(format!("need 1 <= k <= n, got k = {k}, n = {n}")));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(invalid(format!("sigma = {sigma} must be positive")));
    }
    let ratio = k as f64 / n as f64;
    Ok(ratio * sigma * sigma * (1.0 + (n as f64 / k as f64).ln()))
}

/// Minimum over `candidates` of `(1/n)‖θ − θ*‖² + (σ²k(θ)/n)·ln(e·n/k(θ))`.
pub fn oracle_bound(
    theta_star: &RealSequence,
    candidates: &[RealSequence],
    sigma: f64,
) -> Result<f64> {
    if candidates.is_empty() {
        return Err(invalid("oracle bound needs at least one candidate"));
    }
    let n = theta_star.len();
    let mut best = f64::INFINITY;
    for (i, theta) in candidates.iter().enumerate() {
        if theta.len() != n {
            return Err(invalid(format!(
                "candidate {i} has length {}, expected {n}",
                theta.len()
            )));
        }
        if !theta.is_non_decreasing() {
            return Err(invalid(format!("candidate {i} is not non-decreasing")));
        }
        let approx = theta
            .iter()
            .zip(theta_star.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / n as f64;
        let value = approx + log_form_risk_bound(constant_pieces(theta), n, sigma)?;
        best = best.min(value);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(v: &[f64]) -> RealSequence {
        RealSequence::try_from(v).unwrap()
    }

    /// Double factorial (p-1)!! as f64.
    fn double_factorial(m: i64) -> f64 {
        let mut acc = 1.0;
        let mut k = m;
        while k > 1 {
            acc *= k as f64;
            k -= 2;
        }
        acc
    }

    #[test]
    fn harmonic_values() {
        assert_eq!(harmonic(1).unwrap(), 1.0);
        assert!((harmonic(4).unwrap() - 25.0 / 12.0).abs() < 1e-15);
        assert!((harmonic(100).unwrap() - 5.187_377_517_639_621).abs() < 1e-13);
        assert!(harmonic(0).is_err());
    }

    #[test]
    fn generalized_harmonic_values() {
        for n in [1, 7, 50] {
            assert_eq!(generalized_harmonic(n, 1.0).unwrap(), harmonic(n).unwrap());
        }
        assert!((generalized_harmonic(3, 2.0).unwrap() - 49.0 / 36.0).abs() < 1e-15);
        assert_eq!(generalized_harmonic(1, 3.7).unwrap(), 1.0);
        assert!(generalized_harmonic(0, 2.0).is_err());
        assert!(generalized_harmonic(3, 0.0).is_err());
    }

    #[test]
    fn statistical_dimension_values() {
        for n in [1, 2, 10, 100] {
            assert_eq!(statistical_dimension(n, 0.0).unwrap(), harmonic(n).unwrap());
            assert_eq!(statistical_dimension(n, 1.0).unwrap(), n as f64);
        }
        assert!((statistical_dimension(2, 0.5).unwrap() - 1.75).abs() < 1e-15);
        assert!(statistical_dimension(3, -0.6).is_err());
        assert!(statistical_dimension(3, 1.2).is_err());
        assert!(statistical_dimension(3, -0.5).is_ok());
        assert!(statistical_dimension(1, -5.0).is_ok());
        assert_eq!(nonneg_statistical_dimension(5, 1.0).unwrap(), 2.5);
        assert!((nonneg_statistical_dimension(2, 0.5).unwrap() - 0.875).abs() < 1e-15);
        assert_eq!(
            nonneg_statistical_dimension(9, 0.0).unwrap(),
            harmonic(9).unwrap() / 2.0
        );
    }

    #[test]
    fn statistical_dimension_grows_with_n() {
        for &rho in &[0.0, 0.3, 1.0] {
            let mut prev = 0.0;
            for n in 1..200 {
                let v = statistical_dimension(n, rho).unwrap();
                assert!(v > prev);
                prev = v;
            }
        }
    }

    #[test]
    fn harmonic_below_log_bound() {
        for n in 1..5000usize {
            assert!(harmonic(n).unwrap() <= 1.0 + (n as f64).ln() + 1e-15);
        }
    }

    #[test]
    fn gaussian_moments_match_double_factorials() {
        assert!((gaussian_abs_moment(2.0).unwrap() - 1.0).abs() < 1e-14);
        assert!((gaussian_abs_moment(4.0).unwrap() - 3.0).abs() < 1e-13);
        assert!((gaussian_abs_moment(1.0).unwrap() - (2.0 / PI).sqrt()).abs() < 1e-15);
        for p in 1..=50i64 {
            let exact = if p % 2 == 0 {
                double_factorial(p - 1)
            } else {
                (2.0 / PI).sqrt() * double_factorial(p - 1)
            };
            let got = gaussian_abs_moment(p as f64).unwrap();
            assert!(
                ((got - exact) / exact).abs() <= 1e-12,
                "p={p}: {got} vs {exact}"
            );
        }
        assert!(gaussian_abs_moment(0.0).is_err());
        assert!(gaussian_abs_moment(-1.0).is_err());
    }

    #[test]
    fn gaussian_lp_norm_values() {
        for n in [1, 5, 100] {
            assert!(
                (gaussian_lp_projection_norm(n, 2.0).unwrap() - harmonic(n).unwrap()).abs() < 1e-12
            );
        }
        for &p in &[0.5, 1.0, 3.0] {
            assert_eq!(
                gaussian_lp_projection_norm(1, p).unwrap(),
                gaussian_abs_moment(p).unwrap()
            );
        }
        assert!((gaussian_lp_projection_norm(3, 4.0).unwrap() - 49.0 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn block_bound_values() {
        let n = 30;
        let one = RiskBoundInput::from_blocks(vec![n], 2.0, 0.0).unwrap();
        assert!(
            (sharp_mse_block_bound(&one).unwrap() - 4.0 * harmonic(n).unwrap() / n as f64).abs()
                < 1e-14
        );
        let singles = RiskBoundInput::from_blocks(vec![1; 7], 1.5, 0.0).unwrap();
        assert!((sharp_mse_block_bound(&singles).unwrap() - 2.25).abs() < 1e-14);
        let two = RiskBoundInput::from_blocks(vec![2, 3], 1.0, 0.0).unwrap();
        assert!((sharp_mse_block_bound(&two).unwrap() - (1.5 + 11.0 / 6.0) / 5.0).abs() < 1e-15);
        let from_theta =
            RiskBoundInput::from_theta_star(seq(&[0.0, 0.0, 1.0, 1.0, 1.0]), 1.0, 0.0).unwrap();
        assert_eq!(from_theta.block_lengths, vec![2, 3]);
        assert_eq!(
            sharp_mse_block_bound(&from_theta).unwrap(),
            sharp_mse_block_bound(&two).unwrap()
        );

        assert!(RiskBoundInput::from_blocks(vec![], 1.0, 0.0).is_err());
        assert!(RiskBoundInput::from_blocks(vec![2, 0], 1.0, 0.0).is_err());
        let mut bad = two.clone();
        bad.n = 6;
        assert!(sharp_mse_block_bound(&bad).is_err());
    }

    #[test]
    fn log_bound_values() {
        for n in [1, 4, 10] {
            assert!((log_form_risk_bound(n, n, 1.3).unwrap() - 1.69).abs() < 1e-14);
        }
        let expected = 0.2 * (5.0f64 * std::f64::consts::E).ln();
        assert!((log_form_risk_bound(2, 10, 1.0).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.5219).abs() < 1e-4);
        assert!(log_form_risk_bound(11, 10, 1.0).is_err());
        assert!(log_form_risk_bound(0, 10, 1.0).is_err());
    }

    #[test]
    fn oracle_bound_values() {
        let theta = seq(&[0.0, 1.0]);
        let candidates = vec![seq(&[0.0, 1.0]), seq(&[0.5, 0.5])];
        assert!((oracle_bound(&theta, &candidates, 1.0).unwrap() - 1.0).abs() < 1e-15);
        let alt = 0.25 + 0.5 * (2.0 * std::f64::consts::E).ln();
        assert!((alt - 1.0966).abs() < 1e-4);

        let theta = seq(&[-1.0, -1.0, 0.5, 2.0, 2.0, 2.0]);
        let own = oracle_bound(&theta, std::slice::from_ref(&theta), 0.7).unwrap();
        assert!((own - log_form_risk_bound(3, 6, 0.7).unwrap()).abs() < 1e-15);

        let mean = theta.iter().sum::<f64>() / 6.0;
        let var = theta.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 6.0;
        let flat = RealSequence::new(vec![mean; 6]).unwrap();
        let b = oracle_bound(&theta, &[theta.clone(), flat], 0.7).unwrap();
        assert!(b <= var + 0.49 * (6.0f64 * std::f64::consts::E).ln() / 6.0 + 1e-15);

        assert!(oracle_bound(&theta, &[seq(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0])], 1.0).is_err());
        assert!(oracle_bound(&theta, &[seq(&[1.0])], 1.0).is_err());
        assert!(oracle_bound(&theta, &[], 1.0).is_err());
    }

    #[test]
    fn constant_pieces_use_exact_equality() {
        assert_eq!(constant_pieces(&[1.0, 1.0, 1.0 + 1e-15, 2.0]), 3);
        assert_eq!(constant_piece_lengths(&[0.0]), vec![1]);
    }
}
