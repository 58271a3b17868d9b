use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Two-sample Kolmogorov–Smirnov outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    /// `sup_x |F_a(x) - F_b(x)|`.
    pub statistic: f64,
    pub sample_sizes: (usize, usize),
    /// Asymptotic critical value at the requested level.
    pub threshold_at_alpha: f64,
}

impl KsResult {
    pub fn passes(&self) -> bool {
        self.statistic <= self.threshold_at_alpha
    }
}

/// `c(α) = sqrt(-ln(α/2) / 2)`.
pub fn ks_critical_coefficient(alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt()
}

/// Exact two-sample KS statistic by merging the sorted samples. Ties across the
/// samples are stepped over together, so the supremum is taken only at points
/// where both empirical CDFs are fully updated.
pub fn ks_two_sample(a: &[f64], b: &[f64], alpha: f64) -> Result<KsResult> {
    ks_two_sample_with_ties(a, b, alpha, 0.0)
}

/// As [`ks_two_sample`], but values within `tie_tolerance` above the smallest
/// unprocessed value count as one atom. Use when both samples share atoms that
/// are computed along different floating-point paths.
pub fn ks_two_sample_with_ties(
    a: &[f64],
    b: &[f64],
    alpha: f64,
    tie_tolerance: f64,
) -> Result<KsResult> {
    if !(tie_tolerance >= 0.0 && tie_tolerance.is_finite()) {
        return Err(invalid(format!(
            "tie tolerance {tie_tolerance} must be finite and >= 0"
        )));
    }
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty);
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(invalid("KS samples must not contain NaN"));
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (na, nb) = (xs.len(), ys.len());
    let (fa, fb) = (na as f64, nb as f64);

    let (mut i, mut j) = (0, 0);
    let mut statistic: f64 = 0.0;
    while i < na && j < nb {
        let x = xs[i].min(ys[j]) + tie_tolerance;
        while i < na && xs[i] <= x {
            i += 1;
        }
        while j < nb && ys[j] <= x {
            j += 1;
        }
        statistic = statistic.max((i as f64 / fa - j as f64 / fb).abs());
    }
    // Once one sample is exhausted its CDF is 1; the gap to the other only
    // shrinks from here, so the running maximum is already final.
    let threshold_at_alpha = ks_critical_coefficient(alpha) * ((fa + fb) / (fa * fb)).sqrt();
    Ok(KsResult {
        statistic,
        sample_sizes: (na, nb),
        threshold_at_alpha,
    })
}
