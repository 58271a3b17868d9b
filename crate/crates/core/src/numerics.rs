//! Compensated (Neumaier) summation and summary statistics over ordered samples.

/// Running sum with a Neumaier compensation term.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    /// Merges another accumulator into this one.
    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.compensation += other.compensation;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }

    /// `value() / count`, with one correction step so that the result is
    /// within an ulp of the exact quotient of the compensated total.
    pub fn mean_of(&self, count: f64) -> f64 {
        let m0 = self.sum / count;
        let residual = (-m0).mul_add(count, self.sum) + self.compensation;
        m0 + residual / count
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

pub fn compensated_sum(xs: &[f64]) -> f64 {
    xs.iter().copied().collect::<CompensatedSum>().value()
}

/// Sample mean and standard error (sample sd / sqrt(len)) by two compensated passes.
/// A single observation has standard error 0.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    assert!(n > 0, "mean of an empty sample");
    let mean = xs
        .iter()
        .copied()
        .collect::<CompensatedSum>()
        .mean_of(n as f64);
    if n == 1 {
        return (mean, 0.0);
    }
    let ss = xs
        .iter()
        .map(|x| (x - mean) * (x - mean))
        .collect::<CompensatedSum>()
        .value();
    let sd = (ss / (n as f64 - 1.0)).sqrt();
    (mean, sd / (n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_cancelled_terms() {
        let xs = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(&xs), 2.0);
        assert_ne!(xs.iter().sum::<f64>(), 2.0);
    }

    #[test]
    fn corrected_mean_of_repeated_value_is_exact() {
        for &c in &[0.1, 0.7, -1.3, 1e-3, 123.456] {
            for m in 1..40 {
                let acc: CompensatedSum = std::iter::repeat_n(c, m).collect();
                assert_eq!(acc.mean_of(m as f64), c, "c={c} m={m}");
            }
        }
    }

    #[test]
    fn merge_matches_sequential() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut a: CompensatedSum = xs[..40].iter().copied().collect();
        let b: CompensatedSum = xs[40..].iter().copied().collect();
        a.merge(&b);
        assert!((a.value() - compensated_sum(&xs)).abs() < 1e-15);
    }

    #[test]
    fn standard_error_of_known_sample() {
        let (m, se) = mean_and_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        // sd = sqrt(5/3)
        assert!((se - (5.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-15);
        assert_eq!(mean_and_se(&[3.0]), (3.0, 0.0));
    }
}
