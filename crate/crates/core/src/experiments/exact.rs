//! Exhaustive checks over all `n!` orderings of a fixed vector. A uniformly
//! random ordering is exchangeable, so distributional identities become
//! multiset identities over the enumeration.

use std::time::Instant;

use serde_json::json;

use super::{CheckKind, ExperimentReport, Measure, Verdict};
use crate::cone_projection::project_monotone;
use crate::error::{invalid, Error, Result};
use crate::sequence::RealSequence;
use crate::walk_geometry::{cumulative_sums, last_argmin, nonpositive_time, running_averages};

/// Largest vector enumerated (8! = 40320 orderings).
pub const EXACT_MAX_LEN: usize = 8;
/// Absolute tolerance when matching sorted multisets of slopes and averages.
pub const EXACT_VALUE_TOLERANCE: f64 = 1e-9;
/// Smallest admissible `|sum|` over non-empty sub-multisets of a generic vector.
const GENERIC_MARGIN: f64 = 1e-9;

/// Base vectors for the exact suite: three per `n = 1..=6`. Every non-empty
/// sub-multiset has a sum at least 0.004 away from zero, so no ordering produces
/// a zero partial sum or a tied walk minimum.
pub fn default_base_vectors() -> Vec<Vec<f64>> {
    vec![
        vec![0.37],
        vec![-1.21],
        vec![2.03],
        vec![0.61, -1.37],
        vec![-0.29, 0.83],
        vec![1.12, 0.45],
        vec![0.71, -1.13, 0.29],
        vec![-0.52, 1.87, -0.94],
        vec![0.33, 0.58, -2.11],
        vec![1.03, -0.67, 0.41, -1.29],
        vec![-0.88, 0.19, 1.46, -0.23],
        vec![0.27, -0.61, -0.95, 1.72],
        vec![0.11, -0.73, 1.42, -0.31, 0.57],
        vec![-1.07, 0.64, 0.39, -0.28, 1.91],
        vec![0.83, -1.49, 0.17, 1.06, -0.62],
        vec![0.921, -0.473, 1.313, -1.187, 0.262, -0.719],
        vec![-0.35, 1.64, -0.893, 0.53, -1.27, 0.187],
        vec![1.21, 0.34, -0.77, -1.533, 0.69, 0.417],
    ]
}

/// True when no non-empty sub-multiset of `values` sums to (nearly) zero.
pub fn is_generic(values: &[f64]) -> bool {
    let n = values.len();
    if n > 24 {
        return false;
    }
    (1u32..(1u32 << n)).all(|mask| {
        let s: f64 = (0..n)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| values[i])
            .sum();
        s.abs() > GENERIC_MARGIN
    })
}

/// All orderings of `values` (Heap's algorithm), including repeats when
/// `values` has ties.
pub fn permutations(values: &[f64]) -> Vec<Vec<f64>> {
    let n = values.len();
    let mut current = values.to_vec();
    let mut out = vec![current.clone()];
    let mut counters = vec![0usize; n];
    let mut i = 1;
    while i < n {
        if counters[i] < i {
            if i % 2 == 0 {
                current.swap(0, i);
            } else {
                current.swap(counters[i], i);
            }
            out.push(current.clone());
            counters[i] += 1;
            i = 1;
        } else {
            counters[i] = 0;
            i += 1;
        }
    }
    out
}

fn check_base(base: &RealSequence) -> Result<()> {
    if base.len() > EXACT_MAX_LEN {
        return Err(Error::TooLarge {
            operation: "exact enumeration",
            n: base.len(),
            max: EXACT_MAX_LEN,
        });
    }
    Ok(())
}

fn format_vector(v: &[f64]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Compares the multiset of `k`-th slopes of the isotonic fit with the multiset
/// of `k`-th smallest running averages, over every ordering of `base`.
pub fn verify_theorem1_exact(base: &RealSequence, k: usize) -> Result<ExperimentReport> {
    check_base(base)?;
    let n = base.len();
    if k == 0 || k > n {
        return Err(invalid(format!("k = {k} must lie in 1..={n}")));
    }
    let start = Instant::now();
    let orderings = permutations(base);
    let mut slopes = Vec::with_capacity(orderings.len());
    let mut order_stats = Vec::with_capacity(orderings.len());
    for ordering in orderings {
        let z = RealSequence::from_vec_unchecked(ordering);
        slopes.push(project_monotone(&z).fitted[k - 1]);
        let mut averages = running_averages(&z).into_vec();
        averages.sort_by(f64::total_cmp);
        order_stats.push(averages[k - 1]);
    }
    slopes.sort_by(f64::total_cmp);
    order_stats.sort_by(f64::total_cmp);
    let discrepancy = slopes
        .iter()
        .zip(&order_stats)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let exact_match = discrepancy <= EXACT_VALUE_TOLERANCE;
    Ok(ExperimentReport {
        experiment_id: format!("theorem1_exact/n={n}/k={k}/base={}", format_vector(base)),
        spec: json!({
            "noise": format!("family=permutation_of values={} n={n}", format_vector(base)),
            "k": k,
        }),
        estimate: Measure::Scalar(mean(&slopes)),
        std_error: Measure::Scalar(0.0),
        theory: Measure::Scalar(mean(&order_stats)),
        z_score: 0.0,
        ks_statistic: None,
        ks_threshold: None,
        replicates: slopes.len() as u64,
        verdict: Verdict::from_bool(exact_match),
        wall_time: Some(start.elapsed().as_secs_f64()),
        check: CheckKind::Exact,
        exact_match: Some(exact_match),
        details: Some(json!({ "max_abs_discrepancy": discrepancy })),
    })
}

/// Compares the histogram of the walk's last argmin with the histogram of its
/// number of non-positive partial sums, over every ordering of `base`.
pub fn verify_sparre_andersen_exact(base: &RealSequence) -> Result<ExperimentReport> {
    check_base(base)?;
    if !is_generic(base) {
        return Err(invalid(
            "base vector is not generic: some sub-multiset sums to zero",
        ));
    }
    let n = base.len();
    let start = Instant::now();
    let mut argmin_counts = vec![0u64; n + 1];
    let mut nonpositive_counts = vec![0u64; n + 1];
    let orderings = permutations(base);
    let total = orderings.len() as u64;
    for ordering in orderings {
        let path = cumulative_sums(&RealSequence::from_vec_unchecked(ordering));
        argmin_counts[last_argmin(&path)] += 1;
        nonpositive_counts[nonpositive_time(&path)] += 1;
    }
    let exact_match = argmin_counts == nonpositive_counts;
    let as_f64 = |v: &[u64]| v.iter().map(|&c| c as f64).collect::<Vec<_>>();
    Ok(ExperimentReport {
        experiment_id: format!("sparre_andersen_exact/n={n}/base={}", format_vector(base)),
        spec: json!({
            "noise": format!("family=permutation_of values={} n={n}", format_vector(base)),
        }),
        estimate: Measure::List(as_f64(&argmin_counts)),
        std_error: Measure::List(vec![0.0; n + 1]),
        theory: Measure::List(as_f64(&nonpositive_counts)),
        z_score: 0.0,
        ks_statistic: None,
        ks_threshold: None,
        replicates: total,
        verdict: Verdict::from_bool(exact_match),
        wall_time: Some(start.elapsed().as_secs_f64()),
        check: CheckKind::Exact,
        exact_match: Some(exact_match),
        details: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn seq(v: &[f64]) -> RealSequence {
        RealSequence::try_from(v).unwrap()
    }

    #[test]
    fn heap_enumerates_every_ordering_once() {
        for n in 1..=6 {
            let base: Vec<f64> = (0..n).map(|i| i as f64).collect();
            let perms = permutations(&base);
            let factorial: usize = (1..=n).product();
            assert_eq!(perms.len(), factorial);
            let distinct: BTreeSet<Vec<u64>> = perms
                .iter()
                .map(|p| p.iter().map(|v| *v as u64).collect())
                .collect();
            assert_eq!(distinct.len(), factorial);
        }
    }

    #[test]
    fn default_bases_are_generic() {
        let bases = default_base_vectors();
        for n in 1..=6 {
            assert_eq!(bases.iter().filter(|b| b.len() == n).count(), 3);
        }
        for b in &bases {
            assert!(is_generic(b), "{b:?}");
        }
        assert!(!is_generic(&[1.0, -1.0, 0.5]));
    }

    #[test]
    fn singleton_passes() {
        let r = verify_theorem1_exact(&seq(&[0.8]), 1).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        assert_eq!(r.estimate, Measure::Scalar(0.8));
        let r = verify_sparre_andersen_exact(&seq(&[0.8])).unwrap();
        assert_eq!(r.estimate, Measure::List(vec![1.0, 0.0]));
        assert_eq!(r.theory, Measure::List(vec![1.0, 0.0]));
        let r = verify_sparre_andersen_exact(&seq(&[-0.8])).unwrap();
        assert_eq!(r.estimate, Measure::List(vec![0.0, 1.0]));
        assert_eq!(r.verdict, Verdict::Pass);
    }

    #[test]
    fn two_point_hand_enumeration() {
        // (0,1): Δ₁ = min(0, 1/2) = 0, Z̄ = (0, 1/2). (1,0): Δ₁ = min(1, 1/2) = 1/2, Z̄ = (1, 1/2).
        let r = verify_theorem1_exact(&seq(&[0.0, 1.0]), 1).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        assert_eq!(r.estimate, Measure::Scalar(0.25));
        assert_eq!(r.theory, Measure::Scalar(0.25));
        // (-1,2): S = 0,-1,1 so M = 1, N = 1. (2,-1): S = 0,2,1 so M = 0, N = 0.
        let r = verify_sparre_andersen_exact(&seq(&[-1.0, 2.0])).unwrap();
        assert_eq!(r.estimate, Measure::List(vec![1.0, 1.0, 0.0]));
        assert_eq!(r.theory, r.estimate);
    }

    #[test]
    fn five_point_vector_passes_every_k() {
        let base = seq(&[0.11, -0.73, 1.42, -0.31, 0.57]);
        for k in 1..=5 {
            let r = verify_theorem1_exact(&base, k).unwrap();
            assert_eq!(r.verdict, Verdict::Pass, "k={k}");
            assert_eq!(r.replicates, 120);
        }
        assert!(verify_sparre_andersen_exact(&base)
            .unwrap()
            .verdict
            .is_pass());
    }

    #[test]
    fn non_exchangeable_comparison_would_fail() {
        // Sanity check that the comparison has teeth: the identity relates the k-th
        // slope to the k-th order statistic, not to the k-th running average itself.
        let base = seq(&[0.11, -0.73, 1.42, -0.31, 0.57]);
        let mut slopes = Vec::new();
        let mut raw = Vec::new();
        for p in permutations(&base) {
            let z = RealSequence::new(p).unwrap();
            slopes.push(project_monotone(&z).fitted[0]);
            raw.push(running_averages(&z)[0]);
        }
        slopes.sort_by(f64::total_cmp);
        raw.sort_by(f64::total_cmp);
        assert!(slopes.iter().zip(&raw).any(|(a, b)| (a - b).abs() > 1e-3));
    }

    #[test]
    fn rejects_bad_arguments() {
        let long = RealSequence::new(vec![0.1; 9]).unwrap();
        assert!(matches!(
            verify_theorem1_exact(&long, 1),
            Err(Error::TooLarge { .. })
        ));
        assert!(matches!(
            verify_sparre_andersen_exact(&long),
            Err(Error::TooLarge { .. })
        ));
        assert!(verify_theorem1_exact(&seq(&[1.0, 2.0]), 0).is_err());
        assert!(verify_theorem1_exact(&seq(&[1.0, 2.0]), 3).is_err());
        assert!(verify_sparre_andersen_exact(&seq(&[1.0, -1.0])).is_err());
    }
}
