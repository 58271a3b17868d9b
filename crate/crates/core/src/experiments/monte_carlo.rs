//! Seeded Monte Carlo checks. Replicate `i` always uses noise stream `i`, and
//! per-replicate values are collected in index order before any reduction, so
//! every estimate is bit-identical under any rayon thread count.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{
    ks_two_sample, ks_two_sample_with_ties, z_score, CheckKind, ExperimentReport, Measure, Verdict,
    Z_THRESHOLD,
};
use crate::cone_projection::project_monotone;
use crate::error::{invalid, Error, Result};
use crate::exact_formulas::{
    gaussian_lp_projection_norm, nonneg_statistical_dimension, sharp_mse_block_bound,
    statistical_dimension, RiskBoundInput,
};
use crate::noise_models::{pairwise_correlation, NoiseFamily, NoiseSpec};
use crate::numerics::mean_and_se;
use crate::sequence::RealSequence;
use crate::walk_geometry::{
    greatest_convex_minorant, occupation_quantile, slope_from_minorant, Horizon, WalkPath,
};

/// Fewest replicates (per batch) accepted by the Monte Carlo experiments.
pub const MIN_REPS: usize = 1000;
/// Coarsest grid accepted for continuous-time paths.
/// Relative tolerance under which a slope and a running average are one atom.
pub const KS_RELATIVE_TIE_TOLERANCE: f64 = 1e-12;

pub const MIN_CTS_GRID_STEPS: usize = 100;

/// Continuous-time processes available for the slope/occupation comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContinuousProcess {
    BrownianMotion,
}

fn check_reps(reps: usize) -> Result<()> {
    if reps < MIN_REPS {
        return Err(invalid(format!(
            "need at least {MIN_REPS} replicates, got {reps}"
        )));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("alpha = {alpha} must lie in (0, 1)")))
    }
}

/// Evaluates `f` on the noise draws with indices `range`, in index order.
fn per_replicate<T, F>(spec: &NoiseSpec, range: std::ops::Range<u64>, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&RealSequence) -> T + Sync,
{
    range
        .into_par_iter()
        .map_init(
            || Vec::with_capacity(spec.n()),
            |buf, i| {
                spec.sample_into(i, buf);
                let z = RealSequence::from_vec_unchecked(std::mem::take(buf));
                let out = f(&z);
                *buf = z.into_vec();
                out
            },
        )
        .collect()
}

fn kth_smallest(mut values: Vec<f64>, k: usize) -> f64 {
    let (_, v, _) = values.select_nth_unstable_by(k - 1, f64::total_cmp);
    *v
}

fn power(x: f64, p: f64) -> f64 {
    if p == 2.0 {
        x * x
    } else if p == 1.0 {
        x
    } else {
        x.powf(p)
    }
}

/// Compares the law of the `k`-th isotonic slope with the law of the `k`-th
/// smallest running average by a two-sample KS test on independent batches:
/// replicates `0..reps` feed the slopes, `reps..2·reps` the order statistics.
pub fn verify_theorem1_mc(
    spec: &NoiseSpec,
    k: usize,
    reps_per_batch: usize,
    alpha: f64,
) -> Result<ExperimentReport> {
    check_reps(reps_per_batch)?;
    check_alpha(alpha)?;
    let n = spec.n();
    if k == 0 || k > n {
        return Err(invalid(format!("k = {k} must lie in 1..={n}")));
    }
    let start = Instant::now();
    let reps = reps_per_batch as u64;
    let slopes = per_replicate(spec, 0..reps, |z| project_monotone(z).fitted[k - 1]);
    let order_stats = per_replicate(spec, reps..2 * reps, |z| {
        let mut acc = 0.0;
        let averages = z
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                acc += x;
                acc / (i + 1) as f64
            })
            .collect();
        kth_smallest(averages, k)
    });
    let scale = slopes
        .iter()
        .chain(&order_stats)
        .fold(1.0f64, |m, v| m.max(v.abs()));
    let ks = ks_two_sample_with_ties(
        &slopes,
        &order_stats,
        alpha,
        KS_RELATIVE_TIE_TOLERANCE * scale,
    )?;
    let (mean_a, se_a) = mean_and_se(&slopes);
    let (mean_b, se_b) = mean_and_se(&order_stats);
    let se = (se_a * se_a + se_b * se_b).sqrt();
    Ok(ExperimentReport {
        experiment_id: format!("theorem1_mc/{}/n={n}/k={k}", spec.family().name()),
        spec: json!({
            "noise": spec.to_string(),
            "k": k,
            "reps_per_batch": reps_per_batch,
            "alpha": alpha,
        }),
        estimate: Measure::Scalar(mean_a),
        std_error: Measure::Scalar(se),
        theory: Measure::Scalar(mean_b),
        z_score: z_score(mean_a, mean_b, se),
        ks_statistic: Some(ks.statistic),
        ks_threshold: Some(ks.threshold_at_alpha),
        replicates: 2 * reps,
        verdict: Verdict::from_bool(ks.passes()),
        wall_time: Some(start.elapsed().as_secs_f64()),
        check: CheckKind::Statistical,
        exact_match: None,
        details: None,
    })
}

/// Closed-form `E‖Π(Z)‖_p^p` (or its non-negative-cone analogue) for `spec`,
/// or an explanation of why none is available.
fn stat_dim_target(spec: &NoiseSpec, p: f64, nonneg: bool) -> Result<f64> {
    let n = spec.n();
    let rho = pairwise_correlation(spec);
    let (mean, var) = spec.marginal_moments();
    match (nonneg, p == 2.0) {
        (false, true) => {
            // Σ_k E[Z̄_k²] = n·m² + s²·(ρn + (1-ρ)H_n) for mean m, variance s².
            Ok(n as f64 * mean * mean + var * statistical_dimension(n, rho)?)
        }
        (false, false) => match spec.family() {
            NoiseFamily::IidGaussian => gaussian_lp_projection_norm(n, p),
            other => Err(Error::Unsupported(format!(
                "closed-form L^{p} target exists only for iid_gaussian noise, not {}",
                other.name()
            ))),
        },
        (true, true) => {
            if !spec.is_symmetric() {
                return Err(Error::Unsupported(format!(
                    "non-negative cone target needs symmetric noise; {} is not symmetric",
                    spec.family().name()
                )));
            }
            Ok(var * nonneg_statistical_dimension(n, rho)?)
        }
        (true, false) => Err(Error::Unsupported(
            "non-negative cone target is only available for p = 2".into(),
        )),
    }
}

/// Estimates `E‖Π(Z)‖_p^p` (projection onto the monotone cone, or onto its
/// non-negative part) and compares it with the closed form by a z-score.
///
/// The running-average side `Σ_k E|Z̄_k|^p` (or `Σ_k E(Z̄_k)_+^p`) is estimated
/// from the same replicates and reported in `details` with the z-score of the
/// paired difference.
pub fn verify_stat_dim_mc(
    spec: &NoiseSpec,
    p: f64,
    reps: usize,
    use_nonneg_cone: bool,
) -> Result<ExperimentReport> {
    check_reps(reps)?;
    if !(p > 0.0 && p.is_finite()) {
        return Err(invalid(format!("p = {p} must be positive")));
    }
    let theory = stat_dim_target(spec, p, use_nonneg_cone)?;
    let start = Instant::now();
    let clip = |x: f64| if use_nonneg_cone { x.max(0.0) } else { x.abs() };
    let pairs = per_replicate(spec, 0..reps as u64, |z| {
        let fit = project_monotone(z);
        let norm: f64 = fit.fitted.iter().map(|&v| power(clip(v), p)).sum();
        let mut acc = 0.0;
        let averages: f64 = z
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                acc += x;
                power(clip(acc / (i + 1) as f64), p)
            })
            .sum();
        (norm, averages)
    });
    let norms: Vec<f64> = pairs.iter().map(|t| t.0).collect();
    let averages: Vec<f64> = pairs.iter().map(|t| t.1).collect();
    let differences: Vec<f64> = pairs.iter().map(|t| t.0 - t.1).collect();
    let (estimate, se) = mean_and_se(&norms);
    let (avg_estimate, avg_se) = mean_and_se(&averages);
    let (diff_mean, diff_se) = mean_and_se(&differences);
    let z = z_score(estimate, theory, se);
    let cone = if use_nonneg_cone {
        "nonneg_monotone"
    } else {
        "monotone"
    };
    Ok(ExperimentReport {
        experiment_id: format!(
            "stat_dim_mc/{}/{cone}/n={}/p={p}",
            spec.family().name(),
            spec.n()
        ),
        spec: json!({
            "noise": spec.to_string(),
            "p": p,
            "reps": reps,
            "cone": cone,
        }),
        estimate: Measure::Scalar(estimate),
        std_error: Measure::Scalar(se),
        theory: Measure::Scalar(theory),
        z_score: z,
        ks_statistic: None,
        ks_threshold: None,
        replicates: reps as u64,
        verdict: Verdict::from_bool(z.abs() <= Z_THRESHOLD),
        wall_time: Some(start.elapsed().as_secs_f64()),
        check: CheckKind::Statistical,
        exact_match: None,
        details: Some(json!({
            "running_average_estimate": avg_estimate,
            "running_average_std_error": avg_se,
            "paired_difference_z": z_score(diff_mean, 0.0, diff_se),
        })),
    })
}

/// Estimates the normalized risk `(n/σ²)·R(θ̂, θ*) = E‖θ̂ − θ*‖²/σ²` at each `σ`
/// and compares it with the block-sum bound `Σ_i δ_{n_i}` over the constant
/// blocks of `θ*`.
///
/// The same noise replicates are reused at every `σ`. Passes when every estimate
/// is at most bound + 3 SE and the estimate at the smallest `σ` is within 3 SE
/// of the bound.
pub fn verify_sharp_mse_mc(
    theta_star: &RealSequence,
    spec: &NoiseSpec,
    sigma_grid: &[f64],
    reps: usize,
) -> Result<ExperimentReport> {
    check_reps(reps)?;
    if !theta_star.is_non_decreasing() {
        return Err(invalid("theta_star must be non-decreasing"));
    }
    if theta_star.len() != spec.n() {
        return Err(invalid(format!(
            "theta_star has length {} but the noise has dimension {}",
            theta_star.len(),
            spec.n()
        )));
    }
    if sigma_grid.is_empty() || sigma_grid.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(invalid("sigma grid must be non-empty and positive"));
    }
    if spec.marginal_moments() != (0.0, 1.0) {
        return Err(Error::Unsupported(
            "block bound needs noise with zero mean and unit variance".into(),
        ));
    }
    let n = theta_star.len();
    let rho = pairwise_correlation(spec);
    // At σ = 1 the normalized bound is Σ_i δ_{n_i} / n; rescale by n.
    let input = RiskBoundInput::from_theta_star(theta_star.clone(), 1.0, rho)?;
    let bound = sharp_mse_block_bound(&input)? * n as f64;

    let start = Instant::now();
    let mut estimates = Vec::with_capacity(sigma_grid.len());
    let mut errors = Vec::with_capacity(sigma_grid.len());
    for &sigma in sigma_grid {
        let losses = per_replicate(spec, 0..reps as u64, |z| {
            let y: Vec<f64> = theta_star
                .iter()
                .zip(z.iter())
                .map(|(t, e)| t + sigma * e)
                .collect();
            let fit = project_monotone(&RealSequence::from_vec_unchecked(y));
            fit.fitted
                .iter()
                .zip(theta_star.iter())
                .map(|(a, b)| {
                    let d = (a - b) / sigma;
                    d * d
                })
                .sum::<f64>()
        });
        let (m, se) = mean_and_se(&losses);
        estimates.push(m);
        errors.push(se);
    }
    let smallest = sigma_grid
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("non-empty grid");
    let z = z_score(estimates[smallest], bound, errors[smallest]);
    let below_bound = estimates
        .iter()
        .zip(&errors)
        .all(|(m, se)| *m <= bound + Z_THRESHOLD * se);
    Ok(ExperimentReport {
        experiment_id: format!(
            "sharp_mse_mc/{}/n={n}/blocks={}",
            spec.family().name(),
            input
                .block_lengths
                .iter()
                .map(|l| l.to_string())
                .collect::<Vec<_>>()
                .join("+")
        ),
        spec: json!({
            "noise": spec.to_string(),
            "theta_star": theta_star.as_slice(),
            "sigma_grid": sigma_grid,
            "reps": reps,
        }),
        estimate: Measure::List(estimates),
        std_error: Measure::List(errors),
        theory: Measure::Scalar(bound),
        z_score: z,
        ks_statistic: None,
        ks_threshold: None,
        replicates: reps as u64,
        verdict: Verdict::from_bool(below_bound && z.abs() <= Z_THRESHOLD),
        wall_time: Some(start.elapsed().as_secs_f64()),
        check: CheckKind::Statistical,
        exact_match: None,
        details: Some(json!({ "all_below_bound": below_bound })),
    })
}

fn brownian_path(noise: &NoiseSpec, index: u64, buf: &mut Vec<f64>) -> WalkPath {
    noise.sample_into(index, buf);
    let scale = 1.0 / (noise.n() as f64).sqrt();
    let mut sums = Vec::with_capacity(buf.len() + 1);
    sums.push(0.0);
    let mut acc = 0.0;
    for &x in buf.iter() {
        acc += scale * x;
        sums.push(acc);
    }
    WalkPath::from_partial_sums(sums, Horizon::UnitInterval).expect("finite Gaussian path")
}

/// Compares the law of the convex-minorant slope at time `p` with the law of the
/// `p`-quantile of the occupation measure of `S(t)/t`, on independent batches of
/// discretized paths.
pub fn verify_cts_time_mc(
    process: ContinuousProcess,
    p: f64,
    grid_steps: usize,
    reps_per_batch: usize,
    alpha: f64,
    seed: u64,
) -> Result<ExperimentReport> {
    check_reps(reps_per_batch)?;
    check_alpha(alpha)?;
    if !(p > 0.0 && p <= 1.0) {
        return Err(invalid(format!("p = {p} must lie in (0, 1]")));
    }
    if grid_steps < MIN_CTS_GRID_STEPS {
        return Err(invalid(format!(
            "grid needs at least {MIN_CTS_GRID_STEPS} steps, got {grid_steps}"
        )));
    }
    let ContinuousProcess::BrownianMotion = process;
    let noise = NoiseSpec::new(NoiseFamily::IidGaussian, grid_steps, seed)?;
    let start = Instant::now();
    let reps = reps_per_batch as u64;
    let slopes: Vec<f64> = (0..reps)
        .into_par_iter()
        .map_init(Vec::new, |buf, i| {
            let path = brownian_path(&noise, i, buf);
            let minorant = greatest_convex_minorant(&path);
            slope_from_minorant(&minorant, grid_steps, p)
        })
        .collect();
    let quantiles: Vec<f64> = (reps..2 * reps)
        .into_par_iter()
        .map_init(Vec::new, |buf, i| {
            let path = brownian_path(&noise, i, buf);
            occupation_quantile(&path, p).expect("path on [0, 1] and p validated")
        })
        .collect();
    let ks = ks_two_sample(&slopes, &quantiles, alpha)?;
    let (mean_a, se_a) = mean_and_se(&slopes);
    let (mean_b, se_b) = mean_and_se(&quantiles);
    let se = (se_a * se_a + se_b * se_b).sqrt();
    Ok(ExperimentReport {
        experiment_id: format!("cts_time_mc/brownian_motion/steps={grid_steps}/p={p}"),
        spec: json!({
            "process": process,
            "p": p,
            "grid_steps": grid_steps,
            "reps_per_batch": reps_per_batch,
            "alpha": alpha,
            "seed": seed,
        }),
        estimate: Measure::Scalar(mean_a),
        std_error: Measure::Scalar(se),
        theory: Measure::Scalar(mean_b),
        z_score: z_score(mean_a, mean_b, se),
        ks_statistic: Some(ks.statistic),
        ks_threshold: Some(ks.threshold_at_alpha),
        replicates: 2 * reps,
        verdict: Verdict::from_bool(ks.passes()),
        wall_time: Some(start.elapsed().as_secs_f64()),
        check: CheckKind::Statistical,
        exact_match: None,
        details: None,
    })
}
