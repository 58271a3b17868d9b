use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{
    default_base_vectors, verify_cts_time_mc, verify_sharp_mse_mc, verify_sparre_andersen_exact,
    verify_stat_dim_mc, verify_theorem1_exact, verify_theorem1_mc, CheckKind, ContinuousProcess,
    ExperimentReport, Measure,
};
use crate::error::{invalid, Error, Result};
use crate::noise_models::{derive_seed, NoiseFamily, NoiseSpec};
use crate::sequence::RealSequence;

pub const SUITE_NAMES: [&str; 5] = ["default", "exact-only", "gaussian", "exchangeable", "cts"];

const STAT_DIM_REPS: usize = 20_000;
const KS_REPS_PER_BATCH: usize = 5_000;
const SHARP_MSE_REPS: usize = 20_000;
const CTS_GRID_STEPS: usize = 1_000;
const CTS_REPS_PER_BATCH: usize = 2_000;
const KS_ALPHA: f64 = 0.01;

/// Fixed vector whose uniform permutations serve as non-i.i.d. exchangeable noise.
const PERMUTATION_VALUES: [f64; 20] = [
    -1.62, 0.43, 1.17, -0.28, 0.91, -0.74, 2.05, -1.09, 0.12, -0.55, 0.67, -1.38, 0.31, 1.49,
    -0.07, -0.86, 0.78, -0.19, 1.26, -1.33,
];

fn default_alpha() -> f64 {
    KS_ALPHA
}

fn default_process() -> ContinuousProcess {
    ContinuousProcess::BrownianMotion
}

/// One entry of a suite. Monte Carlo entries without an explicit `seed` get one
/// derived from the suite seed and the entry's position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExperimentConfig {
    /// `k` omitted means every `k = 1..=n`.
    Theorem1Exact {
        base: Vec<f64>,
        #[serde(default)]
        k: Option<usize>,
    },
    SparreAndersenExact {
        base: Vec<f64>,
    },
    Theorem1Mc {
        noise: NoiseSpec,
        k: usize,
        reps_per_batch: usize,
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default)]
        seed: Option<u64>,
    },
    StatDimMc {
        noise: NoiseSpec,
        p: f64,
        reps: usize,
        #[serde(default)]
        nonneg: bool,
        #[serde(default)]
        seed: Option<u64>,
    },
    SharpMseMc {
        theta_star: Vec<f64>,
        noise: NoiseSpec,
        sigma_grid: Vec<f64>,
        reps: usize,
        #[serde(default)]
        seed: Option<u64>,
    },
    CtsTimeMc {
        #[serde(default = "default_process")]
        process: ContinuousProcess,
        p: f64,
        grid_steps: usize,
        reps_per_batch: usize,
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default)]
        seed: Option<u64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    #[serde(default)]
    pub seed: u64,
    pub experiments: Vec<ExperimentConfig>,
}

/// Run-time overrides applied on top of a [`SuiteConfig`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SuiteOptions {
    pub seed: Option<u64>,
    /// Replaces `reps` / `reps_per_batch` of every Monte Carlo entry.
    pub reps: Option<usize>,
    /// Keep `wall_time` in the reports. Off by default so that reports are
    /// reproducible byte for byte.
    pub record_timing: bool,
}

fn seq(values: &[f64]) -> Result<RealSequence> {
    RealSequence::try_from(values)
}

fn noise(family: NoiseFamily, n: usize) -> NoiseSpec {
    NoiseSpec::new(family, n, 0).expect("built-in noise spec is valid")
}

fn exact_entries() -> Vec<ExperimentConfig> {
    let mut out = Vec::new();
    for base in default_base_vectors() {
        out.push(ExperimentConfig::Theorem1Exact {
            base: base.clone(),
            k: None,
        });
        out.push(ExperimentConfig::SparreAndersenExact { base });
    }
    out
}

fn stat_dim(noise: NoiseSpec, p: f64, nonneg: bool) -> ExperimentConfig {
    ExperimentConfig::StatDimMc {
        noise,
        p,
        reps: STAT_DIM_REPS,
        nonneg,
        seed: None,
    }
}

fn theorem1_mc(noise: NoiseSpec) -> Vec<ExperimentConfig> {
    [1, 10, 20]
        .into_iter()
        .map(|k| ExperimentConfig::Theorem1Mc {
            noise: noise.clone(),
            k,
            reps_per_batch: KS_REPS_PER_BATCH,
            alpha: KS_ALPHA,
            seed: None,
        })
        .collect()
}

fn gaussian_entries() -> Vec<ExperimentConfig> {
    let mut out = vec![stat_dim(noise(NoiseFamily::IidGaussian, 100), 2.0, false)];
    for p in [1.0, 3.0, 4.0] {
        out.push(stat_dim(noise(NoiseFamily::IidGaussian, 50), p, false));
    }
    out.push(stat_dim(noise(NoiseFamily::IidGaussian, 100), 2.0, true));
    out.extend(theorem1_mc(noise(NoiseFamily::IidGaussian, 20)));
    out.push(ExperimentConfig::SharpMseMc {
        theta_star: vec![0.0, 0.0, 1.0, 1.0, 1.0],
        noise: noise(NoiseFamily::IidGaussian, 5),
        sigma_grid: vec![1.0, 0.1, 0.01],
        reps: SHARP_MSE_REPS,
        seed: None,
    });
    out
}

fn exchangeable_entries() -> Vec<ExperimentConfig> {
    let mut out: Vec<ExperimentConfig> = [
        NoiseFamily::IidRademacher,
        NoiseFamily::IidUniform,
        NoiseFamily::IidCenteredExponential,
        NoiseFamily::IidStudentT { df: 5.0 },
    ]
    .into_iter()
    .map(|f| stat_dim(noise(f, 100), 2.0, false))
    .collect();
    out.push(stat_dim(
        noise(NoiseFamily::EquicorrelatedGaussian { rho: 0.5 }, 50),
        2.0,
        false,
    ));
    out.push(stat_dim(noise(NoiseFamily::IidRademacher, 100), 2.0, true));
    let permutation = NoiseSpec::permutation_of(PERMUTATION_VALUES.to_vec(), 0)
        .expect("built-in permutation vector is valid");
    out.push(stat_dim(permutation.clone(), 2.0, false));
    out.extend(theorem1_mc(permutation));
    out
}

fn cts_entries() -> Vec<ExperimentConfig> {
    [0.25, 0.5, 0.75]
        .into_iter()
        .map(|p| ExperimentConfig::CtsTimeMc {
            process: ContinuousProcess::BrownianMotion,
            p,
            grid_steps: CTS_GRID_STEPS,
            reps_per_batch: CTS_REPS_PER_BATCH,
            alpha: KS_ALPHA,
            seed: None,
        })
        .collect()
}

/// Built-in suites, looked up by name (see [`SUITE_NAMES`]).
pub fn named_suite(name: &str) -> Result<SuiteConfig> {
    let experiments = match name {
        "exact-only" => exact_entries(),
        "gaussian" => gaussian_entries(),
        "exchangeable" => exchangeable_entries(),
        "cts" => cts_entries(),
        "default" => {
            let mut all = exact_entries();
            all.extend(gaussian_entries());
            all.extend(exchangeable_entries());
            all.extend(cts_entries());
            all
        }
        other => {
            return Err(invalid(format!(
                "unknown suite `{other}`; expected one of {}",
                SUITE_NAMES.join(", ")
            )))
        }
    };
    Ok(SuiteConfig {
        seed: 0,
        experiments,
    })
}

impl ExperimentConfig {
    fn run(&self, derived_seed: u64, options: &SuiteOptions) -> Result<Vec<ExperimentReport>> {
        let reps_or = |r: usize| options.reps.unwrap_or(r);
        let reports = match self {
            ExperimentConfig::Theorem1Exact { base, k } => {
                let base = seq(base)?;
                match k {
                    Some(k) => vec![verify_theorem1_exact(&base, *k)?],
                    None => (1..=base.len())
                        .map(|k| verify_theorem1_exact(&base, k))
                        .collect::<Result<_>>()?,
                }
            }
            ExperimentConfig::SparreAndersenExact { base } => {
                vec![verify_sparre_andersen_exact(&seq(base)?)?]
            }
            ExperimentConfig::Theorem1Mc {
                noise,
                k,
                reps_per_batch,
                alpha,
                seed,
            } => {
                let noise = noise.with_seed(seed.unwrap_or(derived_seed));
                vec![verify_theorem1_mc(
                    &noise,
                    *k,
                    reps_or(*reps_per_batch),
                    *alpha,
                )?]
            }
            ExperimentConfig::StatDimMc {
                noise,
                p,
                reps,
                nonneg,
                seed,
            } => {
                let noise = noise.with_seed(seed.unwrap_or(derived_seed));
                vec![verify_stat_dim_mc(&noise, *p, reps_or(*reps), *nonneg)?]
            }
            ExperimentConfig::SharpMseMc {
                theta_star,
                noise,
                sigma_grid,
                reps,
                seed,
            } => {
                let noise = noise.with_seed(seed.unwrap_or(derived_seed));
                vec![verify_sharp_mse_mc(
                    &seq(theta_star)?,
                    &noise,
                    sigma_grid,
                    reps_or(*reps),
                )?]
            }
            ExperimentConfig::CtsTimeMc {
                process,
                p,
                grid_steps,
                reps_per_batch,
                alpha,
                seed,
            } => vec![verify_cts_time_mc(
                *process,
                *p,
                *grid_steps,
                reps_or(*reps_per_batch),
                *alpha,
                seed.unwrap_or(derived_seed),
            )?],
        };
        Ok(reports)
    }
}

/// Runs every entry in order. Replicate-level parallelism comes from the
/// ambient rayon pool.
pub fn run_suite(config: &SuiteConfig, options: &SuiteOptions) -> Result<Vec<ExperimentReport>> {
    let suite_seed = options.seed.unwrap_or(config.seed);
    let mut reports = Vec::new();
    for (index, entry) in config.experiments.iter().enumerate() {
        let derived = derive_seed(suite_seed, index as u64);
        for mut report in entry.run(derived, options)? {
            if !options.record_timing {
                report.wall_time = None;
            }
            reports.push(report);
        }
    }
    Ok(reports)
}

/// Aggregate outcome: every exact check must pass, and at most one statistical
/// check may fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SuiteVerdict {
    pub exact_checks: usize,
    pub exact_failures: usize,
    pub statistical_checks: usize,
    pub statistical_failures: usize,
    pub pass: bool,
}

pub const MAX_STATISTICAL_FAILURES: usize = 1;

pub fn suite_verdict(reports: &[ExperimentReport]) -> SuiteVerdict {
    let count = |kind: CheckKind, failed: bool| {
        reports
            .iter()
            .filter(|r| r.check == kind && (!failed || !r.verdict.is_pass()))
            .count()
    };
    let exact_failures = count(CheckKind::Exact, true);
    let statistical_failures = count(CheckKind::Statistical, true);
    SuiteVerdict {
        exact_checks: count(CheckKind::Exact, false),
        exact_failures,
        statistical_checks: count(CheckKind::Statistical, false),
        statistical_failures,
        pass: exact_failures == 0 && statistical_failures <= MAX_STATISTICAL_FAILURES,
    }
}

/// One JSON object per line.
pub fn write_json_lines<W: Write>(reports: &[ExperimentReport], mut out: W) -> Result<()> {
    for report in reports {
        let line = serde_json::to_string(report).map_err(|e| Error::Parse(e.to_string()))?;
        writeln!(out, "{line}").map_err(|e| Error::Parse(e.to_string()))?;
    }
    Ok(())
}

fn measure_field(m: &Measure) -> String {
    match m {
        Measure::Scalar(v) => v.to_string(),
        Measure::List(vs) => vs
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(";"),
    }
}

/// Summary table: `experiment_id,estimate,std_error,theory,z_score,ks_statistic,verdict`.
/// List-valued measures are joined with `;`.
pub fn write_csv<W: Write>(reports: &[ExperimentReport], out: W) -> Result<()> {
    let io = |e: csv::Error| Error::Parse(e.to_string());
    let mut writer = csv::Writer::from_writer(out);
    writer
        .write_record([
            "experiment_id",
            "estimate",
            "std_error",
            "theory",
            "z_score",
            "ks_statistic",
            "verdict",
        ])
        .map_err(io)?;
    for r in reports {
        writer
            .write_record([
                r.experiment_id.clone(),
                measure_field(&r.estimate),
                measure_field(&r.std_error),
                measure_field(&r.theory),
                r.z_score.to_string(),
                r.ks_statistic.map(|v| v.to_string()).unwrap_or_default(),
                if r.verdict.is_pass() { "pass" } else { "fail" }.to_string(),
            ])
            .map_err(io)?;
    }
    writer.flush().map_err(|e| Error::Parse(e.to_string()))?;
    Ok(())
}
