//! Verification experiments: exact enumeration over permutations for small `n`
//! and seeded Monte Carlo for large `n`, each producing an [`ExperimentReport`].

mod exact;
mod ks;
mod monte_carlo;
mod suite;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use exact::{
    default_base_vectors, is_generic, permutations, verify_sparre_andersen_exact,
    verify_theorem1_exact, EXACT_MAX_LEN, EXACT_VALUE_TOLERANCE,
};
pub use ks::{ks_critical_coefficient, ks_two_sample, ks_two_sample_with_ties, KsResult};
pub use monte_carlo::{
    verify_cts_time_mc, verify_sharp_mse_mc, verify_stat_dim_mc, verify_theorem1_mc,
    ContinuousProcess, KS_RELATIVE_TIE_TOLERANCE, MIN_CTS_GRID_STEPS, MIN_REPS,
};
pub use suite::{
    named_suite, run_suite, suite_verdict, write_csv, write_json_lines, ExperimentConfig,
    SuiteConfig, SuiteOptions, SuiteVerdict, MAX_STATISTICAL_FAILURES, SUITE_NAMES,
};

/// Largest acceptable `|z|` for a z-score verdict.
pub const Z_THRESHOLD: f64 = 3.0;

/// A scalar or per-setting list of values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Measure {
    Scalar(f64),
    List(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(pass: bool) -> Self {
        if pass {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn is_pass(self) -> bool {
        self == Verdict::Pass
    }
}

/// Whether a report is decided by enumeration or by a statistical test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckKind {
    Exact,
    Statistical,
}

/// Outcome of one verification run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment_id: String,
    /// Noise law (as a key-value fragment) and experiment parameters.
    pub spec: Value,
    pub estimate: Measure,
    pub std_error: Measure,
    pub theory: Measure,
    pub z_score: f64,
    pub ks_statistic: Option<f64>,
    pub ks_threshold: Option<f64>,
    pub replicates: u64,
    pub verdict: Verdict,
    /// Seconds; `None` when timing is not recorded.
    pub wall_time: Option<f64>,
    pub check: CheckKind,
    pub exact_match: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub details: Option<Value>,
}

pub(crate) fn z_score(estimate: f64, theory: f64, std_error: f64) -> f64 {
    let diff = estimate - theory;
    if diff == 0.0 {
        0.0
    } else {
        diff / std_error
    }
}
