//! Reproducible exchangeable noise vectors.
//!
//! Every replicate owns its own ChaCha stream selected by `(master_seed,
//! replicate_index)`, so a replicate's draw does not depend on which thread
//! produced it or on what was drawn before it.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal, StudentT};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Error, Result};
use crate::sequence::RealSequence;

/// Law of the noise vector. The i.i.d. families are standardized to mean 0 and
/// variance 1.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseFamily {
    IidGaussian,
    IidRademacher,
    /// Uniform on `[-√3, √3]`.
    IidUniform,
    /// `Exp(1) - 1`.
    IidCenteredExponential,
    /// Student t scaled by `sqrt((df-2)/df)`; needs `df > 2`.
    IidStudentT {
        df: f64,
    },
    /// Gaussian with unit variances and all pairwise correlations `rho`.
    EquicorrelatedGaussian {
        rho: f64,
    },
    /// Uniformly random permutation of a fixed vector.
    PermutationOf {
        values: Vec<f64>,
    },
}

impl NoiseFamily {
    pub fn name(&self) -> &'static str {
        match self {
            NoiseFamily::IidGaussian => "iid_gaussian",
            NoiseFamily::IidRademacher => "iid_rademacher",
            NoiseFamily::IidUniform => "iid_uniform",
            NoiseFamily::IidCenteredExponential => "iid_centered_exponential",
            NoiseFamily::IidStudentT { .. } => "iid_student_t",
            NoiseFamily::EquicorrelatedGaussian { .. } => "equicorrelated_gaussian",
            NoiseFamily::PermutationOf { .. } => "permutation_of",
        }
    }

    pub fn is_iid(&self) -> bool {
        !matches!(
            self,
            NoiseFamily::EquicorrelatedGaussian { .. } | NoiseFamily::PermutationOf { .. }
        )
    }
}

/// A validated description of an exchangeable noise law of dimension `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    family: NoiseFamily,
    n: usize,
    master_seed: u64,
}

impl NoiseSpec {
    pub fn new(family: NoiseFamily, n: usize, master_seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(invalid("noise dimension n must be positive"));
        }
        match &family {
            NoiseFamily::IidStudentT { df } if !(*df > 2.0 && df.is_finite()) => {
                return Err(invalid(format!("student t needs df > 2, got {df}")));
            }
            NoiseFamily::EquicorrelatedGaussian { rho } => {
                let lower = if n > 1 {
                    -1.0 / (n as f64 - 1.0)
                } else {
                    f64::NEG_INFINITY
                };
                if !(rho.is_finite() && *rho > lower && *rho < 1.0) {
                    return Err(invalid(format!(
                        "equicorrelation rho = {rho} outside ({lower}, 1) for n = {n}"
                    )));
                }
            }
            NoiseFamily::PermutationOf { values } => {
                if values.len() != n {
                    return Err(invalid(format!(
                        "permutation_of needs {n} values, got {}",
                        values.len()
                    )));
                }
                RealSequence::try_from(values.as_slice())?;
            }
            _ => {}
        }
        Ok(Self {
            family,
            n,
            master_seed,
        })
    }

    /// Shorthand for a permutation law over `values`.
    pub fn permutation_of(values: Vec<f64>, master_seed: u64) -> Result<Self> {
        let n = values.len();
        Self::new(NoiseFamily::PermutationOf { values }, n, master_seed)
    }

    pub fn family(&self) -> &NoiseFamily {
        &self.family
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn with_seed(&self, master_seed: u64) -> Self {
        Self {
            master_seed,
            ..self.clone()
        }
    }

    /// Same law in a different dimension. Fails for `permutation_of`, whose
    /// dimension is fixed by its vector, and when `rho` is infeasible at `n`.
    pub fn with_dimension(&self, n: usize) -> Result<Self> {
        Self::new(self.family.clone(), n, self.master_seed)
    }

    /// Common mean and variance of each coordinate.
    pub fn marginal_moments(&self) -> (f64, f64) {
        match &self.family {
            NoiseFamily::PermutationOf { values } => {
                let n = values.len() as f64;
                let mean = values.iter().sum::<f64>() / n;
                let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                (mean, var)
            }
            _ => (0.0, 1.0),
        }
    }

    /// Whether `Z` and `-Z` have the same law.
    pub fn is_symmetric(&self) -> bool {
        match &self.family {
            NoiseFamily::IidCenteredExponential => false,
            NoiseFamily::PermutationOf { values } => {
                let mut a = values.clone();
                let mut b: Vec<f64> = values.iter().map(|v| -v).collect();
                a.sort_by(f64::total_cmp);
                b.sort_by(f64::total_cmp);
                a.iter()
                    .zip(&b)
                    .all(|(x, y)| (x - y).abs() <= 1e-12 * (1.0 + x.abs()))
            }
            _ => true,
        }
    }

    /// Draws replicate `replicate_index`; a pure function of the seed and the index.
    pub fn sample(&self, replicate_index: u64) -> RealSequence {
        let mut out = Vec::with_capacity(self.n);
        self.sample_into(replicate_index, &mut out);
        RealSequence::from_vec_unchecked(out)
    }

    /// Like [`sample`](Self::sample) but reuses `out`'s allocation.
    pub fn sample_into(&self, replicate_index: u64, out: &mut Vec<f64>) {
        let mut rng = replicate_rng(self.master_seed, replicate_index);
        out.clear();
        let n = self.n;
        match &self.family {
            NoiseFamily::IidGaussian => {
                out.extend((0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
            }
            NoiseFamily::IidRademacher => {
                out.extend((0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }));
            }
            NoiseFamily::IidUniform => {
                let half_width = 3f64.sqrt();
                out.extend((0..n).map(|_| rng.random_range(-half_width..half_width)));
            }
            NoiseFamily::IidCenteredExponential => {
                out.extend((0..n).map(|_| rng.sample::<f64, _>(Exp1) - 1.0));
            }
            NoiseFamily::IidStudentT { df } => {
                let t = StudentT::new(*df).expect("df validated at construction");
                let scale = ((df - 2.0) / df).sqrt();
                out.extend((0..n).map(|_| scale * t.sample(&mut rng)));
            }
            NoiseFamily::EquicorrelatedGaussian { rho } => {
                let rho = *rho;
                if rho >= 0.0 {
                    let common: f64 = rng.sample(StandardNormal);
                    let shared = rho.sqrt() * common;
                    let own = (1.0 - rho).sqrt();
                    out.extend((0..n).map(|_| shared + own * rng.sample::<f64, _>(StandardNormal)));
                } else {
                    // Symmetric square root of (1-rho) I + rho 11ᵀ: scale the
                    // mean-free part by sqrt(1-rho) and the mean by sqrt(1+(n-1)rho).
                    out.extend((0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
                    let mean = out.iter().sum::<f64>() / n as f64;
                    let along = (1.0 + (n as f64 - 1.0) * rho).sqrt();
                    let across = (1.0 - rho).sqrt();
                    for v in out.iter_mut() {
                        *v = across * (*v - mean) + along * mean;
                    }
                }
            }
            NoiseFamily::PermutationOf { values } => {
                out.extend_from_slice(values);
                out.shuffle(&mut rng);
            }
        }
    }
}

/// RNG for one replicate: ChaCha8 keyed by the master seed, stream = replicate index.
pub fn replicate_rng(master_seed: u64, replicate_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(replicate_index);
    rng
}

/// Derives an independent child seed from `(master_seed, tag)`.
pub fn derive_seed(master_seed: u64, tag: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed ^ 0x6d6f_6e6f_636f_6e65);
    rng.set_stream(tag);
    rng.next_u64()
}

/// Pairwise correlation `Cor(Z_1, Z_2)` of the law.
///
/// A uniform permutation of a fixed non-constant vector has correlation
/// `-1/(n-1)`. For `n = 1` the quantity is undefined and 0 is returned.
pub fn pairwise_correlation(spec: &NoiseSpec) -> f64 {
    match spec.family() {
        NoiseFamily::EquicorrelatedGaussian { rho } => *rho,
        NoiseFamily::PermutationOf { .. } if spec.n() > 1 => -1.0 / (spec.n() as f64 - 1.0),
        _ => 0.0,
    }
}

impl fmt::Display for NoiseSpec {
    /// Key-value fragment, e.g. `family=iid_student_t df=5 n=100 seed=7`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "family={}", self.family.name())?;
        match &self.family {
            NoiseFamily::IidStudentT { df } => write!(f, " df={df}")?,
            NoiseFamily::EquicorrelatedGaussian { rho } => write!(f, " rho={rho}")?,
            NoiseFamily::PermutationOf { values } => {
                let joined: Vec<String> = values.iter().map(|v| v.to_string()).collect();
                write!(f, " values={}", joined.join(","))?;
            }
            _ => {}
        }
        write!(f, " n={} seed={}", self.n, self.master_seed)
    }
}

impl FromStr for NoiseSpec {
    type Err = Error;

    /// Parses the fragment written by `Display`. `seed` defaults to 0, and `n`
    /// may be omitted for `permutation_of`.
    fn from_str(s: &str) -> Result<Self> {
        let mut family = None;
        let mut n = None;
        let mut seed = 0u64;
        let mut df = None;
        let mut rho = None;
        let mut values = None;
        for token in s.split_whitespace() {
            let (key, value) = token
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value, got `{token}`")))?;
            let bad = |what: &str| Error::Parse(format!("bad {what} `{value}`"));
            match key {
                "family" => family = Some(value.to_string()),
                "n" => n = Some(value.parse::<usize>().map_err(|_| bad("n"))?),
                "seed" => seed = value.parse().map_err(|_| bad("seed"))?,
                "df" => df = Some(value.parse::<f64>().map_err(|_| bad("df"))?),
                "rho" => rho = Some(value.parse::<f64>().map_err(|_| bad("rho"))?),
                "values" => {
                    let parsed: std::result::Result<Vec<f64>, _> =
                        value.split(',').map(|v| v.trim().parse::<f64>()).collect();
                    values = Some(parsed.map_err(|_| bad("values"))?);
                }
                other => return Err(Error::Parse(format!("unknown noise key `{other}`"))),
            }
        }
        let family = family.ok_or_else(|| Error::Parse("missing family".into()))?;
        let missing = |k: &str| Error::Parse(format!("family {family} needs `{k}`"));
        let family = match family.as_str() {
            "iid_gaussian" => NoiseFamily::IidGaussian,
            "iid_rademacher" => NoiseFamily::IidRademacher,
            "iid_uniform" => NoiseFamily::IidUniform,
            "iid_centered_exponential" => NoiseFamily::IidCenteredExponential,
            "iid_student_t" => NoiseFamily::IidStudentT {
                df: df.ok_or_else(|| missing("df"))?,
            },
            "equicorrelated_gaussian" => NoiseFamily::EquicorrelatedGaussian {
                rho: rho.ok_or_else(|| missing("rho"))?,
            },
            "permutation_of" => {
                let values = values.ok_or_else(|| missing("values"))?;
                n.get_or_insert(values.len());
                NoiseFamily::PermutationOf { values }
            }
            other => return Err(Error::Parse(format!("unknown noise family `{other}`"))),
        };
        let n = n.ok_or_else(|| Error::Parse("missing n".into()))?;
        NoiseSpec::new(family, n, seed)
    }
}

impl Serialize for NoiseSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NoiseSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::mean_and_se;

    fn all_families() -> Vec<NoiseFamily> {
        vec![
            NoiseFamily::IidGaussian,
            NoiseFamily::IidRademacher,
            NoiseFamily::IidUniform,
            NoiseFamily::IidCenteredExponential,
            NoiseFamily::IidStudentT { df: 5.0 },
            NoiseFamily::EquicorrelatedGaussian { rho: 0.5 },
            NoiseFamily::EquicorrelatedGaussian { rho: -0.2 },
        ]
    }

    #[test]
    fn construction_validates_parameters() {
        assert!(NoiseSpec::new(NoiseFamily::IidStudentT { df: 2.0 }, 3, 0).is_err());
        assert!(NoiseSpec::new(NoiseFamily::IidStudentT { df: 2.5 }, 3, 0).is_ok());
        let eq = |rho| NoiseSpec::new(NoiseFamily::EquicorrelatedGaussian { rho }, 5, 0);
        assert!(eq(1.0).is_err());
        assert!(eq(-0.25).is_err());
        assert!(eq(-0.24).is_ok());
        assert!(eq(0.0).is_ok());
        assert!(NoiseSpec::new(NoiseFamily::IidGaussian, 0, 0).is_err());
        assert!(NoiseSpec::new(
            NoiseFamily::PermutationOf {
                values: vec![1.0, 2.0]
            },
            3,
            0
        )
        .is_err());
    }

    #[test]
    fn samples_are_deterministic_per_index() {
        for family in all_families() {
            let spec = NoiseSpec::new(family, 5, 42).unwrap();
            assert_eq!(spec.sample(3), spec.sample(3));
            assert_ne!(spec.sample(3), spec.sample(4));
            assert_ne!(spec.sample(3), spec.with_seed(43).sample(3));
        }
    }

    #[test]
    fn permutation_preserves_multiset() {
        let spec = NoiseSpec::permutation_of(vec![1.0, 2.0, 3.0], 9).unwrap();
        let mut seen = std::collections::BTreeSet::new();
        for i in 0..200 {
            let mut v = spec.sample(i).into_vec();
            seen.insert(format!("{v:?}"));
            v.sort_by(f64::total_cmp);
            assert_eq!(v, vec![1.0, 2.0, 3.0]);
        }
        assert_eq!(seen.len(), 6);
    }

    #[test]
    fn rademacher_entries_and_mean() {
        let spec = NoiseSpec::new(NoiseFamily::IidRademacher, 4, 1).unwrap();
        let reps = 1_000_000u64;
        let mut total = 0.0;
        for i in 0..reps {
            let z = spec.sample(i);
            assert!(z.iter().all(|&v| v == 1.0 || v == -1.0));
            total += z[0];
        }
        assert!((total / reps as f64).abs() < 3e-3);
    }

    #[test]
    fn coordinates_are_standardized_and_exchangeable() {
        let reps = 100_000u64;
        for family in all_families() {
            let spec = NoiseSpec::new(family.clone(), 3, 2024).unwrap();
            let draws: Vec<RealSequence> = (0..reps).map(|i| spec.sample(i)).collect();
            for coord in 0..3 {
                let xs: Vec<f64> = draws.iter().map(|z| z[coord]).collect();
                let (m, se_m) = mean_and_se(&xs);
                assert!(m.abs() <= 3.0 * se_m, "{family:?} coord {coord} mean {m}");
                let sq: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
                let (v, se_v) = mean_and_se(&sq);
                assert!(
                    (v - 1.0).abs() <= 3.0 * se_v,
                    "{family:?} coord {coord} var {v}"
                );
            }
            // E[Z1 Z2] and E[Z2 Z3] estimate the same pairwise correlation.
            let rho = pairwise_correlation(&spec);
            for (a, b) in [(0, 1), (1, 2), (0, 2)] {
                let prods: Vec<f64> = draws.iter().map(|z| z[a] * z[b]).collect();
                let (c, se) = mean_and_se(&prods);
                assert!(
                    (c - rho).abs() <= 3.5 * se,
                    "{family:?} pair ({a},{b}) {c} vs {rho}"
                );
            }
        }
    }

    #[test]
    fn zero_correlation_matches_iid_gaussian_in_law() {
        let eq = NoiseSpec::new(NoiseFamily::EquicorrelatedGaussian { rho: 0.0 }, 2, 5).unwrap();
        let reps = 50_000u64;
        let prods: Vec<f64> = (0..reps)
            .map(|i| {
                let z = eq.sample(i);
                z[0] * z[1]
            })
            .collect();
        let (c, se) = mean_and_se(&prods);
        assert!(c.abs() <= 3.0 * se);
    }

    #[test]
    fn permutation_correlation_matches_enumeration() {
        // Cor(Z1, Z2) under a uniform permutation, by enumerating ordered pairs.
        let v = [0.3, -1.0, 2.5, 0.7, -0.4];
        let n = v.len();
        let mean = v.iter().sum::<f64>() / n as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        let mut cov = 0.0;
        let mut pairs = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    cov += (v[i] - mean) * (v[j] - mean);
                    pairs += 1.0;
                }
            }
        }
        let enumerated = cov / pairs / var;
        let spec = NoiseSpec::permutation_of(v.to_vec(), 0).unwrap();
        assert!((pairwise_correlation(&spec) - enumerated).abs() < 1e-12);
        assert_eq!(pairwise_correlation(&spec), -0.25);
    }

    #[test]
    fn simple_correlations() {
        let g = NoiseSpec::new(NoiseFamily::IidGaussian, 4, 0).unwrap();
        assert_eq!(pairwise_correlation(&g), 0.0);
        let e = NoiseSpec::new(NoiseFamily::EquicorrelatedGaussian { rho: 0.5 }, 4, 0).unwrap();
        assert_eq!(pairwise_correlation(&e), 0.5);
    }

    #[test]
    fn fragment_round_trips() {
        let specs = vec![
            NoiseSpec::new(NoiseFamily::IidStudentT { df: 5.0 }, 100, 7).unwrap(),
            NoiseSpec::new(NoiseFamily::EquicorrelatedGaussian { rho: 0.5 }, 50, 1).unwrap(),
            NoiseSpec::permutation_of(vec![1.5, -2.0, 0.25], 3).unwrap(),
        ];
        for spec in specs {
            let text = spec.to_string();
            assert_eq!(text.parse::<NoiseSpec>().unwrap(), spec, "{text}");
            let json = serde_json::to_string(&spec).unwrap();
            assert_eq!(serde_json::from_str::<NoiseSpec>(&json).unwrap(), spec);
        }
        assert_eq!(
            "family=iid_gaussian n=3"
                .parse::<NoiseSpec>()
                .unwrap()
                .to_string(),
            "family=iid_gaussian n=3 seed=0"
        );
        assert!("family=iid_gaussian".parse::<NoiseSpec>().is_err());
        assert!("family=cauchy n=3".parse::<NoiseSpec>().is_err());
        assert!("family=iid_student_t n=3".parse::<NoiseSpec>().is_err());
    }

    #[test]
    fn symmetry_flags() {
        assert!(NoiseSpec::new(NoiseFamily::IidRademacher, 2, 0)
            .unwrap()
            .is_symmetric());
        assert!(!NoiseSpec::new(NoiseFamily::IidCenteredExponential, 2, 0)
            .unwrap()
            .is_symmetric());
        assert!(NoiseSpec::permutation_of(vec![-1.0, 0.0, 1.0], 0)
            .unwrap()
            .is_symmetric());
        assert!(!NoiseSpec::permutation_of(vec![-1.0, 2.0], 0)
            .unwrap()
            .is_symmetric());
    }
}
