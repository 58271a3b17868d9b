//! Cumulative-sum diagrams of random walks and the geometry built on them:
//! greatest convex minorants, running averages, the last-argmin and
//! non-positive-time statistics, and the occupation measure of `S(t)/t` for
//! piecewise-linear paths on `[0, 1]`.

use crate::error::{invalid, Error, Result};
use crate::sequence::RealSequence;

/// Tolerance on `x` used when inverting the occupation CDF.
pub const QUANTILE_TOLERANCE: f64 = 1e-10;

/// Abscissae on which the partial sums live.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Horizon {
    /// Integer grid `0, 1, …, n`.
    UnitStep,
    /// Uniform grid `0, 1/n, …, 1`.
    UnitInterval,
}

/// Partial sums `S_0 = 0, S_1, …, S_n`, linearly interpolated between grid points.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkPath {
    partial_sums: Vec<f64>,
    horizon: Horizon,
}

impl WalkPath {
    /// Builds a path from explicit partial sums. The first value must be exactly 0
    /// and there must be at least one step.
    pub fn from_partial_sums(partial_sums: Vec<f64>, horizon: Horizon) -> Result<Self> {
        if partial_sums.len() < 2 {
            return Err(Error::Empty);
        }
        if partial_sums[0] != 0.0 {
            return Err(invalid("walk must start at 0"));
        }
        if let Some((index, &value)) = partial_sums
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite())
        {
            return Err(Error::NonFinite { index, value });
        }
        Ok(Self {
            partial_sums,
            horizon,
        })
    }

    pub fn partial_sums(&self) -> &[f64] {
        &self.partial_sums
    }

    pub fn horizon(&self) -> Horizon {
        self.horizon
    }

    /// Number of steps `n`.
    pub fn steps(&self) -> usize {
        self.partial_sums.len() - 1
    }

    /// Abscissa of grid point `k`.
    pub fn time(&self, k: usize) -> f64 {
        match self.horizon {
            Horizon::UnitStep => k as f64,
            Horizon::UnitInterval => k as f64 / self.steps() as f64,
        }
    }

    /// The same partial sums placed on the other grid.
    pub fn with_horizon(mut self, horizon: Horizon) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn increments(&self) -> RealSequence {
        let inc = self.partial_sums.windows(2).map(|w| w[1] - w[0]).collect();
        RealSequence::from_vec_unchecked(inc)
    }

    fn require_unit_interval(&self) -> Result<()> {
        match self.horizon {
            Horizon::UnitInterval => Ok(()),
            Horizon::UnitStep => Err(Error::Horizon("operation requires a path on [0, 1]")),
        }
    }
}

/// Greatest convex minorant of a cumulative-sum diagram.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexMinorant {
    /// Grid indices where the minorant touches the diagram; starts at 0, ends at `n`.
    /// Collinear touching points are dropped, so consecutive segments have
    /// strictly increasing slopes.
    pub breakpoints: Vec<usize>,
    /// Left-hand slope on each unit step `(k-1, k]`, `k = 1..=n`.
    pub slopes: Vec<f64>,
}

impl ConvexMinorant {
    /// Minorant values at grid points `0..=n`, rebuilt from the slopes.
    pub fn values(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.slopes.len() + 1);
        out.push(0.0);
        let mut acc = 0.0;
        for s in &self.slopes {
            acc += s;
            out.push(acc);
        }
        out
    }
}

/// `S_0 = 0`, `S_k = S_{k-1} + z_k`, on the integer grid.
pub fn cumulative_sums(z: &RealSequence) -> WalkPath {
    let mut partial_sums = Vec::with_capacity(z.len() + 1);
    partial_sums.push(0.0);
    let mut acc = 0.0;
    for &x in z.iter() {
        acc += x;
        partial_sums.push(acc);
    }
    WalkPath {
        partial_sums,
        horizon: Horizon::UnitStep,
    }
}

/// Lower convex hull of the points `(k, S_k)` by a monotone-chain scan.
///
/// A point is discarded when it lies on or above the chord joining its
/// neighbours, so ties are removed exactly as pooling merges equal levels.
pub fn greatest_convex_minorant(path: &WalkPath) -> ConvexMinorant {
    let s = &path.partial_sums;
    let n = s.len() - 1;
    let mut hull: Vec<usize> = Vec::with_capacity(n + 1);
    for c in 0..=n {
        while hull.len() >= 2 {
            let b = hull[hull.len() - 1];
            let a = hull[hull.len() - 2];
            let left = (s[b] - s[a]) / (b - a) as f64;
            let right = (s[c] - s[b]) / (c - b) as f64;
            if left < right {
                break;
            }
            hull.pop();
        }
        hull.push(c);
    }
    let mut slopes = Vec::with_capacity(n);
    for w in hull.windows(2) {
        let slope = (s[w[1]] - s[w[0]]) / (w[1] - w[0]) as f64;
        slopes.extend(std::iter::repeat_n(slope, w[1] - w[0]));
    }
    ConvexMinorant {
        breakpoints: hull,
        slopes,
    }
}

/// `Z̄_k = S_k / k` for `k = 1..=n`.
pub fn running_averages(z: &RealSequence) -> RealSequence {
    let mut acc = 0.0;
    let averages = z
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            acc += x;
            acc / (i + 1) as f64
        })
        .collect();
    RealSequence::from_vec_unchecked(averages)
}

/// Non-decreasing rearrangement (order statistics).
pub fn sorted_copy(x: &RealSequence) -> RealSequence {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    RealSequence::from_vec_unchecked(v)
}

/// Largest index attaining `min_{0≤i≤n} S_i`.
pub fn last_argmin(path: &WalkPath) -> usize {
    let mut best = 0;
    for (i, &v) in path.partial_sums.iter().enumerate() {
        if v <= path.partial_sums[best] {
            best = i;
        }
    }
    best
}

/// Number of indices `1..=n` with `S_i <= 0`.
pub fn nonpositive_time(path: &WalkPath) -> usize {
    path.partial_sums[1..].iter().filter(|&&v| v <= 0.0).count()
}

/// Lebesgue measure of `{t ∈ [0,1] : S(t) <= t·x}` for the piecewise-linear path.
///
/// On each segment `S(t) - t·x` is linear, so its sub-level set is an interval
/// whose length is found from the crossing point.
pub fn occupation_cdf(path: &WalkPath, x: f64) -> Result<f64> {
    path.require_unit_interval()?;
    Ok(occupation_cdf_unchecked(path, x))
}

fn occupation_cdf_unchecked(path: &WalkPath, x: f64) -> f64 {
    let s = &path.partial_sums;
    let n = s.len() - 1;
    let dt = 1.0 / n as f64;
    let mut measure = 0.0;
    let mut h0 = 0.0; // S(0) - 0·x
    for (k, &sk) in s.iter().enumerate().skip(1) {
        let t1 = k as f64 * dt;
        let h1 = sk - t1 * x;
        measure += match (h0 <= 0.0, h1 <= 0.0) {
            (true, true) => dt,
            (false, false) => 0.0,
            (true, false) => dt * (-h0) / (h1 - h0),
            (false, true) => dt * h1 / (h1 - h0),
        };
        h0 = h1;
    }
    measure.clamp(0.0, 1.0)
}

/// Range of `S(t)/t` over `(0, 1]`. `S(t)/t` is monotone on every segment and
/// constant on the first one, so the extremes sit at grid points.
fn ratio_range(path: &WalkPath) -> (f64, f64) {
    let n = path.steps();
    (1..=n)
        .map(|k| path.partial_sums[k] * n as f64 / k as f64)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            (lo.min(r), hi.max(r))
        })
}

fn check_level(p: f64) -> Result<()> {
    if p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("level p = {p} must lie in (0, 1]")))
    }
}

/// Generalized inverse `inf{x : F(x) >= p}` of [`occupation_cdf`], by bisection
/// to [`QUANTILE_TOLERANCE`] in `x`.
pub fn occupation_quantile(path: &WalkPath, p: f64) -> Result<f64> {
    path.require_unit_interval()?;
    check_level(p)?;
    let (mut lo, mut hi) = ratio_range(path);
    // F(hi) = 1 >= p always.
    if occupation_cdf_unchecked(path, lo) >= p {
        return Ok(lo);
    }
    while hi - lo > QUANTILE_TOLERANCE {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        if occupation_cdf_unchecked(path, mid) >= p {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Left-hand slope at time `p` of the greatest convex minorant of a path on `[0, 1]`,
/// in units of the `[0, 1]` clock.
pub fn gcm_slope_at(path: &WalkPath, p: f64) -> Result<f64> {
    path.require_unit_interval()?;
    check_level(p)?;
    let minorant = greatest_convex_minorant(path);
    Ok(slope_from_minorant(&minorant, path.steps(), p))
}

/// Looks up the grid cell `((j-1)/n, j/n]` containing `p` and rescales the
/// per-step slope to unit time.
pub(crate) fn slope_from_minorant(minorant: &ConvexMinorant, n: usize, p: f64) -> f64 {
    let scaled = p * n as f64;
    // Absorb representation error such as (1/3)·3 = 1.0000000000000002.
    let cell = ((scaled - 1e-9 * scaled.max(1.0)).ceil() as usize).clamp(1, n);
    minorant.slopes[cell - 1] * n as f64
}
