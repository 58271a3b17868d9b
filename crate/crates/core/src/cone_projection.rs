//! Euclidean projection onto the monotone cone `{θ : θ₁ ≤ … ≤ θₙ}` and onto its
//! non-negative part.
//!
//! [`project_monotone`] is the production path (pool adjacent violators, linear
//! time). [`project_monotone_minmax`] and [`project_monotone_bruteforce`] are
//! slow, structurally unrelated routes kept as oracles for it.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::numerics::CompensatedSum;
use crate::sequence::RealSequence;

/// Largest input accepted by [`project_monotone_bruteforce`].
pub const BRUTEFORCE_MAX_LEN: usize = 20;

/// A maximal run of equal fitted values.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    /// Zero-based, half-open index range into the input.
    pub range: Range<usize>,
    /// Mean of the input over `range`.
    pub level: f64,
}

impl Block {
    pub fn len(&self) -> usize {
        self.range.len()
    }

    pub fn is_empty(&self) -> bool {
        self.range.is_empty()
    }
}

/// Result of projecting onto the monotone cone.
///
/// `blocks` is the finest partition on which `fitted` is constant: levels
/// strictly increase from one block to the next.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneFit {
    pub fitted: RealSequence,
    pub blocks: Vec<Block>,
}

impl MonotoneFit {
    /// Exclusive end index of every block, i.e. the touching points of the
    /// greatest convex minorant other than the origin.
    pub fn block_ends(&self) -> impl Iterator<Item = usize> + '_ {
        self.blocks.iter().map(|b| b.range.end)
    }
}

struct PoolBlock {
    start: usize,
    len: usize,
    total: CompensatedSum,
    level: f64,
}

/// Projects `y` onto the monotone cone with the pool adjacent violators algorithm.
///
/// Blocks are kept on a stack; the newest block is merged into its predecessor
/// while the predecessor's level is `>=` its own, so equal levels always pool.
pub fn project_monotone(y: &RealSequence) -> MonotoneFit {
    let mut stack: Vec<PoolBlock> = Vec::with_capacity(y.len());
    for (i, &value) in y.iter().enumerate() {
        let mut total = CompensatedSum::new();
        total.add(value);
        let mut block = PoolBlock {
            start: i,
            len: 1,
            total,
            level: value,
        };
        while let Some(prev) = stack.last() {
            if prev.level < block.level {
                break;
            }
            let mut prev = stack.pop().expect("non-empty stack");
            prev.total.merge(&block.total);
            prev.len += block.len;
            prev.level = prev.total.mean_of(prev.len as f64);
            block = prev;
        }
        stack.push(block);
    }

    let mut fitted = Vec::with_capacity(y.len());
    let blocks = stack
        .into_iter()
        .map(|b| {
            fitted.extend(std::iter::repeat_n(b.level, b.len));
            Block {
                range: b.start..b.start + b.len,
                level: b.level,
            }
        })
        .collect();
    MonotoneFit {
        fitted: RealSequence::from_vec_unchecked(fitted),
        blocks,
    }
}

/// Evaluates the min–max slope formula
/// `Δ_k = min_{k≤v≤n} max_{0≤u<k} (S_v − S_u)/(v − u)` directly, in `O(n³)` time.
pub fn project_monotone_minmax(z: &RealSequence) -> RealSequence {
    let n = z.len();
    let mut partial = Vec::with_capacity(n + 1);
    partial.push(0.0);
    let mut acc = 0.0;
    for &x in z.iter() {
        acc += x;
        partial.push(acc);
    }
    let slopes = (1..=n)
        .map(|k| {
            (k..=n)
                .map(|v| {
                    (0..k)
                        .map(|u| (partial[v] - partial[u]) / (v - u) as f64)
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    RealSequence::from_vec_unchecked(slopes)
}

/// Exhaustive search over all `2^(n-1)` contiguous block partitions: each block
/// is fitted by its mean, partitions whose block means decrease are discarded,
/// and the feasible candidate nearest to `z` wins.
pub fn project_monotone_bruteforce(z: &RealSequence) -> Result<RealSequence> {
    let n = z.len();
    if n > BRUTEFORCE_MAX_LEN {
        return Err(Error::TooLarge {
            operation: "project_monotone_bruteforce",
            n,
            max: BRUTEFORCE_MAX_LEN,
        });
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    // Bit i of `cuts` set means a block boundary between positions i and i+1.
    for cuts in 0u32..(1u32 << (n - 1)) {
        let mut candidate = Vec::with_capacity(n);
        let mut feasible = true;
        let mut start = 0;
        let mut last_level = f64::NEG_INFINITY;
        for end in 1..=n {
            if end < n && cuts & (1 << (end - 1)) == 0 {
                continue;
            }
            let level = z[start..end].iter().sum::<f64>() / (end - start) as f64;
            if level < last_level {
                feasible = false;
                break;
            }
            candidate.extend(std::iter::repeat_n(level, end - start));
            last_level = level;
            start = end;
        }
        if !feasible {
            continue;
        }
        let distance: f64 = z
            .iter()
            .zip(&candidate)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        if best.as_ref().is_none_or(|(d, _)| distance < *d) {
            best = Some((distance, candidate));
        }
    }
    // The all-singletons partition is feasible only for monotone input, but the
    // single-block partition is always feasible, so `best` is set.
    let (_, fitted) = best.expect("single-block partition is always feasible");
    Ok(RealSequence::from_vec_unchecked(fitted))
}

/// Projection onto the non-negative monotone cone: the positive part of the
/// monotone projection.
pub fn project_nonneg_monotone(z: &RealSequence) -> RealSequence {
    let fit = project_monotone(z);
    let clipped = fit.fitted.iter().map(|&v| v.max(0.0)).collect();
    RealSequence::from_vec_unchecked(clipped)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(v: &[f64]) -> RealSequence {
        RealSequence::try_from(v).unwrap()
    }

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (i, (x, y)) in a.iter().zip(b).enumerate() {
            assert!((x - y).abs() <= tol, "index {i}: {x} vs {y}");
        }
    }

    #[test]
    fn monotone_input_is_fixed() {
        let fit = project_monotone(&seq(&[1.0, 2.0, 3.0]));
        assert_eq!(fit.fitted.as_slice(), &[1.0, 2.0, 3.0]);
        assert_eq!(
            fit.blocks,
            vec![
                Block {
                    range: 0..1,
                    level: 1.0
                },
                Block {
                    range: 1..2,
                    level: 2.0
                },
                Block {
                    range: 2..3,
                    level: 3.0
                },
            ]
        );
    }

    #[test]
    fn two_point_violation_pools() {
        let fit = project_monotone(&seq(&[2.0, 1.0]));
        assert_eq!(fit.fitted.as_slice(), &[1.5, 1.5]);
        assert_eq!(fit.blocks.len(), 1);
    }

    #[test]
    fn three_one_two_pools_to_two() {
        let z = seq(&[3.0, 1.0, 2.0]);
        assert_eq!(project_monotone(&z).fitted.as_slice(), &[2.0, 2.0, 2.0]);
        assert_eq!(project_monotone_minmax(&z).as_slice(), &[2.0, 2.0, 2.0]);
        assert_eq!(
            project_monotone_bruteforce(&z).unwrap().as_slice(),
            &[2.0, 2.0, 2.0]
        );
    }

    #[test]
    fn minmax_on_mixed_signs() {
        let z = seq(&[1.0, -2.0, 1.0]);
        assert_close(&project_monotone_minmax(&z), &[-0.5, -0.5, 1.0], 1e-15);
        assert_close(
            &project_monotone_bruteforce(&z).unwrap(),
            &[-0.5, -0.5, 1.0],
            1e-15,
        );
        let fit = project_monotone(&z);
        assert_eq!(fit.block_ends().collect::<Vec<_>>(), vec![2, 3]);
    }

    #[test]
    fn minmax_fixes_monotone_input() {
        let z = seq(&[-1.0, 0.25, 0.25, 4.0]);
        assert_close(&project_monotone_minmax(&z), &z, 1e-15);
    }

    #[test]
    fn equal_levels_merge_into_one_block() {
        let fit = project_monotone(&seq(&[1.0, 1.0, 0.0, 2.0, 2.0]));
        // [1,1,0] pools to 2/3; the trailing 2s tie and merge.
        assert_eq!(fit.blocks.len(), 2);
        assert_eq!(fit.blocks[1].range, 3..5);
        let tied = project_monotone(&seq(&[0.5, 0.5, 0.5]));
        assert_eq!(tied.blocks.len(), 1);
        assert_eq!(tied.fitted.as_slice(), &[0.5, 0.5, 0.5]);
    }

    #[test]
    fn singleton_is_identity() {
        let z = seq(&[0.0]);
        assert_eq!(project_monotone(&z).fitted.as_slice(), &[0.0]);
        assert_eq!(project_monotone_minmax(&z).as_slice(), &[0.0]);
        assert_eq!(project_monotone_bruteforce(&z).unwrap().as_slice(), &[0.0]);
        assert_eq!(project_nonneg_monotone(&seq(&[-4.0])).as_slice(), &[0.0]);
    }

    #[test]
    fn bruteforce_rejects_long_input() {
        let z = RealSequence::new(vec![0.0; 21]).unwrap();
        assert!(matches!(
            project_monotone_bruteforce(&z),
            Err(Error::TooLarge { n: 21, max: 20, .. })
        ));
        let z = RealSequence::new(vec![0.0; 20]).unwrap();
        assert!(project_monotone_bruteforce(&z).is_ok());
    }

    #[test]
    fn nonneg_projection_examples() {
        assert_eq!(
            project_nonneg_monotone(&seq(&[-2.0, 1.0])).as_slice(),
            &[0.0, 1.0]
        );
        assert_eq!(
            project_nonneg_monotone(&seq(&[3.0, 1.0, 2.0])).as_slice(),
            &[2.0, 2.0, 2.0]
        );
        assert_eq!(
            project_nonneg_monotone(&seq(&[-3.0, -1.0, -2.0])).as_slice(),
            &[0.0, 0.0, 0.0]
        );
    }

    #[test]
    fn levels_strictly_increase_and_reproduce_fit() {
        let z = seq(&[0.3, -1.2, 2.2, 0.1, 0.1, 5.0, -0.7, 3.3]);
        let fit = project_monotone(&z);
        assert!(fit.blocks.windows(2).all(|w| w[0].level < w[1].level));
        let rebuilt: Vec<f64> = fit
            .blocks
            .iter()
            .flat_map(|b| std::iter::repeat_n(b.level, b.len()))
            .collect();
        assert_eq!(rebuilt.as_slice(), fit.fitted.as_slice());
        assert_eq!(fit.blocks.first().unwrap().range.start, 0);
        assert!(fit
            .blocks
            .windows(2)
            .all(|w| w[0].range.end == w[1].range.start));
        assert_eq!(fit.blocks.last().unwrap().range.end, z.len());
    }
}
