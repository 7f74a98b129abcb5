//! Seeded spring geometries.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use anyhow::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wfp_core::SpringSet;

use crate::config::SpringSpec;
use crate::Invalid;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform draw from `[lo, hi)`, or `lo` when the range is a point.
pub fn uniform(rng: &mut impl Rng, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.random_range(r[0]..r[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Key(f64);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Uniform positions in `interval`, drawn in order and rejected when closer
/// than `min_separation` to one already accepted.
pub fn random_positions(
    rng: &mut impl Rng,
    count: usize,
    interval: [f64; 2],
    min_separation: f64,
) -> Result<Vec<f64>> {
    let span = interval[1] - interval[0];
    if !(span > 0.0) && count > 1 {
        return Err(Invalid(format!("empty interval {interval:?} for {count} springs")).into());
    }
    if count > 1 && (count - 1) as f64 * min_separation >= span {
        return Err(Invalid(format!(
            "{count} springs cannot be {min_separation} apart inside {interval:?}"
        ))
        .into());
    }
    let mut taken = BTreeSet::new();
    let mut out = Vec::with_capacity(count);
    let budget = 1000 * count + 10_000;
    let mut tries = 0;
    while out.len() < count {
        tries += 1;
        if tries > budget {
            return Err(Invalid(format!(
                "placed only {} of {count} springs at separation {min_separation}",
                out.len()
            ))
            .into());
        }
        let x = uniform(rng, interval);
        let clash = taken
            .range(Key(x - min_separation)..=Key(x + min_separation))
            .any(|k: &Key| (k.0 - x).abs() < min_separation);
        if !clash {
            taken.insert(Key(x));
            out.push(x);
        }
    }
    Ok(out)
}

pub fn build_springs(spec: &SpringSpec, rng: &mut impl Rng) -> Result<SpringSet> {
    Ok(match spec {
        SpringSpec::Explicit {
            positions,
            strengths,
        } => SpringSet::new(positions.clone(), strengths.clone())?,
        SpringSpec::Random {
            count,
            interval,
            min_separation,
            beta_range,
        } => {
            let xs = random_positions(rng, *count, *interval, *min_separation)?;
            let bs = (0..*count).map(|_| uniform(rng, *beta_range)).collect();
            SpringSet::new(xs, bs)?
        }
        SpringSpec::Equispaced {
            count,
            interval,
            beta,
        } => {
            let xs = if *count == 1 {
                vec![0.5 * (interval[0] + interval[1])]
            } else {
                wfp_core::field::linspace(interval[0], interval[1], *count)
            };
            SpringSet::new(xs, vec![*beta; *count])?
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separation_is_enforced() {
        let mut r = rng(5);
        let xs = random_positions(&mut r, 400, [-1.0, 1.0], 2e-3).unwrap();
        let mut s = xs.clone();
        s.sort_by(f64::total_cmp);
        assert!(s.windows(2).all(|w| w[1] - w[0] >= 2e-3));
        assert!(xs.iter().all(|&x| (-1.0..1.0).contains(&x)));
    }

    #[test]
    fn same_seed_same_geometry() {
        let spec = SpringSpec::Random {
            count: 50,
            interval: [-2.0, 2.0],
            min_separation: 1e-4,
            beta_range: [0.1, 3.0],
        };
        let a = build_springs(&spec, &mut rng(9)).unwrap();
        let b = build_springs(&spec, &mut rng(9)).unwrap();
        let c = build_springs(&spec, &mut rng(10)).unwrap();
        assert_eq!(a.positions(), b.positions());
        assert_eq!(a.strengths(), b.strengths());
        assert_ne!(a.positions(), c.positions());
    }

    #[test]
    fn impossible_packing_is_a_validation_error() {
        let e = random_positions(&mut rng(0), 11, [0.0, 1.0], 0.1).unwrap_err();
        assert!(e.downcast_ref::<Invalid>().is_some());
    }

    #[test]
    fn equispaced_and_single() {
        let s = build_springs(
            &SpringSpec::Equispaced {
                count: 3,
                interval: [-1.0, 1.0],
                beta: 2.0,
            },
            &mut rng(0),
        )
        .unwrap();
        assert_eq!(s.positions(), &[-1.0, 0.0, 1.0]);
        let one = build_springs(
            &SpringSpec::Equispaced {
                count: 1,
                interval: [0.0, 1.0],
                beta: 2.0,
            },
            &mut rng(0),
        )
        .unwrap();
        assert_eq!(one.positions(), &[0.5]);
    }
}
