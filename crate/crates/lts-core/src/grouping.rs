//! Feature-grid partitioning of the pool into diversity groups.
//!
//! The unlabeled pool is cut by an equal-width grid over the highest-variance
//! features. With label budget `budget` spread over `iterations` batches, the
//! grid uses the smallest bin count `c` per feature such that
//! `c^d * iterations >= budget`, so the number of cells is at least the
//! per-iteration batch size.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureSource, Pool};
use crate::error::{Error, Result};

/// Hard cap on grid cells so high-dimensional pools stay tractable.
pub const DEFAULT_MAX_GROUPS: usize = 4096;

/// Assignment of every pool instance to a grid group.
///
/// Group ids are dense, `0..group_count`, in lexicographic order of the
/// occupied bin tuples. Empty cells get no id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupPartition {
    /// `group_of[id]` is the group of instance `id`.
    pub group_of: Vec<usize>,
    /// Bins per grouped feature.
    pub bins_per_feature: usize,
    /// Features used for the grid, highest variance first.
    pub grouped_features: Vec<usize>,
    /// Number of non-empty groups.
    pub group_count: usize,
    /// Instance ids per group, ascending within each group.
    pub members: Vec<Vec<usize>>,
}

impl GroupPartition {
    /// Group sizes indexed by group id.
    pub fn sizes(&self) -> Vec<usize> {
        self.members.iter().map(Vec::len).collect()
    }
}

fn pow_at_least(c: u128, d: u32, target: u128) -> bool {
    // Overflow-safe c^d >= target.
    let mut acc: u128 = 1;
    for _ in 0..d {
        acc = match acc.checked_mul(c) {
            Some(v) => v,
            None => return true,
        };
        if acc >= target {
            return true;
        }
    }
    acc >= target
}

/// Smallest bin count `c >= 1` with `c^d_used * iterations >= budget`.
///
/// The float estimate `(budget/iterations)^(1/d_used)` can land on either
/// side of the true value, so the result is fixed up with exact integer
/// arithmetic.
pub fn bins_per_feature(budget: usize, iterations: usize, d_used: usize) -> Result<usize> {
    if iterations == 0 {
        return Err(Error::ZeroIterations);
    }
    if d_used == 0 {
        return Err(Error::ZeroDimensions);
    }
    let per_round = budget as f64 / iterations as f64;
    let mut c = per_round.powf(1.0 / d_used as f64).ceil().max(1.0) as u128;
    let target = budget as u128;
    let n = iterations as u128;
    let d = d_used as u32;
    while c > 1 && pow_at_least(c - 1, d, target.div_ceil(n)) {
        c -= 1;
    }
    while !pow_at_least(c, d, target.div_ceil(n)) {
        c += 1;
    }
    Ok(c as usize)
}

fn feature_variances(pool: &Pool) -> Vec<f64> {
    let d = pool.dim();
    let n = pool.len() as f64;
    let mut mean = vec![0.0f64; d];
    for inst in pool.instances() {
        for (m, &x) in mean.iter_mut().zip(&inst.features) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut var = vec![0.0f64; d];
    for inst in pool.instances() {
        for (j, &x) in inst.features.iter().enumerate() {
            let dx = x - mean[j];
            var[j] += dx * dx;
        }
    }
    for v in &mut var {
        *v /= n;
    }
    var
}

/// Partition a pool into grid groups sized for `budget` labels over
/// `iterations` batches.
///
/// Features are ranked by variance (ties to the lower index) and the grid
/// uses as many of the top features as fit under `max_groups` cells; when
/// even a single feature exceeds the cap, the bin count is clamped to
/// `max_groups`.
pub fn partition_groups(
    pool: &Pool,
    budget: usize,
    iterations: usize,
    max_groups: usize,
) -> Result<GroupPartition> {
    if pool.is_empty() {
        return Err(Error::EmptyDataset("cannot group an empty pool".into()));
    }
    let d = pool.dim();
    let variances = feature_variances(pool);
    let mut ranked: Vec<usize> = (0..d).collect();
    ranked.sort_by(|&a, &b| {
        variances[b]
            .partial_cmp(&variances[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });

    let fits_cap = |c: usize, d_used: usize| -> bool {
        let mut acc: u128 = 1;
        for _ in 0..d_used {
            acc = match acc.checked_mul(c as u128) {
                Some(v) => v,
                None => return false,
            };
            if acc > max_groups as u128 {
                return false;
            }
        }
        true
    };
    let mut chosen_d = 1;
    let mut bins = bins_per_feature(budget, iterations, 1)?.min(max_groups.max(1));
    for d_used in (1..=d).rev() {
        let c = bins_per_feature(budget, iterations, d_used)?;
        if fits_cap(c, d_used) {
            chosen_d = d_used;
            bins = c;
            break;
        }
    }
    let grouped_features: Vec<usize> = ranked[..chosen_d].to_vec();

    // Observed ranges over the whole pool; constant features collapse to one
    // bin.
    let mut lo = vec![f64::INFINITY; chosen_d];
    let mut hi = vec![f64::NEG_INFINITY; chosen_d];
    for inst in pool.instances() {
        for (k, &f) in grouped_features.iter().enumerate() {
            let x = inst.features[f];
            lo[k] = lo[k].min(x);
            hi[k] = hi[k].max(x);
        }
    }

    let bin_of = |x: f64, lo: f64, hi: f64| -> usize {
        if hi <= lo {
            return 0;
        }
        let t = (x - lo) / (hi - lo);
        ((t * bins as f64) as usize).min(bins - 1)
    };

    let mut cells: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
    for inst in pool.instances() {
        let tuple: Vec<usize> = grouped_features
            .iter()
            .enumerate()
            .map(|(k, &f)| bin_of(inst.features[f], lo[k], hi[k]))
            .collect();
        cells.entry(tuple).or_default().push(inst.id);
    }

    let mut group_of = vec![0usize; pool.len()];
    let mut members = Vec::with_capacity(cells.len());
    for (gid, (_, ids)) in cells.into_iter().enumerate() {
        for &id in &ids {
            group_of[id] = gid;
        }
        members.push(ids);
    }
    let group_count = members.len();
    Ok(GroupPartition {
        group_of,
        bins_per_feature: bins,
        grouped_features,
        group_count,
        members,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bin_count_matches_batch_size_bound() {
        // 600 labels over 20 batches of 30 in 4 dimensions: 2^4 = 16 < 30
        // but 3^4 = 81 >= 30.
        assert_eq!(bins_per_feature(600, 20, 4).unwrap(), 3);
        assert_eq!(bins_per_feature(100, 20, 2).unwrap(), 3);
        assert_eq!(bins_per_feature(2000, 20, 2).unwrap(), 10);
        assert_eq!(bins_per_feature(2001, 20, 2).unwrap(), 11);
        // Budget below one label per batch still yields a single bin.
        assert_eq!(bins_per_feature(10, 20, 3).unwrap(), 1);
    }

    #[test]
    fn bin_count_is_minimal_against_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..500 {
            let budget = rng.random_range(1..5000usize);
            let iterations = rng.random_range(1..60usize);
            let d = rng.random_range(1..6usize);
            let c = bins_per_feature(budget, iterations, d).unwrap();
            let per_round = budget.div_ceil(iterations) as u128;
            let pow = |c: u128| -> u128 { (0..d).fold(1u128, |acc, _| acc * c) };
            assert!(pow(c as u128) >= per_round, "c too small: {c}");
            if c > 1 {
                assert!(pow(c as u128 - 1) < per_round, "c not minimal: {c}");
            }
        }
    }

    #[test]
    fn bin_count_ignores_float_roundoff() {
        // Exact cubes and squares must not be bumped up by powf noise.
        for c in 2..40usize {
            let budget = c * c * 20;
            assert_eq!(bins_per_feature(budget, 20, 2).unwrap(), c);
        }
        for c in 2..20usize {
            let budget = c * c * c * 10;
            assert_eq!(bins_per_feature(budget, 10, 3).unwrap(), c);
        }
    }

    fn grid_pool() -> Pool {
        // 3x3 grid of exact points in 2d, 10 per cell, so both features have
        // identical variance and the tie resolves to feature order [0, 1].
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for i in 0..3 {
            for j in 0..3 {
                for _ in 0..10 {
                    features.push(vec![i as f64 * 10.0, j as f64 * 10.0]);
                    labels.push(((i + j) % 2) as u32);
                }
            }
        }
        Pool::new(features, labels, vec!["a".into(), "b".into()]).unwrap()
    }

    #[test]
    fn partition_covers_every_instance_exactly_once() {
        let pool = grid_pool();
        // 90 labels over 10 batches of 9 in 2d: c = 3, up to 9 cells.
        let part = partition_groups(&pool, 90, 10, DEFAULT_MAX_GROUPS).unwrap();
        assert_eq!(part.bins_per_feature, 3);
        assert_eq!(part.group_count, 9);
        assert_eq!(part.sizes(), vec![10; 9]);
        let mut seen = vec![false; pool.len()];
        for (gid, ids) in part.members.iter().enumerate() {
            let mut prev = None;
            for &id in ids {
                assert_eq!(part.group_of[id], gid);
                assert!(!seen[id]);
                seen[id] = true;
                if let Some(p) = prev {
                    assert!(id > p, "members must stay ascending");
                }
                prev = Some(id);
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn group_ids_are_dense_and_lexicographic() {
        let pool = grid_pool();
        let part = partition_groups(&pool, 90, 10, DEFAULT_MAX_GROUPS).unwrap();
        // Cluster order in grid_pool is (0,0),(0,1),(0,2),(1,0)... which is
        // already lexicographic in bin tuples, so group ids follow cluster
        // order: instance 0 sits in group 0, instance 89 in group 8.
        assert_eq!(part.group_of[0], 0);
        assert_eq!(part.group_of[15], 1);
        assert_eq!(part.group_of[89], 8);
    }

    #[test]
    fn max_value_lands_in_last_bin() {
        let features = vec![vec![0.0], vec![2.5], vec![5.0], vec![10.0]];
        let labels = vec![0, 0, 1, 1];
        let pool = Pool::new(features, labels, vec!["a".into(), "b".into()]).unwrap();
        // budget 4 over 1 batch in 1d: c = 4, bins [0,2.5),[2.5,5),[5,7.5),[7.5,10].
        let part = partition_groups(&pool, 4, 1, DEFAULT_MAX_GROUPS).unwrap();
        assert_eq!(part.bins_per_feature, 4);
        assert_eq!(part.group_of[3], part.group_count - 1);
    }

    #[test]
    fn constant_feature_collapses_to_one_group() {
        let features = vec![vec![1.0], vec![1.0], vec![1.0], vec![1.0]];
        let labels = vec![0, 1, 0, 1];
        let pool = Pool::new(features, labels, vec!["a".into(), "b".into()]).unwrap();
        let part = partition_groups(&pool, 8, 2, DEFAULT_MAX_GROUPS).unwrap();
        assert_eq!(part.group_count, 1);
        assert_eq!(part.members[0], vec![0, 1, 2, 3]);
    }

    #[test]
    fn group_cap_drops_features_before_clamping_bins() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let features: Vec<Vec<f64>> = (0..200)
            .map(|_| (0..3).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect();
        let labels: Vec<u32> = (0..200).map(|i| (i % 2) as u32).collect();
        let pool = Pool::new(features, labels, vec!["a".into(), "b".into()]).unwrap();
        // One batch of 100_000 wants c = 47 in 3d (103,823 cells), far over a
        // cap of 1000; 2d wants c = 317 (100,489 cells), still over; 1d wants
        // c = 100_000 which the cap clamps.
        let part = partition_groups(&pool, 100_000, 1, 1000).unwrap();
        assert_eq!(part.grouped_features.len(), 1);
        assert_eq!(part.bins_per_feature, 1000);
        // 2d fits once the cap allows it: c = 317 needs 100,489 cells.
        let part2 = partition_groups(&pool, 100_000, 1, 101_000).unwrap();
        assert_eq!(part2.grouped_features.len(), 2);
        assert_eq!(part2.bins_per_feature, 317);
    }

    #[test]
    fn features_are_ranked_by_variance() {
        // Feature 1 spreads wide, feature 0 barely moves; with the cell cap
        // forcing a 1d grid, feature 1 must be the one kept.
        let features: Vec<Vec<f64>> = (0..50).map(|i| vec![0.001 * i as f64, i as f64]).collect();
        let labels: Vec<u32> = (0..50).map(|i| (i % 2) as u32).collect();
        let pool = Pool::new(features, labels, vec!["a".into(), "b".into()]).unwrap();
        let part = partition_groups(&pool, 4, 1, 3).unwrap();
        assert_eq!(part.grouped_features, vec![1]);
        assert_eq!(part.bins_per_feature, 3);
    }
}
