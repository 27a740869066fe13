//! Shared fixtures for the criterion benchmarks in `benches/`.

use lts_core::{gen_synthetic, ClusterSpec, Pool};

/// Two moderately overlapping Gaussian classes, deterministic.
pub fn benchmark_pool(per_class: usize) -> Pool {
    let clusters = vec![
        ClusterSpec {
            mean: vec![-1.0, 0.5, 0.0],
            stddev: 1.0,
            class: "a".into(),
            count: per_class,
        },
        ClusterSpec {
            mean: vec![1.0, -0.5, 0.5],
            stddev: 1.0,
            class: "b".into(),
            count: per_class,
        },
    ];
    gen_synthetic(&clusters, 42).expect("benchmark pool")
}

/// The first `n` ids labeled with their true classes.
pub fn labeled_prefix(pool: &Pool, n: usize) -> Vec<(usize, u32)> {
    (0..n).map(|id| (id, pool.truth_label(id))).collect()
}
