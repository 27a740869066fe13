//! Instance pools, the simulated oracle, CSV ingestion, synthetic pool
//! generation and train/test splitting.
//!
//! A [`Pool`] owns the full instance set together with a ground-truth
//! [`Oracle`]. Label queries go through [`Pool::query_label`], which moves an
//! instance from the unlabeled to the labeled partition and charges one unit
//! of label budget the first time an id is queried. Evaluation code reads
//! the truth directly via [`Pool::truth_label`] without touching the budget.

use std::collections::BTreeSet;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Anything that can hand out a feature vector for an instance id.
///
/// Implemented by [`Pool`] and by [`FeatureMatrix`] so tree fitting and
/// regressor scoring work on either a full pool or a bare matrix.
pub trait FeatureSource {
    fn dim(&self) -> usize;
    fn features(&self, id: usize) -> &[f64];
}

/// A plain feature matrix keyed by row index.
#[derive(Debug, Clone)]
pub struct FeatureMatrix(pub Vec<Vec<f64>>);

impl FeatureSource for FeatureMatrix {
    fn dim(&self) -> usize {
        self.0.first().map_or(0, Vec::len)
    }

    fn features(&self, id: usize) -> &[f64] {
        &self.0[id]
    }
}

/// One instance of the pool: a dense id plus its feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub id: usize,
    pub features: Vec<f64>,
}

/// Ground-truth label store. Total over the id space of its pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Oracle {
    labels: Vec<u32>,
    class_count: usize,
}

impl Oracle {
    pub fn new(labels: Vec<u32>, class_count: usize) -> Self {
        debug_assert!(labels.iter().all(|&l| (l as usize) < class_count));
        Oracle {
            labels,
            class_count,
        }
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn label(&self, id: usize) -> u32 {
        self.labels[id]
    }

    /// Instance count per class over the whole id space.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.class_count];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }
}

/// The full instance set with label-budget bookkeeping.
///
/// `labeled` and `unlabeled` always partition the id space; `consumed_budget`
/// equals the number of distinct oracle queries made so far.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pool {
    instances: Vec<Instance>,
    oracle: Oracle,
    class_names: Vec<String>,
    labeled: BTreeSet<usize>,
    unlabeled: BTreeSet<usize>,
    consumed_budget: usize,
}

impl Pool {
    /// Build a pool from dense rows. `class_names[label]` records the mapping
    /// from label id back to the original class token.
    pub fn new(
        features: Vec<Vec<f64>>,
        labels: Vec<u32>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::EmptyDataset("no instances".into()));
        }
        if class_names.len() < 2 {
            return Err(Error::SingleClass(
                class_names.first().cloned().unwrap_or_default(),
            ));
        }
        let dim = features[0].len();
        if dim == 0 {
            return Err(Error::ZeroDimensions);
        }
        let instances: Vec<Instance> = features
            .into_iter()
            .enumerate()
            .map(|(id, features)| Instance { id, features })
            .collect();
        for inst in &instances {
            if inst.features.len() != dim {
                return Err(Error::DimensionMismatch {
                    id: inst.id,
                    expected: dim,
                    got: inst.features.len(),
                });
            }
        }
        let unlabeled: BTreeSet<usize> = (0..instances.len()).collect();
        let class_count = class_names.len();
        Ok(Pool {
            instances,
            oracle: Oracle::new(labels, class_count),
            class_names,
            labeled: BTreeSet::new(),
            unlabeled,
            consumed_budget: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn class_count(&self) -> usize {
        self.oracle.class_count()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn labeled_ids(&self) -> &BTreeSet<usize> {
        &self.labeled
    }

    pub fn unlabeled_ids(&self) -> &BTreeSet<usize> {
        &self.unlabeled
    }

    pub fn consumed_budget(&self) -> usize {
        self.consumed_budget
    }

    /// Query the oracle for an instance label. The first query of an id
    /// consumes one unit of budget and moves it into the labeled partition;
    /// repeat queries are free.
    pub fn query_label(&mut self, id: usize) -> Result<u32> {
        if id >= self.instances.len() {
            return Err(Error::UnknownInstance(id));
        }
        if self.unlabeled.remove(&id) {
            self.labeled.insert(id);
            self.consumed_budget += 1;
        }
        Ok(self.oracle.label(id))
    }

    /// Ground-truth label for evaluation only; does not touch the budget.
    pub fn truth_label(&self, id: usize) -> u32 {
        self.oracle.label(id)
    }

    /// Instance count per class over the whole pool.
    pub fn class_counts(&self) -> Vec<usize> {
        self.oracle.class_counts()
    }

    /// The class with the fewest instances (ties go to the lower class id).
    /// Used as the positive class for f-measure reporting.
    pub fn minority_class(&self) -> u32 {
        let counts = self.oracle.class_counts();
        let mut best = 0usize;
        for (c, &n) in counts.iter().enumerate() {
            if n < counts[best] {
                best = c;
            }
        }
        best as u32
    }

    /// A copy with all label bookkeeping cleared, ready for a fresh run.
    pub fn fresh_copy(&self) -> Pool {
        let mut pool = self.clone();
        pool.unlabeled = (0..pool.instances.len()).collect();
        pool.labeled.clear();
        pool.consumed_budget = 0;
        pool
    }

    /// New pool holding only the given ids, re-indexed densely in the given
    /// order. Label bookkeeping starts fresh.
    pub fn subset(&self, ids: &[usize]) -> Result<Pool> {
        let features: Vec<Vec<f64>> = ids
            .iter()
            .map(|&id| self.instances[id].features.clone())
            .collect();
        let labels: Vec<u32> = ids.iter().map(|&id| self.oracle.label(id)).collect();
        Pool::new(features, labels, self.class_names.clone())
    }
}

impl FeatureSource for Pool {
    fn dim(&self) -> usize {
        self.instances.first().map_or(0, |i| i.features.len())
    }

    fn features(&self, id: usize) -> &[f64] {
        &self.instances[id].features
    }
}

/// One isotropic Gaussian cluster of a synthetic pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterSpec {
    pub mean: Vec<f64>,
    pub stddev: f64,
    pub class: String,
    pub count: usize,
}

/// Generate a synthetic pool of isotropic Gaussian clusters.
///
/// Instances appear in cluster order with dense ids; the draw sequence is a
/// pure function of the seed. Class ids follow first appearance of the class
/// token in the cluster list.
pub fn gen_synthetic(clusters: &[ClusterSpec], rng_seed: u64) -> Result<Pool> {
    if clusters.is_empty() {
        return Err(Error::EmptyDataset("no clusters".into()));
    }
    let dim = clusters[0].mean.len();
    if dim == 0 {
        return Err(Error::ZeroDimensions);
    }
    let mut class_names: Vec<String> = Vec::new();
    for cluster in clusters {
        if cluster.count == 0 {
            return Err(Error::EmptyCluster(cluster.class.clone()));
        }
        if cluster.mean.len() != dim {
            return Err(Error::DimensionMismatch {
                id: 0,
                expected: dim,
                got: cluster.mean.len(),
            });
        }
        if !class_names.contains(&cluster.class) {
            class_names.push(cluster.class.clone());
        }
    }
    if class_names.len() < 2 {
        return Err(Error::SingleClass(class_names[0].clone()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let standard = Normal::new(0.0, 1.0).expect("unit normal");
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for cluster in clusters {
        let label = class_names
            .iter()
            .position(|c| c == &cluster.class)
            .unwrap() as u32;
        for _ in 0..cluster.count {
            let row: Vec<f64> = cluster
                .mean
                .iter()
                .map(|&m| m + cluster.stddev * standard.sample(&mut rng))
                .collect();
            features.push(row);
            labels.push(label);
        }
    }
    Pool::new(features, labels, class_names)
}

/// Load a pool from a headered CSV file. Every non-label column listed in
/// `schema` (or all of them when `schema` is `None`) must parse as a real
/// number; the label column is categorical and mapped to `0..C-1` by first
/// appearance.
pub fn load_csv(
    path: impl AsRef<Path>,
    label_column: &str,
    schema: Option<&[String]>,
) -> Result<Pool> {
    let mut reader = csv::Reader::from_path(path.as_ref())?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::MissingColumn(label_column.to_string()))?;

    let feature_cols: Vec<usize> = match schema {
        Some(names) => names
            .iter()
            .map(|name| {
                headers
                    .iter()
                    .position(|h| h == name)
                    .ok_or_else(|| Error::MissingColumn(name.clone()))
            })
            .collect::<Result<_>>()?,
        None => (0..headers.len()).filter(|&i| i != label_idx).collect(),
    };
    if feature_cols.is_empty() {
        return Err(Error::ZeroDimensions);
    }

    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut class_names: Vec<String> = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        let mut row = Vec::with_capacity(feature_cols.len());
        for &col in &feature_cols {
            let cell = record.get(col).unwrap_or("");
            let value: f64 = cell.trim().parse().map_err(|_| Error::CsvParse {
                row: row_idx + 1,
                column: headers[col].clone(),
                value: cell.to_string(),
            })?;
            row.push(value);
        }
        let class = record.get(label_idx).unwrap_or("").trim().to_string();
        let label = match class_names.iter().position(|c| c == &class) {
            Some(i) => i as u32,
            None => {
                class_names.push(class);
                (class_names.len() - 1) as u32
            }
        };
        features.push(row);
        labels.push(label);
    }
    if features.is_empty() {
        return Err(Error::EmptyDataset("csv file has no data rows".into()));
    }
    if class_names.len() < 2 {
        return Err(Error::SingleClass(class_names[0].clone()));
    }
    Pool::new(features, labels, class_names)
}

/// Holdout split parameters. The same seed on the same pool always produces
/// the same partition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    pub test_fraction: f64,
    pub rng_seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            test_fraction: 0.3,
            rng_seed: 0,
        }
    }
}

/// Result of a stratified holdout split. `train` is a fresh pool re-indexed
/// densely; `train_source_ids[i]` is the original id of train instance `i`,
/// and `test_ids` index the original pool.
#[derive(Debug, Clone)]
pub struct TrainTestSplit {
    pub train: Pool,
    pub train_source_ids: Vec<usize>,
    pub test_ids: Vec<usize>,
}

/// Stratified holdout split: per class, `round(count * test_fraction)`
/// instances go to the test side.
pub fn split_train_test(pool: &Pool, config: &SplitConfig) -> Result<TrainTestSplit> {
    if !(config.test_fraction > 0.0 && config.test_fraction < 1.0) {
        return Err(Error::InvalidTestFraction(config.test_fraction));
    }
    if pool.is_empty() {
        return Err(Error::EmptyDataset("cannot split an empty pool".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); pool.class_count()];
    for inst in pool.instances() {
        per_class[pool.truth_label(inst.id) as usize].push(inst.id);
    }

    let mut test_ids = Vec::new();
    let mut train_source_ids = Vec::new();
    for ids in per_class.iter_mut() {
        use rand::seq::SliceRandom;
        ids.shuffle(&mut rng);
        let n_test = ((ids.len() as f64) * config.test_fraction).round() as usize;
        let n_test = n_test.min(ids.len());
        test_ids.extend_from_slice(&ids[..n_test]);
        train_source_ids.extend_from_slice(&ids[n_test..]);
    }
    test_ids.sort_unstable();
    train_source_ids.sort_unstable();
    if train_source_ids.is_empty() {
        return Err(Error::EmptyTrainSplit);
    }

    let train = pool.subset(&train_source_ids)?;
    Ok(TrainTestSplit {
        train,
        train_source_ids,
        test_ids,
    })
}
