//! Batch schedules, seed selection, the weighted uncertainty set and its
//! regressor, and greedy diversity-aware sample selection.
//!
//! Selection maximizes `sum(score_i) + alpha * sum_j sqrt(c_j)` over batches
//! of fixed size, where `c_j` counts picks in group `j`. The group term is
//! concave per group, so picking the best marginal gain one sample at a time
//! is exactly optimal.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::FeatureSource;
use crate::error::{Error, Result};
use crate::gboost::UncertaintyLabels;
use crate::grouping::GroupPartition;
use crate::tree::{fit_regression_tree, RegTree, TreeRegularization};

/// How the total label budget is spread across iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleMode {
    /// Every batch gets `floor(total/iterations)`, remainder on the last.
    #[default]
    Equal,
    /// Batch `t` gets `floor(total / 2^(t+1))`, the last batch the rest.
    Exponential,
}

/// A fully resolved batch schedule; `sizes` always sums to `total`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetSchedule {
    pub total: usize,
    pub iterations: usize,
    pub mode: ScheduleMode,
    pub sizes: Vec<usize>,
}

/// Build a schedule for `total` labels over `iterations` batches.
///
/// Every batch size is at least 1 and the sizes sum to `total` exactly. The
/// exponential mode halves the remaining budget each step; when the floor
/// sequence overshoots the total, earlier batches give labels back (scanning
/// from the rear, never below 1) until the final batch keeps at least one.
pub fn make_schedule(
    total: usize,
    iterations: usize,
    mode: ScheduleMode,
) -> Result<BudgetSchedule> {
    if iterations == 0 {
        return Err(Error::ZeroIterations);
    }
    if total < iterations {
        return Err(Error::BudgetTooSmall {
            budget: total,
            iterations,
        });
    }
    let sizes = match mode {
        ScheduleMode::Equal => {
            let base = total / iterations;
            let mut sizes = vec![base; iterations];
            sizes[iterations - 1] += total - base * iterations;
            sizes
        }
        ScheduleMode::Exponential => {
            let mut sizes: Vec<usize> = (0..iterations - 1)
                .map(|t| {
                    let halved = if t + 1 < usize::BITS as usize {
                        total >> (t + 1)
                    } else {
                        0
                    };
                    halved.max(1)
                })
                .collect();
            loop {
                let used: usize = sizes.iter().sum();
                if used + 1 <= total {
                    break;
                }
                let donor = sizes
                    .iter()
                    .rposition(|&s| s > 1)
                    .expect("total >= iterations leaves room for unit batches");
                sizes[donor] -= 1;
            }
            let used: usize = sizes.iter().sum();
            sizes.push(total - used);
            sizes
        }
    };
    debug_assert_eq!(sizes.iter().sum::<usize>(), total);
    debug_assert!(sizes.iter().all(|&s| s >= 1));
    Ok(BudgetSchedule {
        total,
        iterations,
        mode,
        sizes,
    })
}

/// Pick the seed batch: `m` unlabeled instances spread over groups to
/// maximize the group-diversity term `sum_j sqrt(c_j)`.
///
/// Groups are visited round-robin in (candidate count descending, group id
/// ascending) order, one uniform draw per visit, which matches the greedy
/// maximizer of the diversity term.
pub fn select_seed(
    partition: &GroupPartition,
    unlabeled: &BTreeSet<usize>,
    m: usize,
    rng_seed: u64,
) -> Result<Vec<usize>> {
    let mut candidates: Vec<(usize, Vec<usize>)> = partition
        .members
        .iter()
        .enumerate()
        .map(|(gid, ids)| {
            (
                gid,
                ids.iter()
                    .copied()
                    .filter(|id| unlabeled.contains(id))
                    .collect(),
            )
        })
        .filter(|(_, ids): &(usize, Vec<usize>)| !ids.is_empty())
        .collect();
    let available: usize = candidates.iter().map(|(_, ids)| ids.len()).sum();
    if m > available {
        return Err(Error::SelectionTooLarge {
            requested: m,
            available,
        });
    }
    candidates.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then(a.0.cmp(&b.0)));

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut picks = Vec::with_capacity(m);
    while picks.len() < m {
        for (_, ids) in candidates.iter_mut() {
            if picks.len() == m {
                break;
            }
            if ids.is_empty() {
                continue;
            }
            let at = rng.random_range(0..ids.len());
            picks.push(ids.remove(at));
        }
    }
    Ok(picks)
}

/// One labeled sample in the uncertainty set: its softmax target and its
/// current boosting-style weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyEntry {
    pub id: usize,
    pub target: f64,
    pub weight: f64,
}

/// The weighted regression set the uncertainty model trains on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintySet {
    pub iteration: usize,
    pub entries: Vec<UncertaintyEntry>,
}

impl UncertaintySet {
    pub fn weight_sum(&self) -> f64 {
        self.entries.iter().map(|e| e.weight).sum()
    }
}

/// State carried from the previous iteration's uncertainty set: weights and
/// targets per id, the regressor's predictions on those ids, and the set
/// size.
#[derive(Debug, Clone, PartialEq)]
pub struct PreviousIteration {
    pub weights: BTreeMap<usize, f64>,
    pub targets: BTreeMap<usize, f64>,
    pub scores: BTreeMap<usize, f64>,
    pub set_size: usize,
}

/// Switches for the weight update, both off in the reference configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UncertaintyOptions {
    /// Flip the sign of the exponent in the carried-over weight update.
    pub negate_weight_exponent: bool,
    /// Multiply softmax targets by the set size so they average 1 instead
    /// of summing to 1.
    pub rescale_targets_by_size: bool,
}

// Keeps ln((1-eps)/eps) finite when the error mass degenerates.
const EPSILON_CLAMP: f64 = 1e-6;

/// Assemble the weighted uncertainty set for one iteration.
///
/// Samples already present in the previous set keep their weight times
/// `exp(-0.5 * ln((1-eps)/eps) * score_prev * target_prev)`, where `eps` is
/// the previous mean target clamped away from 0 and 1. Samples from the new
/// batch start at `1/|batch|`. Weights are normalized to sum to 1.
pub fn build_uncertainty_set(
    labels: &UncertaintyLabels,
    new_ids: &BTreeSet<usize>,
    previous: Option<&PreviousIteration>,
    options: &UncertaintyOptions,
) -> Result<UncertaintySet> {
    let q = labels.targets.len() as f64;
    let new_weight = if new_ids.is_empty() {
        0.0
    } else {
        1.0 / new_ids.len() as f64
    };

    let mut entries = Vec::with_capacity(labels.targets.len());
    for (&id, &target) in &labels.targets {
        let raw_weight = if new_ids.contains(&id) {
            new_weight
        } else {
            let prev = previous.ok_or(Error::MissingPreviousWeight(id))?;
            let (&w, &z, &g) = match (
                prev.weights.get(&id),
                prev.targets.get(&id),
                prev.scores.get(&id),
            ) {
                (Some(w), Some(z), Some(g)) => (w, z, g),
                _ => return Err(Error::MissingPreviousWeight(id)),
            };
            let eps = (prev.targets.values().sum::<f64>() / prev.set_size as f64)
                .clamp(EPSILON_CLAMP, 1.0 - EPSILON_CLAMP);
            let mut exponent = -0.5 * ((1.0 - eps) / eps).ln() * g * z;
            if options.negate_weight_exponent {
                exponent = -exponent;
            }
            w * exponent.exp()
        };
        let target = if options.rescale_targets_by_size {
            target * q
        } else {
            target
        };
        entries.push(UncertaintyEntry {
            id,
            target,
            weight: raw_weight,
        });
    }

    let z_norm: f64 = entries.iter().map(|e| e.weight).sum();
    if z_norm > 0.0 {
        for e in &mut entries {
            e.weight /= z_norm;
        }
    }
    Ok(UncertaintySet {
        iteration: labels.iteration,
        entries,
    })
}

/// Shrinkage settings for the uncertainty regressor. The defaults keep trees
/// shallow and unpenalized because the normalized weights make per-leaf
/// Hessian mass far below 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegressorConfig {
    pub rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub min_child_weight: f64,
}

impl Default for RegressorConfig {
    fn default() -> Self {
        RegressorConfig {
            rounds: 20,
            max_depth: 3,
            learning_rate: 0.1,
            lambda: 0.0,
            gamma: 0.0,
            min_child_weight: 0.0,
        }
    }
}

/// Boosted regression ensemble predicting per-sample uncertainty in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regressor {
    pub trees: Vec<RegTree>,
    pub learning_rate: f64,
}

impl Regressor {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut score = 0.0;
        for tree in &self.trees {
            score += self.learning_rate * tree.evaluate(x);
        }
        score.clamp(0.0, 1.0)
    }
}

/// Fit the uncertainty regressor to a weighted set by boosted weighted
/// squared error: gradient `w * (pred - target)`, Hessian `w`.
pub fn train_regressor<F: FeatureSource + ?Sized>(
    features: &F,
    set: &UncertaintySet,
    config: &RegressorConfig,
) -> Result<Regressor> {
    if set.entries.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let reg = TreeRegularization {
        max_depth: config.max_depth,
        lambda: config.lambda,
        gamma: config.gamma,
        min_child_weight: config.min_child_weight,
    };
    let rows: Vec<usize> = set.entries.iter().map(|e| e.id).collect();
    let mut preds = vec![0.0f64; rows.len()];
    let mut trees = Vec::with_capacity(config.rounds);
    let mut grad = vec![0.0f64; rows.len()];
    let mut hess = vec![0.0f64; rows.len()];
    for _ in 0..config.rounds {
        for (i, entry) in set.entries.iter().enumerate() {
            grad[i] = entry.weight * (preds[i] - entry.target);
            hess[i] = entry.weight;
        }
        let tree = fit_regression_tree(features, &rows, &grad, &hess, &reg);
        for (i, &id) in rows.iter().enumerate() {
            preds[i] += config.learning_rate * tree.evaluate(features.features(id));
        }
        trees.push(tree);
    }
    Ok(Regressor {
        trees,
        learning_rate: config.learning_rate,
    })
}

/// Score every id in `ids` with the regressor, ascending by id.
pub fn score_unlabeled<F: FeatureSource + ?Sized>(
    regressor: &Regressor,
    features: &F,
    ids: &BTreeSet<usize>,
) -> Vec<(usize, f64)> {
    ids.iter()
        .map(|&id| (id, regressor.predict(features.features(id))))
        .collect()
}

/// Group-diversity term: sum over groups of the square root of the pick
/// count.
pub fn l21_norm(group_counts: &[usize]) -> f64 {
    group_counts.iter().map(|&c| (c as f64).sqrt()).sum()
}

/// One selected sample with the bookkeeping the trace records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pick {
    pub id: usize,
    pub group: usize,
    pub score: f64,
    pub marginal_gain: f64,
}

/// Greedily select `m` samples maximizing
/// `sum(score) + alpha * sum_j sqrt(c_j)`.
///
/// Ties go to the lower group id, then the lower instance id. Passing
/// `alpha = f64::INFINITY` switches to diversity-only mode: the score term
/// no longer orders anything, so the greedy degenerates to the seed rule's
/// round-robin over groups in (candidate count descending, group id
/// ascending) order, taking candidates in id order; scores are still echoed
/// in the picks and the reported marginal gain is the bare diversity
/// increment.
pub fn select_samples(
    scores: &[(usize, f64)],
    partition: &GroupPartition,
    m: usize,
    alpha: f64,
) -> Result<Vec<Pick>> {
    if m > scores.len() {
        return Err(Error::SelectionTooLarge {
            requested: m,
            available: scores.len(),
        });
    }

    let mut per_group: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
    for &(id, score) in scores {
        per_group
            .entry(partition.group_of[id])
            .or_default()
            .push((id, score));
    }

    if alpha.is_infinite() {
        let mut groups: Vec<(usize, Vec<(usize, f64)>)> = per_group.into_iter().collect();
        for (_, list) in groups.iter_mut() {
            list.sort_by(|a, b| a.0.cmp(&b.0));
        }
        groups.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then(a.0.cmp(&b.0)));
        let mut picks = Vec::with_capacity(m);
        let mut pass = 0usize;
        while picks.len() < m {
            // In pass p every open group already holds p picks.
            let bonus = ((pass + 1) as f64).sqrt() - (pass as f64).sqrt();
            for (group, list) in &groups {
                if picks.len() == m {
                    break;
                }
                let Some(&(id, score)) = list.get(pass) else {
                    continue;
                };
                picks.push(Pick {
                    id,
                    group: *group,
                    score,
                    marginal_gain: bonus,
                });
            }
            pass += 1;
        }
        return Ok(picks);
    }

    for list in per_group.values_mut() {
        list.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.0.cmp(&b.0))
        });
    }

    let mut next_idx: BTreeMap<usize, usize> = per_group.keys().map(|&g| (g, 0)).collect();
    let mut counts: BTreeMap<usize, usize> = per_group.keys().map(|&g| (g, 0)).collect();
    let mut picks = Vec::with_capacity(m);
    for _ in 0..m {
        let mut best: Option<(f64, usize)> = None;
        for (&group, list) in &per_group {
            let idx = next_idx[&group];
            if idx >= list.len() {
                continue;
            }
            let c = counts[&group] as f64;
            let bonus = (c + 1.0).sqrt() - c.sqrt();
            let gain = list[idx].1 + alpha * bonus;
            if best.is_none_or(|(bg, _)| gain > bg) {
                best = Some((gain, group));
            }
        }
        let (gain, group) = best.expect("m <= candidate count leaves a group open");
        let idx = next_idx.get_mut(&group).unwrap();
        let (id, score) = per_group[&group][*idx];
        *idx += 1;
        *counts.get_mut(&group).unwrap() += 1;
        picks.push(Pick {
            id,
            group,
            score,
            marginal_gain: gain,
        });
    }
    Ok(picks)
}
