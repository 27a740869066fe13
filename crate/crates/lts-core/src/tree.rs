//! Regression trees fit by exact greedy second-order splits, and a Gini
//! classification tree for the plain decision-tree baseline.
//!
//! All split searches are deterministic: features are scanned in ascending
//! index order, candidate thresholds in ascending value order, and only a
//! strictly better gain replaces the incumbent, so ties resolve to the
//! lowest feature index and then the lowest threshold.

use serde::{Deserialize, Serialize};

use crate::dataset::FeatureSource;

/// One node of a tree stored in an arena; `nodes[0]` is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// Structural and shrinkage parameters shared by every tree fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TreeRegularization {
    pub max_depth: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub min_child_weight: f64,
}

impl Default for TreeRegularization {
    fn default() -> Self {
        TreeRegularization {
            max_depth: 5,
            lambda: 1.0,
            gamma: 0.0,
            min_child_weight: 1.0,
        }
    }
}

/// A regression tree over real feature vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegTree {
    pub nodes: Vec<TreeNode>,
}

impl RegTree {
    /// A single-leaf tree returning `value` everywhere.
    pub fn leaf(value: f64) -> Self {
        RegTree {
            nodes: vec![TreeNode::Leaf { value }],
        }
    }

    /// Routing rule: `x[feature] < threshold` goes left, otherwise right.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    idx = if x[*feature] < *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }
}

fn leaf_value(g: f64, h: f64, lambda: f64) -> f64 {
    let denom = h + lambda;
    if denom <= 1e-12 {
        0.0
    } else {
        -g / denom
    }
}

fn score(g: f64, h: f64, lambda: f64) -> f64 {
    let denom = h + lambda;
    if denom <= 1e-12 {
        0.0
    } else {
        g * g / denom
    }
}

struct SplitCandidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

/// Fit a regression tree to per-row gradients and Hessians.
///
/// `rows[i]` is an instance id in `features`; `grad[i]` and `hess[i]` are
/// its first and second order statistics. Leaf values are the Newton step
/// `-G / (H + lambda)`.
pub fn fit_regression_tree<F: FeatureSource + ?Sized>(
    features: &F,
    rows: &[usize],
    grad: &[f64],
    hess: &[f64],
    reg: &TreeRegularization,
) -> RegTree {
    debug_assert_eq!(rows.len(), grad.len());
    debug_assert_eq!(rows.len(), hess.len());
    let mut nodes = Vec::new();
    let positions: Vec<usize> = (0..rows.len()).collect();
    build_reg_node(features, rows, grad, hess, reg, &positions, 0, &mut nodes);
    RegTree { nodes }
}

fn best_reg_split<F: FeatureSource + ?Sized>(
    features: &F,
    rows: &[usize],
    grad: &[f64],
    hess: &[f64],
    reg: &TreeRegularization,
    positions: &[usize],
) -> Option<SplitCandidate> {
    let total_g: f64 = positions.iter().map(|&p| grad[p]).sum();
    let total_h: f64 = positions.iter().map(|&p| hess[p]).sum();
    let parent = score(total_g, total_h, reg.lambda);

    let mut best: Option<SplitCandidate> = None;
    let dim = features.dim();
    let mut order: Vec<usize> = Vec::with_capacity(positions.len());
    for feature in 0..dim {
        order.clear();
        order.extend_from_slice(positions);
        order.sort_by(|&a, &b| {
            let va = features.features(rows[a])[feature];
            let vb = features.features(rows[b])[feature];
            va.partial_cmp(&vb)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(rows[a].cmp(&rows[b]))
        });

        let mut g_left = 0.0;
        let mut h_left = 0.0;
        for i in 0..order.len() - 1 {
            g_left += grad[order[i]];
            h_left += hess[order[i]];
            let v = features.features(rows[order[i]])[feature];
            let v_next = features.features(rows[order[i + 1]])[feature];
            if v >= v_next {
                continue;
            }
            let threshold = v + (v_next - v) / 2.0;
            // Guard against midpoints collapsing onto a neighbour for
            // adjacent floats; such a cut would not reproduce this
            // partition at evaluation time.
            if !(v < threshold && threshold <= v_next) {
                continue;
            }
            let g_right = total_g - g_left;
            let h_right = total_h - h_left;
            if h_left < reg.min_child_weight || h_right < reg.min_child_weight {
                continue;
            }
            let gain = 0.5
                * (score(g_left, h_left, reg.lambda) + score(g_right, h_right, reg.lambda)
                    - parent)
                - reg.gamma;
            if gain > 0.0 && best.as_ref().is_none_or(|b| gain > b.gain) {
                best = Some(SplitCandidate {
                    feature,
                    threshold,
                    gain,
                });
            }
        }
    }
    best
}

#[allow(clippy::too_many_arguments)]
fn build_reg_node<F: FeatureSource + ?Sized>(
    features: &F,
    rows: &[usize],
    grad: &[f64],
    hess: &[f64],
    reg: &TreeRegularization,
    positions: &[usize],
    depth: usize,
    nodes: &mut Vec<TreeNode>,
) -> usize {
    let make_leaf = |nodes: &mut Vec<TreeNode>| {
        let g: f64 = positions.iter().map(|&p| grad[p]).sum();
        let h: f64 = positions.iter().map(|&p| hess[p]).sum();
        nodes.push(TreeNode::Leaf {
            value: leaf_value(g, h, reg.lambda),
        });
        nodes.len() - 1
    };

    if depth >= reg.max_depth || positions.len() < 2 {
        return make_leaf(nodes);
    }
    let Some(split) = best_reg_split(features, rows, grad, hess, reg, positions) else {
        return make_leaf(nodes);
    };

    let (left_pos, right_pos): (Vec<usize>, Vec<usize>) = positions
        .iter()
        .partition(|&&p| features.features(rows[p])[split.feature] < split.threshold);
    debug_assert!(!left_pos.is_empty() && !right_pos.is_empty());

    let idx = nodes.len();
    nodes.push(TreeNode::Split {
        feature: split.feature,
        threshold: split.threshold,
        left: 0,
        right: 0,
    });
    let left = build_reg_node(features, rows, grad, hess, reg, &left_pos, depth + 1, nodes);
    let right = build_reg_node(
        features,
        rows,
        grad,
        hess,
        reg,
        &right_pos,
        depth + 1,
        nodes,
    );
    if let TreeNode::Split {
        left: l, right: r, ..
    } = &mut nodes[idx]
    {
        *l = left;
        *r = right;
    }
    idx
}

/// A decision tree with class-label leaves, split on Gini impurity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationTree {
    pub nodes: Vec<ClassNode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ClassNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        class: u32,
    },
}

impl ClassificationTree {
    pub fn classify(&self, x: &[f64]) -> u32 {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                ClassNode::Leaf { class } => return *class,
                ClassNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    idx = if x[*feature] < *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }
}

fn gini(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts
        .iter()
        .map(|&c| {
            let p = c as f64 / n;
            p * p
        })
        .sum::<f64>()
}

fn majority(counts: &[usize]) -> u32 {
    let mut best = 0usize;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    best as u32
}

/// Fit a Gini classification tree to `(instance id, label)` pairs.
///
/// Same deterministic split search as the regression fitter; leaves predict
/// the majority class, ties going to the lower class id.
pub fn fit_classification_tree<F: FeatureSource + ?Sized>(
    features: &F,
    labeled: &[(usize, u32)],
    class_count: usize,
    max_depth: usize,
) -> ClassificationTree {
    let mut nodes = Vec::new();
    let positions: Vec<usize> = (0..labeled.len()).collect();
    build_class_node(
        features,
        labeled,
        class_count,
        max_depth,
        &positions,
        0,
        &mut nodes,
    );
    ClassificationTree { nodes }
}

fn class_counts(labeled: &[(usize, u32)], positions: &[usize], class_count: usize) -> Vec<usize> {
    let mut counts = vec![0usize; class_count];
    for &p in positions {
        counts[labeled[p].1 as usize] += 1;
    }
    counts
}

fn build_class_node<F: FeatureSource + ?Sized>(
    features: &F,
    labeled: &[(usize, u32)],
    class_count: usize,
    max_depth: usize,
    positions: &[usize],
    depth: usize,
    nodes: &mut Vec<ClassNode>,
) -> usize {
    let counts = class_counts(labeled, positions, class_count);
    let make_leaf = |nodes: &mut Vec<ClassNode>| {
        nodes.push(ClassNode::Leaf {
            class: majority(&counts),
        });
        nodes.len() - 1
    };
    let parent_gini = gini(&counts);
    if depth >= max_depth || positions.len() < 2 || parent_gini == 0.0 {
        return make_leaf(nodes);
    }

    let n = positions.len() as f64;
    let mut best: Option<SplitCandidate> = None;
    let mut order: Vec<usize> = Vec::with_capacity(positions.len());
    for feature in 0..features.dim() {
        order.clear();
        order.extend_from_slice(positions);
        order.sort_by(|&a, &b| {
            let va = features.features(labeled[a].0)[feature];
            let vb = features.features(labeled[b].0)[feature];
            va.partial_cmp(&vb)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(labeled[a].0.cmp(&labeled[b].0))
        });
        let mut left_counts = vec![0usize; class_count];
        for i in 0..order.len() - 1 {
            left_counts[labeled[order[i]].1 as usize] += 1;
            let v = features.features(labeled[order[i]].0)[feature];
            let v_next = features.features(labeled[order[i + 1]].0)[feature];
            if v >= v_next {
                continue;
            }
            let threshold = v + (v_next - v) / 2.0;
            if !(v < threshold && threshold <= v_next) {
                continue;
            }
            let right_counts: Vec<usize> = counts
                .iter()
                .zip(&left_counts)
                .map(|(&t, &l)| t - l)
                .collect();
            let n_left = (i + 1) as f64;
            let n_right = n - n_left;
            let gain = parent_gini
                - (n_left / n) * gini(&left_counts)
                - (n_right / n) * gini(&right_counts);
            if gain > 0.0 && best.as_ref().is_none_or(|b| gain > b.gain) {
                best = Some(SplitCandidate {
                    feature,
                    threshold,
                    gain,
                });
            }
        }
    }
    let Some(split) = best else {
        return make_leaf(nodes);
    };

    let (left_pos, right_pos): (Vec<usize>, Vec<usize>) = positions
        .iter()
        .partition(|&&p| features.features(labeled[p].0)[split.feature] < split.threshold);
    let idx = nodes.len();
    nodes.push(ClassNode::Split {
        feature: split.feature,
        threshold: split.threshold,
        left: 0,
        right: 0,
    });
    let left = build_class_node(
        features,
        labeled,
        class_count,
        max_depth,
        &left_pos,
        depth + 1,
        nodes,
    );
    let right = build_class_node(
        features,
        labeled,
        class_count,
        max_depth,
        &right_pos,
        depth + 1,
        nodes,
    );
    if let ClassNode::Split {
        left: l, right: r, ..
    } = &mut nodes[idx]
    {
        *l = left;
        *r = right;
    }
    idx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::FeatureMatrix;
    use approx::assert_relative_eq;

    fn reg(max_depth: usize, lambda: f64, gamma: f64, min_child_weight: f64) -> TreeRegularization {
        TreeRegularization {
            max_depth,
            lambda,
            gamma,
            min_child_weight,
        }
    }

    #[test]
    fn evaluate_routes_boundary_right() {
        let tree = RegTree {
            nodes: vec![
                TreeNode::Split {
                    feature: 0,
                    threshold: 0.5,
                    left: 1,
                    right: 2,
                },
                TreeNode::Leaf { value: 1.0 },
                TreeNode::Leaf { value: 2.0 },
            ],
        };
        assert_eq!(tree.evaluate(&[0.49]), 1.0);
        assert_eq!(tree.evaluate(&[0.5]), 2.0);
        assert_eq!(tree.evaluate(&[0.51]), 2.0);
    }

    #[test]
    fn unregularized_fit_recovers_step_function() {
        // With squared error, g = pred - y at pred = 0, h = 1, so leaves are
        // plain means.
        let m = FeatureMatrix(vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]]);
        let y = [0.0, 0.0, 10.0, 10.0];
        let grad: Vec<f64> = y.iter().map(|&v| -v).collect();
        let hess = vec![1.0; 4];
        let tree = fit_regression_tree(&m, &[0, 1, 2, 3], &grad, &hess, &reg(3, 0.0, 0.0, 0.0));
        assert_relative_eq!(tree.evaluate(&[0.5]), 0.0, epsilon = 1e-12);
        assert_relative_eq!(tree.evaluate(&[2.5]), 10.0, epsilon = 1e-12);
        match &tree.nodes[0] {
            TreeNode::Split {
                feature, threshold, ..
            } => {
                assert_eq!(*feature, 0);
                assert_relative_eq!(*threshold, 1.5, epsilon = 1e-12);
            }
            _ => panic!("expected a split at the root"),
        }
    }

    #[test]
    fn gain_and_leaf_values_match_hand_computation() {
        // g = [-1,-1,1,1], h = 1 each, lambda = 1. Root score is 0, the
        // balanced split scores 4/3 per side, so gain = (4/3 + 4/3)/2 = 4/3
        // and leaves are -G/(H+lambda) = +-2/3.
        let m = FeatureMatrix(vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]]);
        let grad = vec![-1.0, -1.0, 1.0, 1.0];
        let hess = vec![1.0; 4];
        let tree = fit_regression_tree(&m, &[0, 1, 2, 3], &grad, &hess, &reg(1, 1.0, 0.0, 0.0));
        assert_relative_eq!(tree.evaluate(&[0.0]), 2.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(tree.evaluate(&[3.0]), -2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn gamma_suppresses_weak_splits() {
        let m = FeatureMatrix(vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]]);
        let grad = vec![-1.0, -1.0, 1.0, 1.0];
        let hess = vec![1.0; 4];
        // Best achievable gain is 4/3; a gamma above that forces a stump.
        let tree = fit_regression_tree(&m, &[0, 1, 2, 3], &grad, &hess, &reg(3, 1.0, 1.5, 0.0));
        assert_eq!(tree.nodes.len(), 1);
        assert_relative_eq!(tree.evaluate(&[0.0]), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn min_child_weight_blocks_thin_children() {
        let m = FeatureMatrix(vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]]);
        let grad = vec![-5.0, 1.0, 1.0, 1.0];
        let hess = vec![1.0; 4];
        // Isolating row 0 is the best cut but leaves h = 1 < 2 on the left.
        let tree = fit_regression_tree(&m, &[0, 1, 2, 3], &grad, &hess, &reg(1, 0.0, 0.0, 2.0));
        if let TreeNode::Split { threshold, .. } = &tree.nodes[0] {
            assert_relative_eq!(*threshold, 1.5, epsilon = 1e-12);
        } else {
            panic!("expected a split at the root");
        }
    }

    #[test]
    fn equal_gains_pick_lowest_feature_then_lowest_threshold() {
        // Both features carry the same values, so every split gain ties;
        // the first candidate (feature 0, leftmost midpoint among maximal
        // gains) must win.
        let m = FeatureMatrix(vec![
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            vec![2.0, 2.0],
            vec![3.0, 3.0],
        ]);
        let grad = vec![-1.0, -1.0, 1.0, 1.0];
        let hess = vec![1.0; 4];
        let tree = fit_regression_tree(&m, &[0, 1, 2, 3], &grad, &hess, &reg(1, 0.0, 0.0, 0.0));
        match &tree.nodes[0] {
            TreeNode::Split {
                feature, threshold, ..
            } => {
                assert_eq!(*feature, 0);
                assert_relative_eq!(*threshold, 1.5, epsilon = 1e-12);
            }
            _ => panic!("expected a split at the root"),
        }
    }

    #[test]
    fn depth_zero_yields_newton_stump() {
        let m = FeatureMatrix(vec![vec![0.0], vec![1.0]]);
        let grad = vec![3.0, 1.0];
        let hess = vec![1.0, 1.0];
        let tree = fit_regression_tree(&m, &[0, 1], &grad, &hess, &reg(0, 1.0, 0.0, 0.0));
        assert_eq!(tree.nodes.len(), 1);
        // -G/(H+lambda) = -4/3
        assert_relative_eq!(tree.evaluate(&[0.0]), -4.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn constant_features_fit_a_single_leaf() {
        let m = FeatureMatrix(vec![vec![2.0], vec![2.0], vec![2.0]]);
        let grad = vec![1.0, -1.0, 2.0];
        let hess = vec![1.0; 3];
        let tree = fit_regression_tree(&m, &[0, 1, 2], &grad, &hess, &reg(4, 0.0, 0.0, 0.0));
        assert_eq!(tree.nodes.len(), 1);
    }

    #[test]
    fn serde_round_trip_preserves_structure() {
        let m = FeatureMatrix(vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]]);
        let grad = vec![-1.0, -1.0, 1.0, 1.0];
        let hess = vec![1.0; 4];
        let tree = fit_regression_tree(&m, &[0, 1, 2, 3], &grad, &hess, &reg(2, 1.0, 0.0, 0.0));
        let json = serde_json::to_string(&tree).unwrap();
        let back: RegTree = serde_json::from_str(&json).unwrap();
        assert_eq!(tree, back);
    }

    #[test]
    fn classification_tree_learns_axis_aligned_classes() {
        let m = FeatureMatrix(vec![
            vec![0.0, 5.0],
            vec![1.0, -3.0],
            vec![2.0, 9.0],
            vec![10.0, 0.0],
            vec![11.0, 2.0],
            vec![12.0, -8.0],
        ]);
        let labeled: Vec<(usize, u32)> = vec![(0, 0), (1, 0), (2, 0), (3, 1), (4, 1), (5, 1)];
        let tree = fit_classification_tree(&m, &labeled, 2, 4);
        assert_eq!(tree.classify(&[1.5, 0.0]), 0);
        assert_eq!(tree.classify(&[11.0, 0.0]), 1);
    }

    #[test]
    fn classification_tree_splits_twice_for_nested_pattern() {
        // Class 1 sits in the middle band of feature 0.
        let m = FeatureMatrix(vec![
            vec![0.0],
            vec![1.0],
            vec![2.0],
            vec![3.0],
            vec![4.0],
            vec![5.0],
        ]);
        let labeled: Vec<(usize, u32)> = vec![(0, 0), (1, 0), (2, 1), (3, 1), (4, 0), (5, 0)];
        let tree = fit_classification_tree(&m, &labeled, 2, 3);
        for (x, want) in [(0.5, 0), (2.5, 1), (4.5, 0)] {
            assert_eq!(tree.classify(&[x]), want as u32);
        }
    }

    #[test]
    fn classification_leaf_tie_takes_lowest_class() {
        let m = FeatureMatrix(vec![vec![1.0], vec![1.0]]);
        let labeled: Vec<(usize, u32)> = vec![(0, 1), (1, 0)];
        let tree = fit_classification_tree(&m, &labeled, 2, 2);
        assert_eq!(tree.nodes.len(), 1);
        assert_eq!(tree.classify(&[1.0]), 0);
    }

    #[test]
    fn classification_depth_cap_holds() {
        let m = FeatureMatrix((0..16).map(|i| vec![i as f64]).collect());
        let labeled: Vec<(usize, u32)> = (0..16).map(|i| (i, (i % 2) as u32)).collect();
        let tree = fit_classification_tree(&m, &labeled, 2, 1);
        let splits = tree
            .nodes
            .iter()
            .filter(|n| matches!(n, ClassNode::Split { .. }))
            .count();
        assert_eq!(splits, 1);
    }
}
