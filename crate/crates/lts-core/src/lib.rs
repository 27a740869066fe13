//! Active learning for gradient-boosted tree classifiers under a hard label
//! budget.
//!
//! The core loop couples three pieces:
//!
//! * a boosted tree classifier trained additively on the labeled set
//!   ([`gboost`]),
//! * a boosted regressor that learns each sample's uncertainty from the
//!   softmax of training losses, reweighted iteration over iteration
//!   ([`sampler`]),
//! * a greedy selector that buys batch diversity across feature-grid groups
//!   through a square-root group bonus ([`sampler::select_samples`],
//!   [`grouping`]).
//!
//! [`strategies`] wires these into runnable sampling strategies (plus the
//! random, one-off and plain-tree baselines) and [`report`] fans whole
//! experiments out over strategies, budgets and seeds. Every run is a pure
//! function of its configuration and seed.

pub mod dataset;
pub mod error;
pub mod gboost;
pub mod grouping;
pub mod metrics;
pub mod report;
pub mod sampler;
pub mod strategies;
pub mod tree;

pub use dataset::{
    gen_synthetic, load_csv, split_train_test, ClusterSpec, FeatureMatrix, FeatureSource, Instance,
    Oracle, Pool, SplitConfig, TrainTestSplit,
};
pub use error::{Error, Result};
pub use gboost::{
    compute_uncertainty_labels, softmax_uncertainty, BoostModel, LossKind, LossSpec,
    UncertaintyLabels,
};
pub use grouping::{bins_per_feature, partition_groups, GroupPartition, DEFAULT_MAX_GROUPS};
pub use metrics::{compute_metrics, MetricsSnapshot};
pub use report::{
    emit_report, execute_plan, BudgetSpec, ExperimentPlan, MinimalBudget, Report, RunRecord,
    SweepCell, SweepSummary, REPORT_SCHEMA_VERSION,
};
pub use sampler::{
    build_uncertainty_set, l21_norm, make_schedule, score_unlabeled, select_samples, select_seed,
    train_regressor, BudgetSchedule, Pick, PreviousIteration, Regressor, RegressorConfig,
    ScheduleMode, UncertaintyEntry, UncertaintyOptions, UncertaintySet,
};
pub use strategies::{
    run_lts, run_strategy, BoostConfig, EvalSet, IterationTrace, StrategyConfig, StrategyKind,
};
pub use tree::{
    fit_classification_tree, fit_regression_tree, ClassNode, ClassificationTree, RegTree, TreeNode,
    TreeRegularization,
};
