//! Config schema and command implementations behind the `lts` binary.
//!
//! The config file is flat JSON: every knob is a top-level key, unknown keys
//! are an error, and every omitted key takes the reference default. The same
//! schema serves all three subcommands; each uses the keys it needs.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use lts_core::{
    emit_report, execute_plan, gen_synthetic, load_csv, BoostConfig, BudgetSpec, ClusterSpec,
    ExperimentPlan, FeatureSource, Pool, RegressorConfig, Report, ScheduleMode, SplitConfig,
    StrategyConfig, StrategyKind, UncertaintyOptions, DEFAULT_MAX_GROUPS,
};

fn default_label_column() -> String {
    "label".into()
}
fn default_strategies() -> Vec<StrategyKind> {
    StrategyKind::all().to_vec()
}
fn default_iterations() -> usize {
    20
}
fn default_alpha() -> f64 {
    1.0
}
fn default_rounds_per_iteration() -> usize {
    10
}
fn default_max_depth() -> usize {
    5
}
fn default_learning_rate() -> f64 {
    0.1
}
fn default_lambda() -> f64 {
    1.0
}
fn default_min_child_weight() -> f64 {
    1.0
}
fn default_regressor_rounds() -> usize {
    20
}
fn default_regressor_max_depth() -> usize {
    3
}
fn default_regressor_learning_rate() -> f64 {
    0.1
}
fn default_test_fraction() -> f64 {
    0.3
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("report")
}
fn default_max_groups() -> usize {
    DEFAULT_MAX_GROUPS
}

/// Everything a run needs, as one flat JSON object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// CSV dataset path; mutually exclusive with `clusters`.
    #[serde(default)]
    pub dataset_csv: Option<PathBuf>,
    /// Label column of `dataset_csv`, and of CSVs written by gen-synth.
    #[serde(default = "default_label_column")]
    pub label_column: String,
    /// Synthetic pool spec; mutually exclusive with `dataset_csv`.
    #[serde(default)]
    pub clusters: Option<Vec<ClusterSpec>>,
    /// Generation seed for `clusters`.
    #[serde(default)]
    pub synth_seed: u64,

    #[serde(default = "default_strategies")]
    pub strategies: Vec<StrategyKind>,
    /// Label budget as a percentage of the full pool size.
    #[serde(default)]
    pub budget_percent: Option<f64>,
    /// Label budget as an absolute count.
    #[serde(default)]
    pub budget_absolute: Option<usize>,
    /// Strictly increasing budget ladder for `sweep`, in percent.
    #[serde(default)]
    pub ladder_percent: Option<Vec<f64>>,
    /// When set, the sweep reports the smallest ladder budget whose mean
    /// f-measure reaches this value.
    #[serde(default)]
    pub target_fm: Option<f64>,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub schedule: ScheduleMode,

    #[serde(default = "default_rounds_per_iteration")]
    pub rounds_per_iteration: usize,
    #[serde(default = "default_max_depth")]
    pub max_depth: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default = "default_min_child_weight")]
    pub min_child_weight: f64,
    #[serde(default)]
    pub base_score: f64,

    #[serde(default = "default_regressor_rounds")]
    pub regressor_rounds: usize,
    #[serde(default = "default_regressor_max_depth")]
    pub regressor_max_depth: usize,
    #[serde(default = "default_regressor_learning_rate")]
    pub regressor_learning_rate: f64,
    #[serde(default)]
    pub regressor_lambda: f64,
    #[serde(default)]
    pub regressor_gamma: f64,
    #[serde(default)]
    pub regressor_min_child_weight: f64,

    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default)]
    pub split_seed: u64,

    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub negate_weight_exponent: bool,
    #[serde(default)]
    pub rescale_z_by_q: bool,
    #[serde(default)]
    pub retrain_from_scratch: bool,
    #[serde(default = "default_max_groups")]
    pub max_groups: usize,
    /// Also emit selections.csv with every pick of every run.
    #[serde(default)]
    pub log_selections: bool,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: ExperimentConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        Ok(config)
    }

    /// Fold command-line overrides into the config so the emitted echo
    /// reflects what actually ran.
    pub fn apply_overrides(&mut self, out: Option<PathBuf>, seed: Option<u64>) {
        if let Some(out) = out {
            self.out_dir = out;
        }
        if let Some(seed) = seed {
            self.seeds = vec![seed];
            self.synth_seed = seed;
        }
    }

    pub fn load_pool(&self) -> Result<Pool> {
        match (&self.dataset_csv, &self.clusters) {
            (Some(path), None) => load_csv(path, &self.label_column, None)
                .with_context(|| format!("loading dataset {}", path.display())),
            (None, Some(clusters)) => {
                gen_synthetic(clusters, self.synth_seed).context("generating synthetic pool")
            }
            (Some(_), Some(_)) => bail!("config sets both dataset_csv and clusters; pick one"),
            (None, None) => bail!("config needs a dataset: set dataset_csv or clusters"),
        }
    }

    fn strategy_config(&self) -> StrategyConfig {
        StrategyConfig {
            boost: BoostConfig {
                rounds_per_iteration: self.rounds_per_iteration,
                max_depth: self.max_depth,
                learning_rate: self.learning_rate,
                lambda: self.lambda,
                gamma: self.gamma,
                min_child_weight: self.min_child_weight,
                base_score: self.base_score,
            },
            regressor: RegressorConfig {
                rounds: self.regressor_rounds,
                max_depth: self.regressor_max_depth,
                learning_rate: self.regressor_learning_rate,
                lambda: self.regressor_lambda,
                gamma: self.regressor_gamma,
                min_child_weight: self.regressor_min_child_weight,
            },
            uncertainty: UncertaintyOptions {
                negate_weight_exponent: self.negate_weight_exponent,
                rescale_targets_by_size: self.rescale_z_by_q,
            },
            alpha: self.alpha,
            retrain_from_scratch: self.retrain_from_scratch,
        }
    }

    fn split_config(&self) -> SplitConfig {
        SplitConfig {
            test_fraction: self.test_fraction,
            rng_seed: self.split_seed,
        }
    }

    /// The single budget a plain run uses.
    fn single_budget(&self) -> Result<BudgetSpec> {
        if self.ladder_percent.is_some() {
            bail!("ladder_percent is for the sweep subcommand; run takes a single budget");
        }
        match (self.budget_percent, self.budget_absolute) {
            (Some(pct), None) => Ok(BudgetSpec::Percent(pct)),
            (None, Some(n)) => Ok(BudgetSpec::Absolute(n)),
            (Some(_), Some(_)) => {
                bail!("config sets both budget_percent and budget_absolute; pick one")
            }
            (None, None) => bail!("config needs budget_percent or budget_absolute"),
        }
    }

    fn ladder(&self) -> Result<Vec<BudgetSpec>> {
        if self.budget_percent.is_some() || self.budget_absolute.is_some() {
            bail!("sweep takes its budgets from ladder_percent only");
        }
        let ladder = self
            .ladder_percent
            .as_ref()
            .filter(|l| !l.is_empty())
            .context("sweep needs a non-empty ladder_percent")?;
        Ok(ladder.iter().map(|&p| BudgetSpec::Percent(p)).collect())
    }
}

/// Write the pool as a headered CSV with one feature column per dimension
/// and the label column holding class names.
pub fn cmd_gen_synth(config: &ExperimentConfig, out: &Path) -> Result<()> {
    let clusters = config
        .clusters
        .as_ref()
        .context("gen-synth needs a clusters spec in the config")?;
    let pool = gen_synthetic(clusters, config.synth_seed)?;

    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    let mut writer =
        csv::Writer::from_path(out).with_context(|| format!("creating {}", out.display()))?;
    let mut header: Vec<String> = (0..pool.dim()).map(|j| format!("f{j}")).collect();
    header.push(config.label_column.clone());
    writer.write_record(&header)?;
    for instance in pool.instances() {
        let mut row: Vec<String> = instance.features.iter().map(f64::to_string).collect();
        row.push(pool.class_names()[pool.truth_label(instance.id) as usize].clone());
        writer.write_record(&row)?;
    }
    writer.flush()?;
    println!(
        "wrote {} instances ({} classes, {} features) to {}",
        pool.len(),
        pool.class_count(),
        pool.dim(),
        out.display()
    );
    Ok(())
}

fn execute_and_emit(config: &ExperimentConfig, budgets: &[BudgetSpec]) -> Result<Report> {
    if config.seeds.is_empty() {
        bail!("config needs at least one seed");
    }
    let pool = config.load_pool()?;
    let strategy_config = config.strategy_config();
    let plan = ExperimentPlan {
        pool: &pool,
        strategies: &config.strategies,
        budgets,
        iterations: config.iterations,
        schedule_mode: config.schedule,
        config: &strategy_config,
        split: config.split_config(),
        seeds: &config.seeds,
        max_groups: config.max_groups,
        target_fm: config.target_fm,
    };
    let report = execute_plan(&plan)?;
    emit_report(&config.out_dir, &report, config.log_selections)?;

    // Echo the fully resolved config next to the report.
    let echo = serde_json::to_string_pretty(config)?;
    std::fs::write(config.out_dir.join("config.json"), echo + "\n")?;
    Ok(report)
}

pub fn cmd_run(config: &ExperimentConfig) -> Result<()> {
    let budget = config.single_budget()?;
    let report = execute_and_emit(config, &[budget])?;
    println!(
        "ran {} runs ({} strategies x {} seeds) at budget {}; report in {}",
        report.runs.len(),
        config.strategies.len(),
        config.seeds.len(),
        report.runs.first().map_or(0, |r| r.budget),
        config.out_dir.display()
    );
    Ok(())
}

pub fn cmd_sweep(config: &ExperimentConfig) -> Result<()> {
    let ladder = config.ladder()?;
    let report = execute_and_emit(config, &ladder)?;
    println!(
        "swept {} budgets x {} strategies x {} seeds; report in {}",
        ladder.len(),
        config.strategies.len(),
        config.seeds.len(),
        config.out_dir.display()
    );
    if let Some(target) = report.sweep.target_fm {
        for row in &report.sweep.minimal_budgets {
            match row.budget {
                Some(budget) => println!(
                    "{}: reaches mean FM {} at {} labels{}",
                    row.strategy.label(),
                    target,
                    budget,
                    row.budget_percent
                        .map(|p| format!(" ({p}%)"))
                        .unwrap_or_default()
                ),
                None => println!("{}: target FM {} not reached", row.strategy.label(), target),
            }
        }
    }
    Ok(())
}
