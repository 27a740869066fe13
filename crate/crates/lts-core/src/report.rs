//! Experiment driver: resolve budgets, fan runs out over strategies,
//! budgets and seeds, aggregate f-measures, and write the report files.
//!
//! Runs are independent given their (strategy, budget, seed) cell, so they
//! execute in parallel; results are assembled in cell order, which keeps
//! every output byte-deterministic for a fixed plan.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{split_train_test, Pool, SplitConfig};
use crate::error::{Error, Result};
use crate::grouping::{partition_groups, GroupPartition};
use crate::sampler::{make_schedule, BudgetSchedule, ScheduleMode};
use crate::strategies::{run_strategy, EvalSet, IterationTrace, StrategyConfig, StrategyKind};

/// A label budget given either as a percentage of the pool or outright.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BudgetSpec {
    /// Percent of the full pool size, rounded to the nearest label.
    Percent(f64),
    /// Absolute number of labels.
    Absolute(usize),
}

impl BudgetSpec {
    /// Number of labels this spec grants against a pool of `pool_size`.
    pub fn resolve(&self, pool_size: usize) -> Result<usize> {
        let budget = match *self {
            BudgetSpec::Percent(pct) => {
                if !(pct > 0.0 && pct <= 100.0) {
                    return Err(Error::InvalidConfig(format!(
                        "budget percent {pct} is outside (0, 100]"
                    )));
                }
                (pool_size as f64 * pct / 100.0).round() as usize
            }
            BudgetSpec::Absolute(n) => n,
        };
        if budget == 0 {
            return Err(Error::InvalidConfig(
                "budget resolves to zero labels".into(),
            ));
        }
        Ok(budget)
    }

    /// The percentage view of this spec, if it has one.
    pub fn percent(&self) -> Option<f64> {
        match *self {
            BudgetSpec::Percent(p) => Some(p),
            BudgetSpec::Absolute(_) => None,
        }
    }
}

/// Everything one experiment invocation wants to run.
#[derive(Debug, Clone)]
pub struct ExperimentPlan<'a> {
    /// Full source pool; the plan splits it itself.
    pub pool: &'a Pool,
    pub strategies: &'a [StrategyKind],
    /// One entry for a plain run, a strictly increasing ladder for a sweep.
    pub budgets: &'a [BudgetSpec],
    pub iterations: usize,
    pub schedule_mode: ScheduleMode,
    pub config: &'a StrategyConfig,
    pub split: SplitConfig,
    pub seeds: &'a [u64],
    pub max_groups: usize,
    /// When set, the sweep reports the smallest budget whose mean f-measure
    /// reaches it.
    pub target_fm: Option<f64>,
}

/// One completed run cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub strategy: StrategyKind,
    pub budget: usize,
    pub budget_percent: Option<f64>,
    pub seed: u64,
    pub traces: Vec<IterationTrace>,
}

impl RunRecord {
    /// F-measure at the end of the run.
    pub fn final_fm(&self) -> f64 {
        self.traces.last().map_or(0.0, |t| t.metrics.fm)
    }
}

/// Aggregate over seeds for one (strategy, budget) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub strategy: StrategyKind,
    pub budget: usize,
    pub budget_percent: Option<f64>,
    pub seeds: usize,
    pub mean_fm: f64,
    pub stddev_fm: f64,
    pub mean_accuracy: f64,
}

/// Smallest ladder budget at which a strategy reaches the target f-measure;
/// `budget` is absent when no ladder entry reaches it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimalBudget {
    pub strategy: StrategyKind,
    pub budget: Option<usize>,
    pub budget_percent: Option<f64>,
}

/// Per-cell aggregates plus the minimal-budget table when a target was set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub target_fm: Option<f64>,
    pub cells: Vec<SweepCell>,
    pub minimal_budgets: Vec<MinimalBudget>,
}

/// The complete result of an experiment invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub pool_size: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub class_names: Vec<String>,
    pub positive_class: u32,
    pub iterations: usize,
    pub runs: Vec<RunRecord>,
    pub sweep: SweepSummary,
}

pub const REPORT_SCHEMA_VERSION: u32 = 1;

struct BudgetContext {
    spec: BudgetSpec,
    budget: usize,
    partition: GroupPartition,
    schedule: BudgetSchedule,
}

/// Split, partition, run every (strategy, budget, seed) cell and aggregate.
pub fn execute_plan(plan: &ExperimentPlan<'_>) -> Result<Report> {
    if plan.strategies.is_empty() {
        return Err(Error::InvalidConfig("no strategies requested".into()));
    }
    if plan.budgets.is_empty() {
        return Err(Error::InvalidConfig("no budgets requested".into()));
    }
    if plan.seeds.is_empty() {
        return Err(Error::InvalidConfig("no seeds requested".into()));
    }

    let split = split_train_test(plan.pool, &plan.split)?;
    let eval = EvalSet::from_pool(plan.pool, &split.test_ids);
    let train = &split.train;

    let mut contexts = Vec::with_capacity(plan.budgets.len());
    for spec in plan.budgets {
        let budget = spec.resolve(plan.pool.len())?;
        if budget > train.len() {
            return Err(Error::BudgetExceedsPool {
                budget,
                pool: train.len(),
            });
        }
        if let Some(last) = contexts.last() {
            let prev: &BudgetContext = last;
            if budget <= prev.budget {
                return Err(Error::LadderNotIncreasing);
            }
        }
        let schedule = make_schedule(budget, plan.iterations, plan.schedule_mode)?;
        let partition = partition_groups(train, budget, plan.iterations, plan.max_groups)?;
        contexts.push(BudgetContext {
            spec: *spec,
            budget,
            partition,
            schedule,
        });
    }

    // Cell order fixes both the run order in the report and the aggregation
    // order, independent of which threads finish first.
    let cells: Vec<(StrategyKind, usize, u64)> = plan
        .strategies
        .iter()
        .flat_map(|&kind| {
            contexts
                .iter()
                .enumerate()
                .flat_map(move |(bi, _)| plan.seeds.iter().map(move |&seed| (kind, bi, seed)))
        })
        .collect();

    let results: Vec<Result<RunRecord>> = cells
        .par_iter()
        .map(|&(kind, bi, seed)| {
            let ctx = &contexts[bi];
            let mut pool = train.fresh_copy();
            let traces = run_strategy(
                kind,
                &mut pool,
                &ctx.partition,
                &ctx.schedule,
                plan.config,
                seed,
                &eval,
            )?;
            Ok(RunRecord {
                strategy: kind,
                budget: ctx.budget,
                budget_percent: ctx.spec.percent(),
                seed,
                traces,
            })
        })
        .collect();
    let runs: Vec<RunRecord> = results.into_iter().collect::<Result<_>>()?;

    let mut sweep_cells = Vec::new();
    for &kind in plan.strategies {
        for ctx in &contexts {
            let fms: Vec<f64> = runs
                .iter()
                .filter(|r| r.strategy == kind && r.budget == ctx.budget)
                .map(RunRecord::final_fm)
                .collect();
            let accs: Vec<f64> = runs
                .iter()
                .filter(|r| r.strategy == kind && r.budget == ctx.budget)
                .map(|r| r.traces.last().map_or(0.0, |t| t.metrics.accuracy))
                .collect();
            let n = fms.len() as f64;
            let mean_fm = fms.iter().sum::<f64>() / n;
            let variance = fms.iter().map(|f| (f - mean_fm).powi(2)).sum::<f64>() / n;
            sweep_cells.push(SweepCell {
                strategy: kind,
                budget: ctx.budget,
                budget_percent: ctx.spec.percent(),
                seeds: fms.len(),
                mean_fm,
                stddev_fm: variance.sqrt(),
                mean_accuracy: accs.iter().sum::<f64>() / n,
            });
        }
    }

    let minimal_budgets = match plan.target_fm {
        None => Vec::new(),
        Some(target) => plan
            .strategies
            .iter()
            .map(|&kind| {
                let hit = sweep_cells
                    .iter()
                    .find(|c| c.strategy == kind && c.mean_fm >= target);
                MinimalBudget {
                    strategy: kind,
                    budget: hit.map(|c| c.budget),
                    budget_percent: hit.and_then(|c| c.budget_percent),
                }
            })
            .collect(),
    };

    Ok(Report {
        schema_version: REPORT_SCHEMA_VERSION,
        pool_size: plan.pool.len(),
        train_size: train.len(),
        test_size: eval.truth.len(),
        class_names: plan.pool.class_names().to_vec(),
        positive_class: train.minority_class(),
        iterations: plan.iterations,
        runs,
        sweep: SweepSummary {
            target_fm: plan.target_fm,
            cells: sweep_cells,
            minimal_budgets,
        },
    })
}

fn fmt_opt_pct(p: Option<f64>) -> String {
    p.map(|v| v.to_string()).unwrap_or_default()
}

/// Write `report.json`, `iterations.csv` and `sweep.csv` into `dir`, plus
/// `selections.csv` when `log_selections` is set. Output is byte-stable for
/// a byte-equal report.
pub fn emit_report(dir: impl AsRef<Path>, report: &Report, log_selections: bool) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;

    let json = serde_json::to_string_pretty(report)?;
    let mut f = std::fs::File::create(dir.join("report.json"))?;
    f.write_all(json.as_bytes())?;
    f.write_all(b"\n")?;

    let mut iterations = std::fs::File::create(dir.join("iterations.csv"))?;
    writeln!(
        iterations,
        "strategy,budget,budget_pct,seed,iteration,labeled_count,consumed_budget,train_loss,accuracy,precision,recall,fm"
    )?;
    let pos = report.positive_class as usize;
    for run in &report.runs {
        for trace in &run.traces {
            writeln!(
                iterations,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                run.strategy,
                run.budget,
                fmt_opt_pct(run.budget_percent),
                run.seed,
                trace.iteration,
                trace.labeled_count,
                trace.consumed_budget,
                trace.train_loss,
                trace.metrics.accuracy,
                trace.metrics.precision[pos],
                trace.metrics.recall[pos],
                trace.metrics.fm,
            )?;
        }
    }

    let mut sweep = std::fs::File::create(dir.join("sweep.csv"))?;
    writeln!(
        sweep,
        "strategy,budget,budget_pct,seeds,mean_fm,stddev_fm,mean_accuracy"
    )?;
    for cell in &report.sweep.cells {
        writeln!(
            sweep,
            "{},{},{},{},{},{},{}",
            cell.strategy,
            cell.budget,
            fmt_opt_pct(cell.budget_percent),
            cell.seeds,
            cell.mean_fm,
            cell.stddev_fm,
            cell.mean_accuracy,
        )?;
    }

    if log_selections {
        let mut selections = std::fs::File::create(dir.join("selections.csv"))?;
        writeln!(
            selections,
            "strategy,budget,seed,iteration,id,group,score,marginal_gain"
        )?;
        for run in &report.runs {
            for trace in &run.traces {
                for pick in &trace.selected {
                    writeln!(
                        selections,
                        "{},{},{},{},{},{},{},{}",
                        run.strategy,
                        run.budget,
                        run.seed,
                        trace.iteration,
                        pick.id,
                        pick.group,
                        pick.score,
                        pick.marginal_gain,
                    )?;
                }
            }
        }
    }
    Ok(())
}
