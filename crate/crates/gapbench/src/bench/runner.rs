//! Plan execution: preprocess each dataset once, optionally tune trainable
//! imputers, then run every (dataset x grind x imputer x seed) cell on a
//! bounded worker pool. Results come back in deterministic lexicographic
//! cell order regardless of parallelism; per-cell randomness is keyed by
//! cell identity, so worker count never changes the numbers.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;

use crate::core::GroundSet;
use crate::downstream::Task;
use crate::error::{Error, Result};
use crate::grinder::{grind, GrindSpec};
use crate::imputers::{fit_adapted_linear, impute, ImputerSpec, TrainedImputer};
use crate::metrics;
use crate::pipeline::{prepare, PreparedDataset};
use crate::rng::derive_key;

use super::config::{ExperimentPlan, NamedGrind, NamedImputer, NamedTask};
use super::hpo::{random_search, HpoSpace, SearchOutcome};
use super::results::{CellStatus, ExperimentRecord};

/// Environment variable read by the CLI for the worker count.
pub const WORKERS_ENV: &str = "GAPBENCH_WORKERS";

const SPLIT_TRAIN: u64 = 0;
const SPLIT_VAL: u64 = 1;
const SPLIT_TEST: u64 = 2;

fn grind_split(
    prepared: &PreparedDataset,
    named: &NamedGrind,
    seed: u64,
    split: u64,
) -> Result<GroundSet> {
    let set = match split {
        SPLIT_TRAIN => &prepared.train,
        SPLIT_VAL => &prepared.val,
        _ => &prepared.test,
    };
    let spec = GrindSpec {
        pattern: named.pattern,
        rate: named.rate,
        seq_len: named.seq_len,
        block_len: named.block_len,
        block_width: named.block_width,
        seed: derive_key(seed, &[split]),
    };
    grind(set, &spec)
}

/// Execute one plan cell against an already prepared dataset. Failures are
/// captured in the record's status and never panic outward.
pub fn run_cell(
    prepared: &PreparedDataset,
    dataset_name: &str,
    named_grind: &NamedGrind,
    named_imputer: &NamedImputer,
    tuned_spec: Option<&ImputerSpec>,
    downstream: &[NamedTask],
    seed: u64,
) -> ExperimentRecord {
    let mut record = ExperimentRecord {
        dataset: dataset_name.to_string(),
        pattern: named_grind.pattern.to_string(),
        rate: named_grind.rate,
        imputer: named_imputer.name.clone(),
        seed,
        status: CellStatus::Ok,
        metrics: None,
        fit_time_s: 0.0,
        infer_time_s: 0.0,
        n_params: 0,
        downstream: Vec::new(),
    };
    match run_cell_inner(
        prepared,
        named_grind,
        named_imputer,
        tuned_spec,
        downstream,
        seed,
        &mut record,
    ) {
        Ok(()) => record,
        Err(e) => {
            record.status = CellStatus::Failed(e.to_string());
            record.metrics = None;
            record
        }
    }
}

fn run_cell_inner(
    prepared: &PreparedDataset,
    named_grind: &NamedGrind,
    named_imputer: &NamedImputer,
    tuned_spec: Option<&ImputerSpec>,
    downstream: &[NamedTask],
    seed: u64,
    record: &mut ExperimentRecord,
) -> Result<()> {
    let spec = tuned_spec.unwrap_or(&named_imputer.spec);

    let train_ground = grind_split(prepared, named_grind, seed, SPLIT_TRAIN)?;
    let test_ground = grind_split(prepared, named_grind, seed, SPLIT_TEST)?;

    // fit (trainable imputers only)
    let model: Option<TrainedImputer> = if spec.kind.is_trainable() {
        let val_ground = grind_split(prepared, named_grind, seed, SPLIT_VAL)?;
        let started = Instant::now();
        let fitted = fit_adapted_linear(&train_ground, &val_ground, spec, seed)?;
        record.fit_time_s = started.elapsed().as_secs_f64();
        record.n_params = fitted.n_params;
        Some(fitted)
    } else {
        None
    };

    // impute the whole test split and score over its indicating mask
    let started = Instant::now();
    let imputed_test = impute(spec, &test_ground, Some(&prepared.train), model.as_ref())?;
    record.infer_time_s = started.elapsed().as_secs_f64();
    record.metrics = Some(metrics::metric_report(
        &imputed_test,
        test_ground.truth(),
        test_ground.indicating_mask(),
    )?);

    // optional downstream tasks: fit on imputed train, evaluate on imputed test
    let applicable: Vec<&NamedTask> = downstream
        .iter()
        .filter(|t| task_applies(t, prepared))
        .collect();
    if !applicable.is_empty() {
        let imputed_train = impute(spec, &train_ground, Some(&prepared.train), model.as_ref())?;
        for task in applicable {
            // features from the imputed tensors, targets from ground truth
            let train_data = crate::downstream::build_evaluation_dataset(
                &imputed_train,
                &train_ground,
                prepared.train_labels.as_deref(),
                &task.spec,
                &prepared.feature_names,
            )?;
            let test_data = crate::downstream::build_evaluation_dataset(
                &imputed_test,
                &test_ground,
                prepared.test_labels.as_deref(),
                &task.spec,
                &prepared.feature_names,
            )?;
            let model = crate::downstream::fit_downstream(&train_data, &task.spec, seed)?;
            let score = crate::downstream::evaluate_downstream(&model, &test_data, &task.spec)?;
            record.downstream.push((task.name.clone(), score));
        }
    }
    Ok(())
}

fn task_applies(task: &NamedTask, prepared: &PreparedDataset) -> bool {
    match task.spec.task {
        Task::Classification => prepared.train_labels.is_some() && prepared.test_labels.is_some(),
        Task::Regression | Task::Forecasting => task
            .spec
            .target_feature
            .as_ref()
            .is_some_and(|t| prepared.feature_names.contains(t)),
    }
}

/// Tune a trainable imputer for one (dataset, grind) setting: random search
/// scored by validation MAE on the plan's first seed. The base imputer's
/// epoch budget and patience carry over into the search space.
pub fn tune_imputer(
    prepared: &PreparedDataset,
    named_grind: &NamedGrind,
    base: &NamedImputer,
    budget: usize,
    seed: u64,
) -> Result<SearchOutcome> {
    let train_ground = grind_split(prepared, named_grind, seed, SPLIT_TRAIN)?;
    let val_ground = grind_split(prepared, named_grind, seed, SPLIT_VAL)?;
    let mut space = HpoSpace::default();
    if let Some(hyper) = &base.spec.hyperparameters {
        space.epochs = hyper.epochs;
        space.patience = hyper.patience;
    }
    random_search(
        &space,
        budget,
        |hyper| {
            let spec = ImputerSpec::adapted_linear(hyper.clone());
            let model = fit_adapted_linear(&train_ground, &val_ground, &spec, seed)?;
            let best = model
                .train_history
                .get(model.best_epoch)
                .map(|e| e.val_mae)
                .unwrap_or(f64::INFINITY);
            Ok(best)
        },
        derive_key(seed, &[0x4850]),
    )
}

/// Run every cell of the plan. `workers` bounds the pool (0 uses the rayon
/// default). The output order is the lexicographic (dataset, grind, imputer,
/// seed) plan order and the metric columns are identical for any worker
/// count.
pub fn run_plan(plan: &ExperimentPlan, workers: usize) -> Result<Vec<ExperimentRecord>> {
    // preprocess each dataset once, sequentially and deterministically
    let prepared: Vec<std::result::Result<PreparedDataset, String>> = plan
        .recipes
        .iter()
        .map(|recipe| prepare(recipe).map_err(|e| e.to_string()))
        .collect();

    // tune trainable imputers that ask for it, once per (dataset, grind)
    let mut tuned: BTreeMap<(usize, usize, usize), ImputerSpec> = BTreeMap::new();
    for (ii, imp) in plan.imputers.iter().enumerate() {
        if imp.hpo_budget == 0 || !imp.spec.kind.is_trainable() {
            continue;
        }
        for (di, recipe) in plan.recipes.iter().enumerate() {
            let Ok(prep) = prepared[di].as_ref() else {
                continue;
            };
            for (gi, g) in plan.grinds.iter().enumerate() {
                let outcome = tune_imputer(prep, g, imp, imp.hpo_budget, plan.seeds[0])?;
                log::info!(
                    "hpo {}/{}/{}: best val MAE {:.4} at trial {}",
                    recipe.name,
                    g.name,
                    imp.name,
                    outcome.best_val_mae,
                    outcome.best_index
                );
                tuned.insert((ii, di, gi), outcome.best);
            }
        }
    }

    // lexicographic cell order: dataset, grind, imputer, seed
    let mut cells = Vec::with_capacity(plan.n_cells());
    for di in 0..plan.recipes.len() {
        for gi in 0..plan.grinds.len() {
            for ii in 0..plan.imputers.len() {
                for si in 0..plan.seeds.len() {
                    cells.push((di, gi, ii, si));
                }
            }
        }
    }

    let execute = |&(di, gi, ii, si): &(usize, usize, usize, usize)| -> ExperimentRecord {
        let recipe = &plan.recipes[di];
        let named_grind = &plan.grinds[gi];
        let named_imputer = &plan.imputers[ii];
        let seed = plan.seeds[si];
        match &prepared[di] {
            Ok(prep) => run_cell(
                prep,
                &recipe.name,
                named_grind,
                named_imputer,
                tuned.get(&(ii, di, gi)),
                &plan.downstream,
                seed,
            ),
            Err(reason) => ExperimentRecord {
                dataset: recipe.name.clone(),
                pattern: named_grind.pattern.to_string(),
                rate: named_grind.rate,
                imputer: named_imputer.name.clone(),
                seed,
                status: CellStatus::Failed(reason.clone()),
                metrics: None,
                fit_time_s: 0.0,
                infer_time_s: 0.0,
                n_params: 0,
                downstream: Vec::new(),
            },
        }
    };

    let records: Vec<ExperimentRecord> = if workers == 1 {
        cells.iter().map(execute).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
        pool.install(|| cells.par_iter().map(execute).collect())
    };
    Ok(records)
}
