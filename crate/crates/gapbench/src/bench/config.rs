//! Experiment configuration: a TOML file with `[dataset.*]`, `[grind.*]`,
//! `[imputer.*]`, optional `[downstream.*]`, and `[run]` sections, validated
//! into an executable plan. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::downstream::{ModelKind, Task, TaskSpec};
use crate::error::{Error, Result};
use crate::grinder::Pattern;
use crate::imputers::{Hyperparameters, ImputerKind, ImputerSpec, StatSource};
use crate::pipeline::{DatasetRecipe, SplitRule};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    dataset: BTreeMap<String, RawDataset>,
    grind: BTreeMap<String, RawGrind>,
    imputer: BTreeMap<String, RawImputer>,
    #[serde(default)]
    downstream: BTreeMap<String, RawDownstream>,
    run: RawRun,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDataset {
    /// Name of a built-in recipe ("ett_h1"); mutually exclusive with the
    /// split/window keys below.
    recipe: Option<String>,
    source: PathBuf,
    window: Option<usize>,
    /// [train_fraction, val_fraction]
    split_fractions: Option<[f64; 2]>,
    /// [train_end, val_end] as ISO-8601 date-times or epoch seconds.
    split_instants: Option<[String; 2]>,
    target_feature: Option<String>,
    label_column: Option<String>,
    drop_last_window: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrind {
    pattern: Pattern,
    rate: f64,
    seq_len: Option<usize>,
    block_len: Option<usize>,
    block_width: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawImputer {
    kind: ImputerKind,
    stat_source: Option<StatSource>,
    learning_rate: Option<f64>,
    epochs: Option<usize>,
    patience: Option<usize>,
    batch_size: Option<usize>,
    mit_rate: Option<f64>,
    w_ort: Option<f64>,
    w_mit: Option<f64>,
    ma_window: Option<usize>,
    shared_weights: Option<bool>,
    /// When positive, tune hyperparameters by random search with this budget
    /// before the plan's cells run.
    hpo_budget: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDownstream {
    task: String,
    target_feature: Option<String>,
    horizon: Option<usize>,
    model: Option<String>,
    ridge_lambda: Option<f64>,
    logreg_learning_rate: Option<f64>,
    logreg_epochs: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    seeds: Vec<u64>,
    output: Option<PathBuf>,
    format: Option<String>,
}

/// Grind settings as configured (the per-cell seed comes from the plan).
#[derive(Debug, Clone)]
pub struct NamedGrind {
    pub name: String,
    pub pattern: Pattern,
    pub rate: f64,
    pub seq_len: Option<usize>,
    pub block_len: Option<usize>,
    pub block_width: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct NamedImputer {
    pub name: String,
    pub spec: ImputerSpec,
    pub hpo_budget: usize,
}

#[derive(Debug, Clone)]
pub struct NamedTask {
    pub name: String,
    pub spec: TaskSpec,
}

/// Output file format for results.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Jsonl,
}

/// A fully validated experiment matrix: the cell count is the product of the
/// dataset, grind, imputer, and seed list lengths.
#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub recipes: Vec<DatasetRecipe>,
    pub grinds: Vec<NamedGrind>,
    pub imputers: Vec<NamedImputer>,
    pub seeds: Vec<u64>,
    pub downstream: Vec<NamedTask>,
    pub output: PathBuf,
    pub format: OutputFormat,
}

impl ExperimentPlan {
    pub fn n_cells(&self) -> usize {
        self.recipes.len() * self.grinds.len() * self.imputers.len() * self.seeds.len()
    }
}

/// Parse and validate a config. Relative source/output paths resolve against
/// `base_dir` (normally the config file's directory).
pub fn parse_config(text: &str, base_dir: &Path) -> Result<ExperimentPlan> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;

    if raw.dataset.is_empty() {
        return Err(Error::Config("at least one [dataset.*] is required".into()));
    }
    if raw.grind.is_empty() {
        return Err(Error::Config("at least one [grind.*] is required".into()));
    }
    if raw.imputer.is_empty() {
        return Err(Error::Config("at least one [imputer.*] is required".into()));
    }
    if raw.run.seeds.is_empty() {
        return Err(Error::Config("run.seeds required (non-empty list)".into()));
    }

    let mut recipes = Vec::new();
    for (name, ds) in &raw.dataset {
        recipes.push(dataset_to_recipe(name, ds, base_dir)?);
    }

    let mut grinds = Vec::new();
    for (name, g) in &raw.grind {
        if !(0.0..=1.0).contains(&g.rate) {
            return Err(Error::Config(format!(
                "grind.{name}.rate must lie in [0, 1], got {}",
                g.rate
            )));
        }
        grinds.push(NamedGrind {
            name: name.clone(),
            pattern: g.pattern,
            rate: g.rate,
            seq_len: g.seq_len,
            block_len: g.block_len,
            block_width: g.block_width,
        });
    }

    let mut imputers = Vec::new();
    for (name, imp) in &raw.imputer {
        imputers.push(imputer_to_spec(name, imp)?);
    }

    let mut downstream = Vec::new();
    for (name, task) in &raw.downstream {
        downstream.push(downstream_to_spec(name, task)?);
    }

    let format = match raw.run.format.as_deref() {
        None | Some("csv") => OutputFormat::Csv,
        Some("jsonl") => OutputFormat::Jsonl,
        Some(other) => {
            return Err(Error::Config(format!(
                "run.format must be \"csv\" or \"jsonl\", got {other:?}"
            )))
        }
    };
    let output = raw
        .run
        .output
        .unwrap_or_else(|| PathBuf::from("results.csv"));
    let output = if output.is_relative() {
        base_dir.join(output)
    } else {
        output
    };

    Ok(ExperimentPlan {
        recipes,
        grinds,
        imputers,
        seeds: raw.run.seeds,
        downstream,
        output,
        format,
    })
}

fn dataset_to_recipe(name: &str, ds: &RawDataset, base_dir: &Path) -> Result<DatasetRecipe> {
    let source = if ds.source.is_relative() {
        base_dir.join(&ds.source)
    } else {
        ds.source.clone()
    };
    if let Some(builtin) = &ds.recipe {
        if ds.window.is_some() || ds.split_fractions.is_some() || ds.split_instants.is_some() {
            return Err(Error::Config(format!(
                "dataset.{name}: a built-in recipe fixes window and split; drop those keys"
            )));
        }
        let mut recipe = match builtin.as_str() {
            "ett_h1" => DatasetRecipe::ett_h1(source),
            other => {
                return Err(Error::Config(format!(
                    "dataset.{name}.recipe: unknown built-in recipe {other:?} (available: ett_h1)"
                )))
            }
        };
        recipe.name = name.to_string();
        if let Some(t) = &ds.target_feature {
            recipe.target_feature = Some(t.clone());
        }
        if let Some(l) = &ds.label_column {
            recipe.label_column = Some(l.clone());
        }
        if let Some(d) = ds.drop_last_window {
            recipe.drop_last_window = d;
        }
        return Ok(recipe);
    }

    let window = ds.window.ok_or_else(|| {
        Error::Config(format!("dataset.{name}.window required without a built-in recipe"))
    })?;
    let split = match (&ds.split_fractions, &ds.split_instants) {
        (Some(_), Some(_)) => {
            return Err(Error::Config(format!(
                "dataset.{name}: give split_fractions or split_instants, not both"
            )))
        }
        (Some([train, val]), None) => SplitRule::Fractions {
            train: *train,
            val: *val,
        },
        (None, Some([a, b])) => SplitRule::Instants {
            train_end: parse_instant(name, a)?,
            val_end: parse_instant(name, b)?,
        },
        (None, None) => {
            return Err(Error::Config(format!(
                "dataset.{name}: split_fractions or split_instants required"
            )))
        }
    };
    let recipe = DatasetRecipe {
        name: name.to_string(),
        source,
        split,
        window,
        drop_last_window: ds.drop_last_window.unwrap_or(false),
        target_feature: ds.target_feature.clone(),
        label_column: ds.label_column.clone(),
    };
    recipe.validate()?;
    Ok(recipe)
}

fn parse_instant(dataset: &str, raw: &str) -> Result<i64> {
    let raw = raw.trim();
    if let Ok(dt) = chrono::NaiveDateTime::parse_from_str(raw, "%Y-%m-%d %H:%M:%S") {
        return Ok(dt.and_utc().timestamp());
    }
    if let Ok(dt) = chrono::NaiveDateTime::parse_from_str(raw, "%Y-%m-%dT%H:%M:%S") {
        return Ok(dt.and_utc().timestamp());
    }
    if let Ok(d) = chrono::NaiveDate::parse_from_str(raw, "%Y-%m-%d") {
        return Ok(d.and_hms_opt(0, 0, 0).unwrap().and_utc().timestamp());
    }
    raw.parse::<i64>().map_err(|_| {
        Error::Config(format!(
            "dataset.{dataset}: unparseable split instant {raw:?}"
        ))
    })
}

fn imputer_to_spec(name: &str, imp: &RawImputer) -> Result<NamedImputer> {
    let has_hyper = imp.learning_rate.is_some()
        || imp.epochs.is_some()
        || imp.patience.is_some()
        || imp.batch_size.is_some()
        || imp.mit_rate.is_some()
        || imp.w_ort.is_some()
        || imp.w_mit.is_some()
        || imp.ma_window.is_some()
        || imp.shared_weights.is_some();
    let spec = if imp.kind.is_trainable() {
        let defaults = Hyperparameters::default();
        ImputerSpec {
            kind: imp.kind,
            hyperparameters: Some(Hyperparameters {
                learning_rate: imp.learning_rate.unwrap_or(defaults.learning_rate),
                epochs: imp.epochs.unwrap_or(defaults.epochs),
                patience: imp.patience.unwrap_or(defaults.patience),
                batch_size: imp.batch_size.unwrap_or(defaults.batch_size),
                mit_rate: imp.mit_rate.unwrap_or(defaults.mit_rate),
                w_ort: imp.w_ort.unwrap_or(defaults.w_ort),
                w_mit: imp.w_mit.unwrap_or(defaults.w_mit),
                ma_window: imp.ma_window.unwrap_or(defaults.ma_window),
                shared_weights: imp.shared_weights.unwrap_or(defaults.shared_weights),
            }),
            stat_source: imp.stat_source.unwrap_or_default(),
        }
    } else {
        if has_hyper {
            return Err(Error::Config(format!(
                "imputer.{name}: hyperparameters are only valid for trainable kinds"
            )));
        }
        if imp.hpo_budget.unwrap_or(0) > 0 {
            return Err(Error::Config(format!(
                "imputer.{name}: hpo_budget is only valid for trainable kinds"
            )));
        }
        ImputerSpec {
            kind: imp.kind,
            hyperparameters: None,
            stat_source: imp.stat_source.unwrap_or_default(),
        }
    };
    spec.validate()?;
    Ok(NamedImputer {
        name: name.to_string(),
        spec,
        hpo_budget: imp.hpo_budget.unwrap_or(0),
    })
}

fn downstream_to_spec(name: &str, raw: &RawDownstream) -> Result<NamedTask> {
    let task = match raw.task.as_str() {
        "classification" => Task::Classification,
        "regression" => Task::Regression,
        "forecasting" => Task::Forecasting,
        other => {
            return Err(Error::Config(format!(
                "downstream.{name}.task: unknown task {other:?}"
            )))
        }
    };
    let model = match raw.model.as_deref() {
        None => match task {
            Task::Classification => ModelKind::LogReg,
            _ => ModelKind::Ridge,
        },
        Some("ridge") => ModelKind::Ridge,
        Some("logreg") => ModelKind::LogReg,
        Some(other) => {
            return Err(Error::Config(format!(
                "downstream.{name}.model: unknown model {other:?}"
            )))
        }
    };
    if matches!(task, Task::Regression | Task::Forecasting) && raw.target_feature.is_none() {
        return Err(Error::Config(format!(
            "downstream.{name}: target_feature required for this task"
        )));
    }
    let mut spec = TaskSpec {
        task,
        target_feature: raw.target_feature.clone(),
        horizon: raw.horizon.unwrap_or(5),
        model,
        ridge_lambda: raw.ridge_lambda.unwrap_or(1e-3),
        logreg_learning_rate: raw.logreg_learning_rate.unwrap_or(1e-3),
        logreg_epochs: raw.logreg_epochs.unwrap_or(200),
    };
    if spec.horizon == 0 {
        return Err(Error::Config(format!(
            "downstream.{name}.horizon must be at least 1"
        )));
    }
    if matches!(task, Task::Classification) {
        spec.target_feature = None;
    }
    Ok(NamedTask {
        name: name.to_string(),
        spec,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[dataset.toy]
source = "toy.csv"
window = 4
split_fractions = [0.6, 0.2]

[grind.p]
pattern = "point"
rate = 0.3

[imputer.linear]
kind = "linear"

[run]
seeds = [1]
"#;

    #[test]
    fn minimal_config_one_cell() {
        let plan = parse_config(MINIMAL, Path::new("/base")).unwrap();
        assert_eq!(plan.n_cells(), 1);
        assert_eq!(plan.recipes[0].source, PathBuf::from("/base/toy.csv"));
        assert_eq!(plan.format, OutputFormat::Csv);
    }

    #[test]
    fn unknown_imputer_kind_rejected() {
        let text = MINIMAL.replace("kind = \"linear\"", "kind = \"warp\"");
        let err = parse_config(&text, Path::new(".")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("unknown") && msg.contains("warp"), "{msg}");
    }

    #[test]
    fn missing_seeds_rejected() {
        let text = MINIMAL.replace("seeds = [1]", "");
        let err = parse_config(&text, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("seeds"), "{err}");
        let text2 = MINIMAL.replace("seeds = [1]", "seeds = []");
        let err2 = parse_config(&text2, Path::new(".")).unwrap_err();
        assert!(err2.to_string().contains("seeds"), "{err2}");
    }

    #[test]
    fn unknown_key_rejected_with_path() {
        let text = format!("{MINIMAL}\n[grind.p2]\npattern = \"point\"\nrate = 0.1\nfrobnicate = 3\n");
        let err = parse_config(&text, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("frobnicate"), "{err}");
    }

    #[test]
    fn builtin_recipe_accepted() {
        let text = r#"
[dataset.ett]
recipe = "ett_h1"
source = "ETTh1.csv"

[grind.p]
pattern = "point"
rate = 0.1

[imputer.mean]
kind = "mean"

[run]
seeds = [1, 2, 3]
output = "out.csv"
"#;
        let plan = parse_config(text, Path::new("/cfg")).unwrap();
        assert_eq!(plan.recipes[0].window, 48);
        assert!(plan.recipes[0].drop_last_window);
        assert_eq!(plan.n_cells(), 3);
        assert_eq!(plan.output, PathBuf::from("/cfg/out.csv"));
    }

    #[test]
    fn hyperparameters_rejected_on_naive() {
        let text = MINIMAL.replace("kind = \"linear\"", "kind = \"locf\"\nepochs = 3");
        let err = parse_config(&text, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("trainable"), "{err}");
    }

    #[test]
    fn trainable_gets_defaults() {
        let text = MINIMAL.replace(
            "kind = \"linear\"",
            "kind = \"adapted_linear\"\nlearning_rate = 0.01",
        );
        let plan = parse_config(&text, Path::new(".")).unwrap();
        let hyper = plan.imputers[0].spec.hyperparameters.as_ref().unwrap();
        assert_eq!(hyper.learning_rate, 0.01);
        assert_eq!(hyper.epochs, 200);
        assert_eq!(hyper.ma_window, 25);
    }

    #[test]
    fn bad_rate_rejected() {
        let text = MINIMAL.replace("rate = 0.3", "rate = 1.5");
        assert!(parse_config(&text, Path::new(".")).is_err());
    }

    #[test]
    fn empty_imputer_section_rejected() {
        let text = MINIMAL.replace("[imputer.linear]\nkind = \"linear\"", "[imputer]");
        let err = parse_config(&text, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("imputer"), "{err}");
    }

    #[test]
    fn split_instants_parse() {
        let text = MINIMAL.replace(
            "split_fractions = [0.6, 0.2]",
            "split_instants = [\"2017-09-01 00:00:00\", \"2018-02-01 00:00:00\"]",
        );
        let plan = parse_config(&text, Path::new(".")).unwrap();
        match plan.recipes[0].split {
            SplitRule::Instants { train_end, val_end } => {
                assert!(train_end < val_end);
            }
            _ => panic!("expected instants"),
        }
    }

    #[test]
    fn downstream_section_parses() {
        let text = format!(
            "{MINIMAL}\n[downstream.reg]\ntask = \"regression\"\ntarget_feature = \"OT\"\n"
        );
        let plan = parse_config(&text, Path::new(".")).unwrap();
        assert_eq!(plan.downstream.len(), 1);
        assert_eq!(plan.downstream[0].spec.model, ModelKind::Ridge);
    }
}
