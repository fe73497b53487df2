//! Downstream evaluation: build classification / regression / forecasting
//! datasets from imputed samples and score them with small deterministic
//! models (closed-form ridge regression, full-batch logistic regression).
//!
//! The "no imputation" comparator zero-fills the corrupted tensor and
//! concatenates the observation mask as extra features.

use ndarray::{Array1, Array2, Array3, Axis};

use crate::core::GroundSet;
use crate::error::{Error, Result};
use crate::metrics::{self, MetricReport};

/// Downstream task families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Classification,
    Regression,
    Forecasting,
}

/// Downstream model families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Ridge,
    LogReg,
}

/// Downstream protocol description.
#[derive(Debug, Clone)]
pub struct TaskSpec {
    pub task: Task,
    /// Required for regression and forecasting.
    pub target_feature: Option<String>,
    /// Forecast horizon (steps held out at the end of each sample).
    pub horizon: usize,
    pub model: ModelKind,
    pub ridge_lambda: f64,
    pub logreg_learning_rate: f64,
    pub logreg_epochs: usize,
}

impl TaskSpec {
    pub fn regression(target_feature: impl Into<String>) -> Self {
        TaskSpec {
            task: Task::Regression,
            target_feature: Some(target_feature.into()),
            horizon: 5,
            model: ModelKind::Ridge,
            ridge_lambda: 1e-3,
            logreg_learning_rate: 1e-3,
            logreg_epochs: 200,
        }
    }

    pub fn forecasting(target_feature: impl Into<String>) -> Self {
        TaskSpec {
            task: Task::Forecasting,
            ..TaskSpec::regression(target_feature)
        }
    }

    pub fn classification() -> Self {
        TaskSpec {
            task: Task::Classification,
            target_feature: None,
            horizon: 5,
            model: ModelKind::LogReg,
            ridge_lambda: 1e-3,
            logreg_learning_rate: 1e-3,
            logreg_epochs: 200,
        }
    }
}

/// A flattened supervised dataset: N rows of F features and K targets.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskDataset {
    pub features: Array2<f64>,
    pub targets: Array2<f64>,
}

fn target_index(feature_names: &[String], spec: &TaskSpec) -> Result<usize> {
    let name = spec.target_feature.as_deref().ok_or_else(|| {
        Error::InvalidInput("task needs a target feature but none was given".into())
    })?;
    feature_names
        .iter()
        .position(|f| f == name)
        .ok_or_else(|| Error::InvalidInput(format!("target feature {name:?} not found")))
}

/// Build the task dataset from an imputed tensor.
///
/// * classification: features are the flattened sample (T*D), targets the labels;
/// * regression: features are the flattened sample without the target feature
///   (T*(D-1)), targets the full target trajectory (T);
/// * forecasting: features are the first T-h steps of the non-target features
///   ((T-h)*(D-1)), targets the last h steps of the target feature (h).
pub fn build_task_dataset(
    imputed: &Array3<f64>,
    labels: Option<&[f64]>,
    spec: &TaskSpec,
    feature_names: &[String],
) -> Result<TaskDataset> {
    let (n, t, d) = imputed.dim();
    match spec.task {
        Task::Classification => {
            let labels = labels.ok_or_else(|| {
                Error::InvalidInput("classification needs labels but none were given".into())
            })?;
            if labels.len() != n {
                return Err(Error::ShapeMismatch(format!(
                    "{} labels vs {n} samples",
                    labels.len()
                )));
            }
            let features = flatten_samples(imputed, 0, t, None);
            let targets =
                Array2::from_shape_vec((n, 1), labels.to_vec()).expect("n x 1 labels");
            Ok(TaskDataset { features, targets })
        }
        Task::Regression => {
            let target = target_index(feature_names, spec)?;
            if d < 2 {
                return Err(Error::InvalidInput(
                    "regression needs at least one non-target feature".into(),
                ));
            }
            let features = flatten_samples(imputed, 0, t, Some(target));
            let targets = Array2::from_shape_fn((n, t), |(i, j)| imputed[[i, j, target]]);
            Ok(TaskDataset { features, targets })
        }
        Task::Forecasting => {
            let target = target_index(feature_names, spec)?;
            if spec.horizon == 0 || spec.horizon >= t {
                return Err(Error::InvalidInput(format!(
                    "forecast horizon must lie in [1, {}), got {}",
                    t, spec.horizon
                )));
            }
            if d < 2 {
                return Err(Error::InvalidInput(
                    "forecasting needs at least one non-target feature".into(),
                ));
            }
            let features = flatten_samples(imputed, 0, t - spec.horizon, Some(target));
            let targets = Array2::from_shape_fn((n, spec.horizon), |(i, j)| {
                imputed[[i, t - spec.horizon + j, target]]
            });
            Ok(TaskDataset { features, targets })
        }
    }
}

/// Dataset for scoring a route fairly: features come from the route's own
/// tensor (imputed or zero-filled), targets from the original values so every
/// route is measured against the same ground truth. Cells that were missing
/// before grinding have no truth and fall back to the route's value.
pub fn build_evaluation_dataset(
    features_from: &Array3<f64>,
    ground: &GroundSet,
    labels: Option<&[f64]>,
    spec: &TaskSpec,
    feature_names: &[String],
) -> Result<TaskDataset> {
    let features = build_task_dataset(features_from, labels, spec, feature_names)?.features;
    let mut target_tensor = features_from.clone();
    for ((i, j, k), v) in target_tensor.indexed_iter_mut() {
        let originally_observed = ground.corrupted().mask()[[i, j, k]] == 1
            || ground.indicating_mask()[[i, j, k]] == 1;
        if originally_observed {
            *v = ground.truth()[[i, j, k]];
        }
    }
    let targets = build_task_dataset(&target_tensor, labels, spec, feature_names)?.targets;
    Ok(TaskDataset { features, targets })
}

/// Zero-fill comparator: corrupted values with missing cells set to zero,
/// with the observation mask appended as extra features. Always runnable.
pub fn build_baseline_dataset(
    ground: &GroundSet,
    labels: Option<&[f64]>,
    spec: &TaskSpec,
    feature_names: &[String],
) -> Result<TaskDataset> {
    let zero_filled = ground.corrupted().values_zero_filled();
    let plain = build_task_dataset(&zero_filled, labels, spec, feature_names)?;
    let mask_f = ground.corrupted().mask().mapv(f64::from);
    let mask_part = build_task_dataset(&mask_f, labels, spec, feature_names)?;
    let features = ndarray::concatenate(
        Axis(1),
        &[plain.features.view(), mask_part.features.view()],
    )
    .expect("row counts match");
    // targets come from the zero-filled tensor, mirroring a learner fed raw
    // incomplete data
    Ok(TaskDataset {
        features,
        targets: plain.targets,
    })
}

/// The zero-fill comparator with ground-truth targets, directly comparable
/// against [`build_evaluation_dataset`] on an imputed route.
pub fn build_baseline_evaluation_dataset(
    ground: &GroundSet,
    labels: Option<&[f64]>,
    spec: &TaskSpec,
    feature_names: &[String],
) -> Result<TaskDataset> {
    let features = build_baseline_dataset(ground, labels, spec, feature_names)?.features;
    let zero_filled = ground.corrupted().values_zero_filled();
    let targets =
        build_evaluation_dataset(&zero_filled, ground, labels, spec, feature_names)?.targets;
    Ok(TaskDataset { features, targets })
}

fn flatten_samples(
    tensor: &Array3<f64>,
    start_step: usize,
    end_step: usize,
    skip_feature: Option<usize>,
) -> Array2<f64> {
    let (n, _, d) = tensor.dim();
    let kept: Vec<usize> = (0..d).filter(|&k| Some(k) != skip_feature).collect();
    let f = (end_step - start_step) * kept.len();
    let mut out = Array2::zeros((n, f));
    for i in 0..n {
        let mut col = 0;
        for j in start_step..end_step {
            for &k in &kept {
                out[[i, col]] = tensor[[i, j, k]];
                col += 1;
            }
        }
    }
    out
}

/// Linear model with one weight column per target and an unpenalized intercept.
#[derive(Debug, Clone)]
pub struct LinearModel {
    pub weights: Array2<f64>, // [F x K]
    pub intercept: Array1<f64>, // [K]
}

impl LinearModel {
    pub fn predict(&self, features: &Array2<f64>) -> Array2<f64> {
        let mut out = features.dot(&self.weights);
        for mut row in out.rows_mut() {
            row += &self.intercept;
        }
        out
    }
}

/// Closed-form ridge regression, solved per target column on centered data so
/// the intercept is unpenalized. Constant (zero-variance) feature columns get
/// weight zero; if the regularized normal matrix is still singular at
/// lambda = 0 the fit is rejected with a suggestion to set lambda > 0.
pub fn fit_ridge(features: &Array2<f64>, targets: &Array2<f64>, lambda: f64) -> Result<LinearModel> {
    if lambda < 0.0 {
        return Err(Error::InvalidInput("ridge lambda must be >= 0".into()));
    }
    let (n, f) = features.dim();
    if targets.nrows() != n {
        return Err(Error::ShapeMismatch(format!(
            "{n} feature rows vs {} target rows",
            targets.nrows()
        )));
    }
    if n == 0 {
        return Err(Error::InvalidInput("ridge needs at least one row".into()));
    }
    let k = targets.ncols();
    let feat_mean: Array1<f64> = features.mean_axis(Axis(0)).expect("n >= 1");
    let target_mean: Array1<f64> = targets.mean_axis(Axis(0)).expect("n >= 1");

    let mut centered = features.clone();
    for mut row in centered.rows_mut() {
        row -= &feat_mean;
    }
    // constant columns carry no signal once the intercept absorbs them
    let active: Vec<usize> = (0..f)
        .filter(|&c| centered.column(c).iter().any(|&v| v.abs() > 1e-12))
        .collect();
    let mut weights = Array2::zeros((f, k));
    if !active.is_empty() {
        let xa = Array2::from_shape_fn((n, active.len()), |(i, j)| centered[[i, active[j]]]);
        let mut normal = xa.t().dot(&xa);
        for i in 0..active.len() {
            normal[[i, i]] += lambda;
        }
        let mut yc = targets.clone();
        for mut row in yc.rows_mut() {
            row -= &target_mean;
        }
        let rhs = xa.t().dot(&yc);
        let solved = solve_linear_system(normal, rhs).ok_or_else(|| {
            Error::InvalidInput(
                "normal matrix is singular at lambda = 0; set lambda > 0".into(),
            )
        })?;
        for (j, &col) in active.iter().enumerate() {
            for kk in 0..k {
                weights[[col, kk]] = solved[[j, kk]];
            }
        }
    }
    let intercept = &target_mean - &feat_mean.dot(&weights);
    Ok(LinearModel { weights, intercept })
}

/// Gaussian elimination with partial pivoting; returns None when the matrix
/// is numerically singular.
fn solve_linear_system(mut a: Array2<f64>, mut b: Array2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    let k = b.ncols();
    let scale: f64 = a.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1e-300);
    for col in 0..n {
        let mut pivot = col;
        for row in col + 1..n {
            if a[[row, col]].abs() > a[[pivot, col]].abs() {
                pivot = row;
            }
        }
        if a[[pivot, col]].abs() < 1e-10 * scale {
            return None;
        }
        if pivot != col {
            for j in 0..n {
                a.swap([col, j], [pivot, j]);
            }
            for j in 0..k {
                b.swap([col, j], [pivot, j]);
            }
        }
        let diag = a[[col, col]];
        for row in col + 1..n {
            let factor = a[[row, col]] / diag;
            if factor == 0.0 {
                continue;
            }
            for j in col..n {
                a[[row, j]] -= factor * a[[col, j]];
            }
            for j in 0..k {
                b[[row, j]] -= factor * b[[col, j]];
            }
        }
    }
    for col in (0..n).rev() {
        for j in 0..k {
            let mut sum = b[[col, j]];
            for c in col + 1..n {
                sum -= a[[col, c]] * b[[c, j]];
            }
            b[[col, j]] = sum / a[[col, col]];
        }
    }
    Some(b)
}

/// Binary linear classifier trained by full-batch gradient descent on the
/// logistic loss from zero initialization. Deterministic for any seed.
#[derive(Debug, Clone)]
pub struct LogisticModel {
    pub weights: Array1<f64>,
    pub intercept: f64,
}

impl LogisticModel {
    /// Probability scores in (0, 1).
    pub fn scores(&self, features: &Array2<f64>) -> Vec<f64> {
        features
            .rows()
            .into_iter()
            .map(|row| sigmoid(row.dot(&self.weights) + self.intercept))
            .collect()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn fit_logreg(
    features: &Array2<f64>,
    labels: &[f64],
    learning_rate: f64,
    epochs: usize,
    _seed: u64,
) -> Result<LogisticModel> {
    let (n, f) = features.dim();
    if labels.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "{} labels vs {n} rows",
            labels.len()
        )));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1.0).count();
    if n_pos == 0 || n_pos == n {
        return Err(Error::InvalidInput(
            "logistic regression needs both classes present".into(),
        ));
    }
    let mut model = LogisticModel {
        weights: Array1::zeros(f),
        intercept: 0.0,
    };
    for _ in 0..epochs {
        let mut grad_w = Array1::<f64>::zeros(f);
        let mut grad_b = 0.0;
        for (row, &label) in features.rows().into_iter().zip(labels.iter()) {
            let p = sigmoid(row.dot(&model.weights) + model.intercept);
            let err = p - label;
            grad_w.scaled_add(err, &row);
            grad_b += err;
        }
        let inv_n = 1.0 / n as f64;
        model.weights.scaled_add(-learning_rate * inv_n, &grad_w);
        model.intercept -= learning_rate * inv_n * grad_b;
    }
    Ok(model)
}

/// Mean logistic loss of a model on a dataset, exposed for monotonicity checks.
pub fn logistic_loss(model: &LogisticModel, features: &Array2<f64>, labels: &[f64]) -> f64 {
    let mut sum = 0.0;
    for (row, &label) in features.rows().into_iter().zip(labels.iter()) {
        let z = row.dot(&model.weights) + model.intercept;
        // log(1 + exp(-y z)) with y in {-1, +1}
        let signed = if label == 1.0 { z } else { -z };
        sum += (1.0 + (-signed).exp()).ln();
    }
    sum / labels.len() as f64
}

/// Outcome of a downstream evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum DownstreamScore {
    Regression(MetricReport),
    Classification { roc_auc: f64, pr_auc: f64 },
}

/// A fitted downstream model of either family.
#[derive(Debug, Clone)]
pub enum DownstreamModel {
    Ridge(LinearModel),
    LogReg(LogisticModel),
}

/// Fit the model the spec asks for on a task dataset.
pub fn fit_downstream(dataset: &TaskDataset, spec: &TaskSpec, seed: u64) -> Result<DownstreamModel> {
    match spec.model {
        ModelKind::Ridge => Ok(DownstreamModel::Ridge(fit_ridge(
            &dataset.features,
            &dataset.targets,
            spec.ridge_lambda,
        )?)),
        ModelKind::LogReg => {
            let labels: Vec<f64> = dataset.targets.column(0).to_vec();
            Ok(DownstreamModel::LogReg(fit_logreg(
                &dataset.features,
                &labels,
                spec.logreg_learning_rate,
                spec.logreg_epochs,
                seed,
            )?))
        }
    }
}

/// Score a fitted model on a task dataset: masked errors with an all-ones
/// mask for regression/forecasting, ranking metrics for classification.
pub fn evaluate_downstream(
    model: &DownstreamModel,
    dataset: &TaskDataset,
    spec: &TaskSpec,
) -> Result<DownstreamScore> {
    match (model, spec.task) {
        (DownstreamModel::Ridge(m), Task::Regression | Task::Forecasting) => {
            let predictions = m.predict(&dataset.features);
            let (n, k) = predictions.dim();
            let pred3 = predictions.into_shape_with_order((n, k, 1)).unwrap();
            let target3 = dataset
                .targets
                .clone()
                .into_shape_with_order((n, k, 1))
                .unwrap();
            let mask = Array3::from_elem((n, k, 1), 1u8);
            let report = metrics::metric_report(&pred3, &target3, &mask)?;
            Ok(DownstreamScore::Regression(report))
        }
        (DownstreamModel::LogReg(m), Task::Classification) => {
            let scores = m.scores(&dataset.features);
            let labels: Vec<u8> = dataset
                .targets
                .column(0)
                .iter()
                .map(|&l| u8::from(l == 1.0))
                .collect();
            Ok(DownstreamScore::Classification {
                roc_auc: metrics::roc_auc(&scores, &labels)?,
                pr_auc: metrics::pr_auc(&scores, &labels)?,
            })
        }
        _ => Err(Error::InvalidInput(
            "model family does not match the task".into(),
        )),
    }
}
