//! The imputation method zoo: constant-statistic fills (mean/median), last
//! observation carried forward, per-channel linear interpolation, and a
//! trainable imputer that re-targets a decomposition-linear forecasting
//! backbone to reconstruction with a joint observed/masked loss.
//!
//! Every imputer returns the combined tensor: observed cells pass through
//! untouched, only unobserved cells take estimated values.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use ndarray::{Array1, Array3};
use serde::{Deserialize, Serialize};

use crate::core::{combine, GroundSet, SampleSet};
use crate::error::{Error, Result};
use crate::nn::{adam_step, loss_and_gradient, AdamState, BackboneParams, TrainingBatch};
use crate::rng::CounterRng;

/// Which imputer to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImputerKind {
    Mean,
    Median,
    Locf,
    Linear,
    AdaptedLinear,
}

impl ImputerKind {
    pub fn is_trainable(&self) -> bool {
        matches!(self, ImputerKind::AdaptedLinear)
    }
}

impl std::fmt::Display for ImputerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ImputerKind::Mean => "mean",
            ImputerKind::Median => "median",
            ImputerKind::Locf => "locf",
            ImputerKind::Linear => "linear",
            ImputerKind::AdaptedLinear => "adapted_linear",
        };
        f.write_str(s)
    }
}

/// Where mean/median imputers take their per-feature statistics from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatSource {
    /// Observed cells of the set being imputed. This is how the reference
    /// naive imputers behave and what the published baseline numbers reflect.
    #[default]
    SelfSet,
    /// Observed cells of the training split.
    Train,
}

/// Hyperparameters of the trainable imputer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub learning_rate: f64,
    pub epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    /// Fraction of visible cells re-masked per batch for the imputation term.
    pub mit_rate: f64,
    pub w_ort: f64,
    pub w_mit: f64,
    /// Moving-average window of the trend/seasonal decomposition.
    pub ma_window: usize,
    /// Share backbone weights across features.
    pub shared_weights: bool,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            learning_rate: 1e-3,
            epochs: 200,
            patience: 10,
            batch_size: 32,
            mit_rate: 0.2,
            w_ort: 1.0,
            w_mit: 1.0,
            ma_window: 25,
            shared_weights: true,
        }
    }
}

/// An imputer choice plus its configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ImputerSpec {
    pub kind: ImputerKind,
    /// Present iff the kind is trainable.
    pub hyperparameters: Option<Hyperparameters>,
    /// Statistic source for mean/median.
    pub stat_source: StatSource,
}

impl ImputerSpec {
    pub fn naive(kind: ImputerKind) -> Result<Self> {
        if kind.is_trainable() {
            return Err(Error::InvalidInput(format!(
                "{kind} requires hyperparameters"
            )));
        }
        Ok(ImputerSpec {
            kind,
            hyperparameters: None,
            stat_source: StatSource::default(),
        })
    }

    pub fn adapted_linear(hyper: Hyperparameters) -> Self {
        ImputerSpec {
            kind: ImputerKind::AdaptedLinear,
            hyperparameters: Some(hyper),
            stat_source: StatSource::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.kind.is_trainable(), &self.hyperparameters) {
            (true, None) => Err(Error::Config(format!(
                "imputer {} needs hyperparameters",
                self.kind
            ))),
            (false, Some(_)) => Err(Error::Config(format!(
                "imputer {} takes no hyperparameters",
                self.kind
            ))),
            _ => Ok(()),
        }
    }
}

/// Per-feature statistic over the observed cells of a sample set; features
/// with no observed cell fall back to the given default.
fn feature_statistic(source: &SampleSet, kind: ImputerKind, fallback: f64) -> Vec<f64> {
    let (n, t, d) = source.dim();
    let mut stats = vec![fallback; d];
    for (feat, stat) in stats.iter_mut().enumerate() {
        let mut observed: Vec<f64> = Vec::new();
        for i in 0..n {
            for j in 0..t {
                if source.mask()[[i, j, feat]] == 1 {
                    observed.push(source.values()[[i, j, feat]]);
                }
            }
        }
        if observed.is_empty() {
            continue;
        }
        *stat = match kind {
            ImputerKind::Mean => observed.iter().sum::<f64>() / observed.len() as f64,
            ImputerKind::Median => {
                observed.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let mid = observed.len() / 2;
                if observed.len() % 2 == 1 {
                    observed[mid]
                } else {
                    (observed[mid - 1] + observed[mid]) / 2.0
                }
            }
            _ => unreachable!("constant-statistic imputer"),
        };
    }
    stats
}

/// Fill every cell of feature `d` with the per-feature mean or median of the
/// statistics source's observed cells, then combine with the corrupted set.
/// Fully-missing features fill zero.
pub fn impute_constant_stat(
    ground: &GroundSet,
    stats_source: &SampleSet,
    kind: ImputerKind,
) -> Result<Array3<f64>> {
    if !matches!(kind, ImputerKind::Mean | ImputerKind::Median) {
        return Err(Error::InvalidInput(format!(
            "impute_constant_stat handles mean and median, not {kind}"
        )));
    }
    if stats_source.n_features() != ground.corrupted().n_features() {
        return Err(Error::ShapeMismatch(format!(
            "stats source has {} features, ground set has {}",
            stats_source.n_features(),
            ground.corrupted().n_features()
        )));
    }
    let stats = feature_statistic(stats_source, kind, 0.0);
    let (n, t, d) = ground.dim();
    let reconstruction = Array3::from_shape_fn((n, t, d), |(_, _, k)| stats[k]);
    combine(ground.corrupted(), &reconstruction)
}

/// Last observation carried forward per (sample, feature) channel; leading
/// gaps take the first subsequent observation, entirely missing channels
/// fill zero.
pub fn impute_locf(ground: &GroundSet) -> Array3<f64> {
    let (n, t, d) = ground.dim();
    let values = ground.corrupted().values();
    let mask = ground.corrupted().mask();
    let mut out = values.clone();
    for i in 0..n {
        for k in 0..d {
            let mut last = f64::NAN;
            for j in 0..t {
                if mask[[i, j, k]] == 1 {
                    last = values[[i, j, k]];
                } else {
                    out[[i, j, k]] = last;
                }
            }
            // backward fill for the leading gap, zero if nothing observed
            let mut next = f64::NAN;
            for j in (0..t).rev() {
                if mask[[i, j, k]] == 1 {
                    next = values[[i, j, k]];
                } else if out[[i, j, k]].is_nan() {
                    out[[i, j, k]] = if next.is_nan() { 0.0 } else { next };
                }
            }
        }
    }
    out
}

/// Per-channel linear interpolation at integer step positions; leading and
/// trailing gaps extend the nearest observation, empty channels fill zero.
pub fn impute_linear(ground: &GroundSet) -> Array3<f64> {
    let (n, t, d) = ground.dim();
    let values = ground.corrupted().values();
    let mask = ground.corrupted().mask();
    let mut out = values.clone();
    for i in 0..n {
        for k in 0..d {
            let observed: Vec<usize> = (0..t).filter(|&j| mask[[i, j, k]] == 1).collect();
            if observed.is_empty() {
                for j in 0..t {
                    out[[i, j, k]] = 0.0;
                }
                continue;
            }
            for j in 0..t {
                if mask[[i, j, k]] == 1 {
                    continue;
                }
                let pos = observed.partition_point(|&o| o < j);
                out[[i, j, k]] = if pos == 0 {
                    values[[i, observed[0], k]]
                } else if pos == observed.len() {
                    values[[i, observed[observed.len() - 1], k]]
                } else {
                    let left = observed[pos - 1];
                    let right = observed[pos];
                    let vl = values[[i, left, k]];
                    let vr = values[[i, right, k]];
                    let frac = (j - left) as f64 / (right - left) as f64;
                    vl + frac * (vr - vl)
                };
            }
        }
    }
    out
}

/// One epoch's losses and validation score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub ort_loss: f64,
    pub mit_loss: f64,
    pub val_mae: f64,
}

/// A fitted adapted-linear imputer: backbone parameters at the best epoch
/// plus the training history.
#[derive(Debug, Clone)]
pub struct TrainedImputer {
    pub params: BackboneParams,
    pub train_history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub n_params: usize,
}

/// Train the adapted backbone with mini-batch Adam on the joint loss. Each
/// batch re-masks a fraction of its visible cells (fresh seeded draw per
/// epoch); the observed-reconstruction term covers cells the model saw, the
/// masked-imputation term covers the re-masked cells. Early stopping watches
/// the validation MAE over the validation set's indicating mask and restores
/// the best parameters.
pub fn fit_adapted_linear(
    train: &GroundSet,
    val: &GroundSet,
    spec: &ImputerSpec,
    seed: u64,
) -> Result<TrainedImputer> {
    if spec.kind != ImputerKind::AdaptedLinear {
        return Err(Error::InvalidInput(format!(
            "fit_adapted_linear got imputer kind {}",
            spec.kind
        )));
    }
    let hyper = spec
        .hyperparameters
        .clone()
        .ok_or_else(|| Error::Config("adapted_linear needs hyperparameters".into()))?;
    let (n, t, d) = train.dim();
    if train.corrupted().observed_count() == 0 {
        return Err(Error::InvalidInput(
            "training set has no observed cell".into(),
        ));
    }
    if val.corrupted().n_features() != d || val.corrupted().seq_len() != t {
        return Err(Error::ShapeMismatch(format!(
            "train {:?} vs val {:?}",
            train.dim(),
            val.dim()
        )));
    }

    let mut init_rng = CounterRng::new(seed, &[0x11]);
    let mut params = BackboneParams::init(
        t,
        d,
        hyper.shared_weights,
        hyper.ma_window,
        0.01,
        &mut init_rng,
    );
    let n_params = params.n_params();
    let mut state = AdamState::new(&params, hyper.learning_rate);

    let train_values = train.corrupted().values_zero_filled();
    let train_mask = train.corrupted().mask().clone();
    let val_input = val.corrupted().values_zero_filled();
    let val_mask = val.corrupted().mask().clone();

    let mut history: Vec<EpochRecord> = Vec::new();
    let mut best_epoch = 0usize;
    let mut best_mae = f64::INFINITY;
    let mut best_params = params.clone();
    let mut stale = 0usize;

    let batch_size = hyper.batch_size.max(1);
    for epoch in 0..hyper.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        let mut epoch_rng = CounterRng::new(seed, &[0x22, epoch as u64]);
        epoch_rng.shuffle(&mut order);

        let mut ort_sum = 0.0;
        let mut mit_sum = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(batch_size) {
            let b = chunk.len();
            let mut x_in = Array3::zeros((b, t, d));
            let mut m_in = Array3::<u8>::zeros((b, t, d));
            let mut truth = Array3::zeros((b, t, d));
            let mut m_ort = Array3::<u8>::zeros((b, t, d));
            let mut m_mit = Array3::<u8>::zeros((b, t, d));
            for (bi, &sample) in chunk.iter().enumerate() {
                for j in 0..t {
                    for k in 0..d {
                        let observed = train_mask[[sample, j, k]] == 1;
                        let v = train_values[[sample, j, k]];
                        truth[[bi, j, k]] = v;
                        if observed {
                            if epoch_rng.next_f64() < hyper.mit_rate {
                                m_mit[[bi, j, k]] = 1; // held out from the input
                            } else {
                                m_ort[[bi, j, k]] = 1;
                                m_in[[bi, j, k]] = 1;
                                x_in[[bi, j, k]] = v;
                            }
                        }
                    }
                }
            }
            let batch = TrainingBatch {
                x_in,
                m_in,
                truth,
                m_ort,
                m_mit,
                w_ort: hyper.w_ort,
                w_mit: hyper.w_mit,
            };
            let (loss, grads) = loss_and_gradient(&params, &batch)?;
            if !loss.total.is_finite() {
                return Err(Error::Training(format!(
                    "loss diverged at epoch {epoch} (total = {})",
                    loss.total
                )));
            }
            ort_sum += loss.ort;
            mit_sum += loss.mit;
            batches += 1;
            let (next_state, next_params) = adam_step(&state, &params, &grads)?;
            state = next_state;
            params = next_params;
        }

        let val_mae = validation_mae(&params, &val_input, &val_mask, val)?;
        history.push(EpochRecord {
            ort_loss: ort_sum / batches.max(1) as f64,
            mit_loss: mit_sum / batches.max(1) as f64,
            val_mae,
        });
        if val_mae < best_mae {
            best_mae = val_mae;
            best_epoch = epoch;
            best_params = params.clone();
            stale = 0;
        } else {
            stale += 1;
            if stale >= hyper.patience {
                break;
            }
        }
    }

    Ok(TrainedImputer {
        params: best_params,
        train_history: history,
        best_epoch,
        n_params,
    })
}

fn validation_mae(
    params: &BackboneParams,
    val_input: &Array3<f64>,
    val_mask: &Array3<u8>,
    val: &GroundSet,
) -> Result<f64> {
    let out = params.forward(val_input, val_mask)?;
    crate::metrics::masked_error(
        crate::metrics::ErrorKind::Mae,
        &out,
        val.truth(),
        val.indicating_mask(),
    )
}

/// Forward pass on the corrupted set followed by the combination rule;
/// observed cells pass through untouched.
pub fn impute_model(model: &TrainedImputer, ground: &GroundSet) -> Result<Array3<f64>> {
    let x_in = ground.corrupted().values_zero_filled();
    let reconstruction = model.params.forward(&x_in, ground.corrupted().mask())?;
    combine(ground.corrupted(), &reconstruction)
}

/// Run any imputer spec against a ground set. `train_stats` supplies the
/// training split for mean/median when the spec asks for train statistics;
/// `model` must be given for the trainable kind.
pub fn impute(
    spec: &ImputerSpec,
    ground: &GroundSet,
    train_stats: Option<&SampleSet>,
    model: Option<&TrainedImputer>,
) -> Result<Array3<f64>> {
    match spec.kind {
        ImputerKind::Mean | ImputerKind::Median => {
            let source = match spec.stat_source {
                StatSource::SelfSet => ground.corrupted(),
                StatSource::Train => train_stats.ok_or_else(|| {
                    Error::InvalidInput("train statistics requested but not provided".into())
                })?,
            };
            impute_constant_stat(ground, source, spec.kind)
        }
        ImputerKind::Locf => Ok(impute_locf(ground)),
        ImputerKind::Linear => Ok(impute_linear(ground)),
        ImputerKind::AdaptedLinear => {
            let model = model.ok_or_else(|| {
                Error::InvalidInput("adapted_linear needs a fitted model".into())
            })?;
            impute_model(model, ground)
        }
    }
}

const PARAMS_MAGIC: &str = "gapbench-backbone v1";

impl TrainedImputer {
    /// Write the parameter bundle as a versioned text file. Floats use the
    /// shortest representation that round-trips exactly.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut file = std::fs::File::create(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let p = &self.params;
        let mut body = String::new();
        body.push_str(PARAMS_MAGIC);
        body.push('\n');
        body.push_str(&format!(
            "seq_len={} n_features={} groups={} ma_window={} shared={} best_epoch={} n_params={}\n",
            p.seq_len(),
            p.n_features,
            p.groups(),
            p.ma_window,
            p.shared,
            self.best_epoch,
            self.n_params,
        ));
        for (name, tensor) in [
            ("trend", &p.trend),
            ("seasonal", &p.seasonal),
            ("mask_proj", &p.mask_proj),
        ] {
            body.push_str(name);
            for v in tensor.iter() {
                body.push(' ');
                body.push_str(&format!("{v:?}"));
            }
            body.push('\n');
        }
        body.push_str("bias");
        for v in p.bias.iter() {
            body.push(' ');
            body.push_str(&format!("{v:?}"));
        }
        body.push('\n');
        file.write_all(body.as_bytes())
            .map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<TrainedImputer> {
        let file = std::fs::File::open(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut lines = BufReader::new(file).lines();
        let mut next_line = || -> Result<String> {
            lines
                .next()
                .transpose()
                .map_err(|e| Error::io(path.display().to_string(), e))?
                .ok_or_else(|| Error::InvalidInput("parameter file truncated".into()))
        };
        let magic = next_line()?;
        if magic.trim() != PARAMS_MAGIC {
            return Err(Error::InvalidInput(format!(
                "unrecognized parameter file header {magic:?}"
            )));
        }
        let meta_line = next_line()?;
        let mut meta = std::collections::BTreeMap::new();
        for kv in meta_line.split_whitespace() {
            if let Some((k, v)) = kv.split_once('=') {
                meta.insert(k.to_string(), v.to_string());
            }
        }
        let get = |k: &str| -> Result<String> {
            meta.get(k)
                .cloned()
                .ok_or_else(|| Error::InvalidInput(format!("parameter file misses {k}")))
        };
        let seq_len: usize = get("seq_len")?.parse().map_err(bad_meta)?;
        let n_features: usize = get("n_features")?.parse().map_err(bad_meta)?;
        let groups: usize = get("groups")?.parse().map_err(bad_meta)?;
        let ma_window: usize = get("ma_window")?.parse().map_err(bad_meta)?;
        let shared: bool = get("shared")?.parse().map_err(bad_meta)?;
        let best_epoch: usize = get("best_epoch")?.parse().map_err(bad_meta)?;
        let n_params: usize = get("n_params")?.parse().map_err(bad_meta)?;

        let mut read_tensor = |name: &str, len: usize| -> Result<Vec<f64>> {
            let line = next_line()?;
            let mut parts = line.split_whitespace();
            if parts.next() != Some(name) {
                return Err(Error::InvalidInput(format!(
                    "expected tensor {name} in parameter file"
                )));
            }
            let vals: Vec<f64> = parts
                .map(|s| s.parse::<f64>().map_err(bad_meta))
                .collect::<Result<_>>()?;
            if vals.len() != len {
                return Err(Error::InvalidInput(format!(
                    "tensor {name} has {} values, expected {len}",
                    vals.len()
                )));
            }
            Ok(vals)
        };
        let tt = groups * seq_len * seq_len;
        let trend = Array3::from_shape_vec((groups, seq_len, seq_len), read_tensor("trend", tt)?)
            .expect("shape checked");
        let seasonal =
            Array3::from_shape_vec((groups, seq_len, seq_len), read_tensor("seasonal", tt)?)
                .expect("shape checked");
        let mask_proj =
            Array3::from_shape_vec((groups, seq_len, seq_len), read_tensor("mask_proj", tt)?)
                .expect("shape checked");
        let bias = Array1::from_vec(read_tensor("bias", seq_len)?);

        Ok(TrainedImputer {
            params: BackboneParams {
                trend,
                seasonal,
                mask_proj,
                bias,
                ma_window,
                shared,
                n_features,
            },
            train_history: Vec::new(),
            best_epoch,
            n_params,
        })
    }
}

fn bad_meta<E: std::fmt::Display>(e: E) -> Error {
    Error::InvalidInput(format!("malformed parameter file: {e}"))
}

/// Evaluate one forward pass of a trained model on a validation-style ground
/// set and return the masked MAE over the indicating mask.
pub fn model_validation_mae(model: &TrainedImputer, ground: &GroundSet) -> Result<f64> {
    let imputed = impute_model(model, ground)?;
    crate::metrics::masked_error(
        crate::metrics::ErrorKind::Mae,
        &imputed,
        ground.truth(),
        ground.indicating_mask(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::MISSING;
    use crate::grinder::grind_point;
    use approx::assert_abs_diff_eq;
    use ndarray::Array3;

    fn ground_from(values: Array3<f64>, indicated: &[(usize, usize, usize)]) -> GroundSet {
        let set = SampleSet::from_values(values).unwrap();
        let mut ind = Array3::<u8>::zeros(set.dim());
        for &(i, j, k) in indicated {
            ind[[i, j, k]] = 1;
        }
        GroundSet::from_original(&set, ind).unwrap()
    }

    fn channel(values: &[f64]) -> GroundSet {
        let t = values.len();
        let arr = Array3::from_shape_vec((1, t, 1), values.to_vec()).unwrap();
        ground_from(arr, &[])
    }

    #[test]
    fn mean_fill_from_train_stats() {
        // train-observed {1, 3} per feature -> fills 2
        let train =
            SampleSet::from_values(Array3::from_shape_vec((1, 2, 1), vec![1.0, 3.0]).unwrap())
                .unwrap();
        let g = channel(&[5.0, MISSING, 7.0]);
        let out = impute_constant_stat(&g, &train, ImputerKind::Mean).unwrap();
        assert_eq!(out[[0, 1, 0]], 2.0);
        assert_eq!(out[[0, 0, 0]], 5.0); // observed pass-through
    }

    #[test]
    fn median_odd_and_even_counts() {
        let odd =
            SampleSet::from_values(Array3::from_shape_vec((1, 3, 1), vec![1.0, 2.0, 9.0]).unwrap())
                .unwrap();
        let even = SampleSet::from_values(
            Array3::from_shape_vec((1, 4, 1), vec![1.0, 2.0, 3.0, 4.0]).unwrap(),
        )
        .unwrap();
        let g = channel(&[MISSING, 5.0]);
        assert_eq!(
            impute_constant_stat(&g, &odd, ImputerKind::Median).unwrap()[[0, 0, 0]],
            2.0
        );
        assert_eq!(
            impute_constant_stat(&g, &even, ImputerKind::Median).unwrap()[[0, 0, 0]],
            2.5
        );
    }

    #[test]
    fn constant_stat_fully_missing_feature_fills_zero() {
        let train = SampleSet::from_values(
            Array3::from_shape_vec((1, 2, 1), vec![MISSING, MISSING]).unwrap(),
        )
        .unwrap();
        let g = channel(&[MISSING, 1.0]);
        let out = impute_constant_stat(&g, &train, ImputerKind::Mean).unwrap();
        assert_eq!(out[[0, 0, 0]], 0.0);
    }

    #[test]
    fn locf_forward_fill() {
        let g = channel(&[1.0, MISSING, MISSING, 4.0]);
        let out = impute_locf(&g);
        assert_eq!(
            out.as_slice().unwrap(),
            &[1.0, 1.0, 1.0, 4.0]
        );
    }

    #[test]
    fn locf_backward_fill_leading_gap() {
        let g = channel(&[MISSING, 2.0]);
        assert_eq!(impute_locf(&g).as_slice().unwrap(), &[2.0, 2.0]);
    }

    #[test]
    fn locf_empty_channel_fills_zero() {
        let g = channel(&[MISSING, MISSING]);
        assert_eq!(impute_locf(&g).as_slice().unwrap(), &[0.0, 0.0]);
    }

    #[test]
    fn linear_midpoint_and_equal_spacing() {
        let g = channel(&[0.0, MISSING, 2.0]);
        assert_eq!(impute_linear(&g).as_slice().unwrap(), &[0.0, 1.0, 2.0]);
        let g = channel(&[1.0, MISSING, MISSING, 4.0]);
        assert_eq!(
            impute_linear(&g).as_slice().unwrap(),
            &[1.0, 2.0, 3.0, 4.0]
        );
    }

    #[test]
    fn linear_edge_extension() {
        let g = channel(&[MISSING, 5.0]);
        assert_eq!(impute_linear(&g).as_slice().unwrap(), &[5.0, 5.0]);
        let g = channel(&[MISSING, MISSING]);
        assert_eq!(impute_linear(&g).as_slice().unwrap(), &[0.0, 0.0]);
    }

    #[test]
    fn locf_locality() {
        // changing a later cell never changes LOCF output at or before it
        let a = channel(&[1.0, MISSING, 3.0, MISSING]);
        let b = channel(&[1.0, MISSING, 3.0, 9.0]);
        let oa = impute_locf(&a);
        let ob = impute_locf(&b);
        for j in 0..3 {
            assert_eq!(oa[[0, j, 0]], ob[[0, j, 0]]);
        }
    }

    #[test]
    fn outputs_are_total_and_pass_through() {
        let values = Array3::from_shape_vec(
            (2, 4, 2),
            vec![
                1.0, MISSING, 2.0, 5.0, MISSING, 3.0, 4.0, MISSING, MISSING, MISSING, 7.0, 8.0,
                1.0, 2.0, MISSING, 4.0,
            ],
        )
        .unwrap();
        let set = SampleSet::from_values(values).unwrap();
        let g = grind_point(&set, 0.25, 3).unwrap();
        let train = g.corrupted().clone();
        for (name, out) in [
            (
                "mean",
                impute_constant_stat(&g, &train, ImputerKind::Mean).unwrap(),
            ),
            ("locf", impute_locf(&g)),
            ("linear", impute_linear(&g)),
        ] {
            assert!(
                out.iter().all(|v| v.is_finite()),
                "{name} left a missing marker"
            );
            for ((i, j, k), &m) in g.corrupted().mask().indexed_iter() {
                if m == 1 {
                    assert_eq!(
                        out[[i, j, k]],
                        g.corrupted().values()[[i, j, k]],
                        "{name} altered an observed cell"
                    );
                }
            }
        }
    }

    fn sinusoid_set(n: usize, t: usize, d: usize, seed: u64) -> SampleSet {
        let mut rng = CounterRng::new(seed, &[0x5A]);
        let phases: Vec<f64> = (0..d).map(|_| rng.uniform(0.0, std::f64::consts::TAU)).collect();
        let values = Array3::from_shape_fn((n, t, d), |(i, j, k)| {
            let x = (i * t + j) as f64;
            (x * 0.37 + phases[k]).sin() * 2.0
        });
        SampleSet::from_values(values).unwrap()
    }

    fn quick_hyper(epochs: usize) -> Hyperparameters {
        Hyperparameters {
            epochs,
            patience: 5,
            ma_window: 5,
            ..Hyperparameters::default()
        }
    }

    #[test]
    fn fit_zero_epochs_returns_initialization() {
        let set = sinusoid_set(8, 12, 2, 1);
        let train = grind_point(&set, 0.1, 2).unwrap();
        let val = grind_point(&set, 0.1, 3).unwrap();
        let spec = ImputerSpec::adapted_linear(quick_hyper(0));
        let model = fit_adapted_linear(&train, &val, &spec, 7).unwrap();
        assert!(model.train_history.is_empty());
        assert_eq!(model.best_epoch, 0);
        assert_eq!(model.n_params, 3 * 12 * 12 + 12);
    }

    #[test]
    fn fit_is_deterministic() {
        let set = sinusoid_set(6, 10, 2, 4);
        let train = grind_point(&set, 0.2, 5).unwrap();
        let val = grind_point(&set, 0.2, 6).unwrap();
        let spec = ImputerSpec::adapted_linear(quick_hyper(3));
        let a = fit_adapted_linear(&train, &val, &spec, 99).unwrap();
        let b = fit_adapted_linear(&train, &val, &spec, 99).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.train_history, b.train_history);
        assert_eq!(a.best_epoch, b.best_epoch);
    }

    #[test]
    fn fit_beats_mean_on_noiseless_sinusoid() {
        let set = sinusoid_set(24, 16, 2, 11);
        let train = grind_point(&set, 0.1, 12).unwrap();
        let val = grind_point(&set, 0.1, 13).unwrap();
        let spec = ImputerSpec::adapted_linear(quick_hyper(40));
        let model = fit_adapted_linear(&train, &val, &spec, 21).unwrap();
        let model_mae = model_validation_mae(&model, &val).unwrap();
        // oracle: mean imputation on the identical ground set
        let mean_out = impute_constant_stat(&val, val.corrupted(), ImputerKind::Mean).unwrap();
        let mean_mae = crate::metrics::masked_error(
            crate::metrics::ErrorKind::Mae,
            &mean_out,
            val.truth(),
            val.indicating_mask(),
        )
        .unwrap();
        assert!(
            model_mae < mean_mae,
            "model {model_mae} should beat mean {mean_mae}"
        );
    }

    #[test]
    fn impute_model_passthrough_and_purity() {
        let set = sinusoid_set(4, 8, 2, 31);
        let train = grind_point(&set, 0.2, 32).unwrap();
        let val = grind_point(&set, 0.2, 33).unwrap();
        let spec = ImputerSpec::adapted_linear(quick_hyper(2));
        let model = fit_adapted_linear(&train, &val, &spec, 3).unwrap();
        let a = impute_model(&model, &val).unwrap();
        let b = impute_model(&model, &val).unwrap();
        assert_eq!(a, b);
        for ((i, j, k), &m) in val.corrupted().mask().indexed_iter() {
            if m == 1 {
                assert_eq!(a[[i, j, k]], val.corrupted().values()[[i, j, k]]);
            }
        }
    }

    #[test]
    fn impute_model_full_mask_identity_any_params() {
        let set = sinusoid_set(2, 8, 2, 41);
        let ground = grind_point(&set, 0.0, 1).unwrap(); // nothing removed
        let mut rng = CounterRng::new(5, &[]);
        let params = BackboneParams::init(8, 2, true, 3, 0.7, &mut rng);
        let model = TrainedImputer {
            n_params: params.n_params(),
            params,
            train_history: vec![],
            best_epoch: 0,
        };
        let out = impute_model(&model, &ground).unwrap();
        assert_eq!(out, *set.values());
    }

    #[test]
    fn impute_model_zero_weights_bias_broadcast() {
        let t = 6;
        let mut rng = CounterRng::new(5, &[]);
        let mut params = BackboneParams::init(t, 2, true, 3, 0.0, &mut rng);
        params.bias.fill(2.5);
        let all_missing =
            SampleSet::from_values(Array3::from_elem((1, t, 2), MISSING)).unwrap();
        let ground = GroundSet::from_original(&all_missing, Array3::zeros((1, t, 2))).unwrap();
        let model = TrainedImputer {
            n_params: params.n_params(),
            params,
            train_history: vec![],
            best_epoch: 0,
        };
        let out = impute_model(&model, &ground).unwrap();
        assert!(out.iter().all(|&v| v == 2.5));
    }

    #[test]
    fn impute_model_dimension_mismatch_rejected() {
        let set = sinusoid_set(2, 8, 2, 41);
        let train = grind_point(&set, 0.2, 1).unwrap();
        let val = grind_point(&set, 0.2, 2).unwrap();
        let spec = ImputerSpec::adapted_linear(quick_hyper(1));
        let model = fit_adapted_linear(&train, &val, &spec, 3).unwrap();
        let other = sinusoid_set(2, 10, 2, 42);
        let other_ground = grind_point(&other, 0.2, 3).unwrap();
        assert!(impute_model(&model, &other_ground).is_err());
    }

    #[test]
    fn params_save_load_roundtrip() {
        let set = sinusoid_set(4, 6, 2, 51);
        let train = grind_point(&set, 0.2, 52).unwrap();
        let val = grind_point(&set, 0.2, 53).unwrap();
        let spec = ImputerSpec::adapted_linear(quick_hyper(2));
        let model = fit_adapted_linear(&train, &val, &spec, 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.params");
        model.save(&path).unwrap();
        let loaded = TrainedImputer::load(&path).unwrap();
        assert_eq!(loaded.params, model.params);
        assert_eq!(loaded.n_params, model.n_params);
        let a = impute_model(&model, &val).unwrap();
        let b = impute_model(&loaded, &val).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn linear_locality_bracketing_neighbors() {
        let a = channel(&[1.0, MISSING, 3.0, 8.0]);
        let b = channel(&[1.0, MISSING, 3.0, -20.0]);
        let oa = impute_linear(&a);
        let ob = impute_linear(&b);
        assert_abs_diff_eq!(oa[[0, 1, 0]], ob[[0, 1, 0]]);
    }
}
