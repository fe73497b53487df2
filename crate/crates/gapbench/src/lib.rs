//! gapbench: a benchmark harness for time-series imputation.
//!
//! The library covers the full evaluation pipeline for imputation methods on
//! multivariate time series:
//!
//! * [`core`] — sample sets with observation masks, ground sets with held-out
//!   truth, and the observed/reconstruction combination rule;
//! * [`pipeline`] — CSV ingestion, period splits, non-overlapping windows,
//!   and train-split standardization;
//! * [`grinder`] — seeded missingness simulation (point, subsequence, block)
//!   with exact-count rate targeting;
//! * [`imputers`] — mean/median/LOCF/linear-interpolation baselines and a
//!   trainable decomposition-linear imputer with joint reconstruction loss;
//! * [`nn`] — the numeric kernel behind the trainable imputer (forward pass,
//!   analytic gradients, Adam, finite-difference checking);
//! * [`metrics`] — masked MAE/MSE/MRE plus ROC-AUC and average precision;
//! * [`downstream`] — classification/regression/forecasting datasets built
//!   from imputed samples and scored with small deterministic models;
//! * [`bench`] — the experiment runner: config files, the
//!   dataset x pattern x rate x imputer x seed matrix, random-search HPO, and
//!   CSV/JSONL results.
//!
//! Every random choice flows through a counter-based generator keyed by seed
//! and purpose ([`rng`]), so identical configurations reproduce identical
//! numbers on any worker count.
//!
//! The `examples/` directory demonstrates each capability end to end; the
//! `gapbench` binary wraps the runner for shell use.

pub mod bench;
pub mod core;
pub mod downstream;
pub mod error;
pub mod grinder;
pub mod imputers;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod rng;

pub use crate::core::{combine, GroundSet, SampleSet, MISSING};
pub use crate::error::{Error, Result};
