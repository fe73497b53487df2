//! Experiment orchestration: configuration parsing, the benchmark matrix
//! runner, random-search hyperparameter tuning, and results persistence.

pub mod config;
pub mod hpo;
pub mod persist;
pub mod results;
pub mod runner;

pub use config::{parse_config, ExperimentPlan, NamedGrind, NamedImputer, NamedTask, OutputFormat};
pub use hpo::{random_search, HpoSpace, SearchOutcome, Trial};
pub use persist::{read_ground_set, write_ground_set};
pub use results::{
    read_results_csv, summarize, to_csv_bytes, write_results, CellStatus, ExperimentRecord,
    CSV_HEADER,
};
pub use runner::{run_cell, run_plan, tune_imputer, WORKERS_ENV};
