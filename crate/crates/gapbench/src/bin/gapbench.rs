//! Thin command-line wrapper around the benchmark runner.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gapbench::bench::{self, runner::WORKERS_ENV, OutputFormat};
use gapbench::grinder::{grind, realized_rates, GrindSpec};
use gapbench::pipeline::prepare;
use gapbench::rng::derive_key;

#[derive(Parser)]
#[command(name = "gapbench", version, about = "Time-series imputation benchmark runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute an experiment plan and write results.
    Run {
        /// Plan file (TOML).
        config: PathBuf,
        /// Result file; overrides the plan's `run.output` (a warning is
        /// printed when both are set and disagree).
        #[arg(long)]
        output: Option<PathBuf>,
        /// Worker count; falls back to the GAPBENCH_WORKERS environment
        /// variable, then to one worker per core.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Print a mean +/- std table from a results CSV.
    Summarize {
        /// Results file produced by `run` with csv format.
        results: PathBuf,
    },
    /// Random-search hyperparameter tuning for the plan's trainable imputers
    /// on the plan's first dataset/grind/seed.
    Hpo {
        /// Plan file (TOML).
        config: PathBuf,
        /// Number of trials.
        #[arg(long)]
        budget: usize,
    },
    /// Apply the plan's grinds and print realized missing rates per split.
    Grind {
        /// Plan file (TOML).
        config: PathBuf,
        /// Print per-split realized rates.
        #[arg(long)]
        inspect: bool,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(all_ok) => {
            if all_ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn load_plan(config: &PathBuf) -> gapbench::Result<bench::ExperimentPlan> {
    let text = std::fs::read_to_string(config)
        .map_err(|e| gapbench::Error::Io {
            path: config.display().to_string(),
            source: e,
        })?;
    let base = config
        .parent()
        .map(|p| p.to_path_buf())
        .unwrap_or_else(|| PathBuf::from("."));
    bench::parse_config(&text, &base)
}

fn worker_count(flag: Option<usize>) -> usize {
    flag.or_else(|| {
        std::env::var(WORKERS_ENV)
            .ok()
            .and_then(|v| v.parse().ok())
    })
    .unwrap_or(0)
}

fn dispatch(cli: Cli) -> gapbench::Result<bool> {
    match cli.command {
        Command::Run {
            config,
            output,
            workers,
        } => {
            let mut plan = load_plan(&config)?;
            if let Some(out) = output {
                if out != plan.output {
                    log::warn!(
                        "--output {} overrides run.output {}",
                        out.display(),
                        plan.output.display()
                    );
                }
                plan.output = out;
            }
            let records = bench::run_plan(&plan, worker_count(workers))?;
            bench::write_results(&records, &plan.output, plan.format)?;
            let ok = records.iter().filter(|r| r.status.is_ok()).count();
            println!(
                "{} of {} cells ok -> {}",
                ok,
                records.len(),
                plan.output.display()
            );
            if plan.format == OutputFormat::Csv {
                if let Ok(table) = bench::summarize(&records) {
                    println!("{table}");
                }
            }
            Ok(ok == records.len())
        }
        Command::Summarize { results } => {
            let records = bench::read_results_csv(&results)?;
            let table = bench::summarize(&records)?;
            println!("{table}");
            Ok(true)
        }
        Command::Hpo { config, budget } => {
            let plan = load_plan(&config)?;
            let trainable: Vec<_> = plan
                .imputers
                .iter()
                .filter(|imp| imp.spec.kind.is_trainable())
                .collect();
            if trainable.is_empty() {
                return Err(gapbench::Error::Config(
                    "the plan has no trainable imputer to tune".into(),
                ));
            }
            let prepared = prepare(&plan.recipes[0])?;
            let seed = plan.seeds[0];
            for imp in trainable {
                let outcome =
                    bench::tune_imputer(&prepared, &plan.grinds[0], imp, budget, seed)?;
                let hyper = outcome.best.hyperparameters.as_ref().unwrap();
                println!(
                    "# imputer {} on {}/{}: best of {} trials (val MAE {:.6}, trial {})",
                    imp.name,
                    plan.recipes[0].name,
                    plan.grinds[0].name,
                    budget,
                    outcome.best_val_mae,
                    outcome.best_index
                );
                println!("[imputer.{}]", imp.name);
                println!("kind = \"adapted_linear\"");
                println!("learning_rate = {}", hyper.learning_rate);
                println!("epochs = {}", hyper.epochs);
                println!("patience = {}", hyper.patience);
                println!("batch_size = {}", hyper.batch_size);
                println!("mit_rate = {}", hyper.mit_rate);
                println!("ma_window = {}", hyper.ma_window);
            }
            Ok(true)
        }
        Command::Grind { config, inspect } => {
            let plan = load_plan(&config)?;
            for recipe in &plan.recipes {
                let prepared = prepare(recipe)?;
                for named in &plan.grinds {
                    for &seed in &plan.seeds {
                        for (split, set) in [
                            ("train", &prepared.train),
                            ("val", &prepared.val),
                            ("test", &prepared.test),
                        ] {
                            let split_id = match split {
                                "train" => 0u64,
                                "val" => 1,
                                _ => 2,
                            };
                            let spec = GrindSpec {
                                pattern: named.pattern,
                                rate: named.rate,
                                seq_len: named.seq_len,
                                block_len: named.block_len,
                                block_width: named.block_width,
                                seed: derive_key(seed, &[split_id]),
                            };
                            let ground = grind(set, &spec)?;
                            let (missing, removed) = realized_rates(&ground);
                            if inspect {
                                println!(
                                    "{} {} seed={} {}: missing {:.4} removed {:.4} ({} cells)",
                                    recipe.name,
                                    named.name,
                                    seed,
                                    split,
                                    missing,
                                    removed,
                                    ground.indicated_count()
                                );
                            }
                        }
                    }
                }
            }
            if !inspect {
                println!("grinds completed; pass --inspect for realized rates");
            }
            Ok(true)
        }
    }
}
