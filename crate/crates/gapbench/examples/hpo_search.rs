//! Random-search hyperparameter tuning of the trainable imputer on ETTh1
//! with 10% point missingness.
//!
//! Usage: cargo run --release --example hpo_search [budget] [path/to/ETTh1.csv]

use gapbench::bench::config::{NamedGrind, NamedImputer};
use gapbench::bench::tune_imputer;
use gapbench::grinder::Pattern;
use gapbench::imputers::{Hyperparameters, ImputerSpec};
use gapbench::pipeline::{prepare, DatasetRecipe};

fn main() -> gapbench::Result<()> {
    let budget: usize = std::env::args()
        .nth(1)
        .and_then(|v| v.parse().ok())
        .unwrap_or(8);
    let path = std::env::args()
        .nth(2)
        .unwrap_or_else(|| "data/ETTh1.csv".into());
    let prepared = prepare(&DatasetRecipe::ett_h1(&path))?;

    let grind = NamedGrind {
        name: "point10".into(),
        pattern: Pattern::Point,
        rate: 0.1,
        seq_len: None,
        block_len: None,
        block_width: None,
    };
    let base = NamedImputer {
        name: "adapted".into(),
        spec: ImputerSpec::adapted_linear(Hyperparameters {
            epochs: 40,
            patience: 6,
            ..Hyperparameters::default()
        }),
        hpo_budget: budget,
    };

    println!("random search, {budget} trials, objective = validation MAE");
    let outcome = tune_imputer(&prepared, &grind, &base, budget, 1)?;
    println!(
        "{:<6} {:>10} {:>7} {:>6} {:>9} {:>9}",
        "trial", "lr", "window", "batch", "mit_rate", "val_mae"
    );
    for (i, trial) in outcome.trials.iter().enumerate() {
        let h = &trial.hyperparameters;
        let marker = if i == outcome.best_index { " <- best" } else { "" };
        println!(
            "{:<6} {:>10.2e} {:>7} {:>6} {:>9.3} {:>9.4}{marker}",
            i, h.learning_rate, h.ma_window, h.batch_size, h.mit_rate, trial.val_mae
        );
    }
    let best = outcome.best.hyperparameters.as_ref().unwrap();
    println!(
        "\nwinner: lr {:.2e}, window {}, batch {}, mit rate {:.3} (val MAE {:.4})",
        best.learning_rate, best.ma_window, best.batch_size, best.mit_rate, outcome.best_val_mae
    );
    Ok(())
}
