//! Fit the trainable imputer on ETTh1 with 10% point missingness, report the
//! training history and test error, and save/load the parameter file.
//!
//! Usage: cargo run --release --example train_adapted_linear [path/to/ETTh1.csv]

use gapbench::grinder::grind_point;
use gapbench::imputers::{
    fit_adapted_linear, impute_constant_stat, impute_model, Hyperparameters, ImputerKind,
    ImputerSpec, TrainedImputer,
};
use gapbench::metrics::{masked_error, ErrorKind};
use gapbench::pipeline::{prepare, DatasetRecipe};
use gapbench::rng::derive_key;

fn main() -> gapbench::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "data/ETTh1.csv".into());
    let prepared = prepare(&DatasetRecipe::ett_h1(&path))?;

    let seed = 1u64;
    let train = grind_point(&prepared.train, 0.1, derive_key(seed, &[0]))?;
    let val = grind_point(&prepared.val, 0.1, derive_key(seed, &[1]))?;
    let test = grind_point(&prepared.test, 0.1, derive_key(seed, &[2]))?;

    let spec = ImputerSpec::adapted_linear(Hyperparameters {
        epochs: 60,
        patience: 8,
        ..Hyperparameters::default()
    });
    println!("training the adapted linear imputer (60 epoch budget, patience 8)...");
    let started = std::time::Instant::now();
    let model = fit_adapted_linear(&train, &val, &spec, seed)?;
    println!(
        "finished in {:.1}s: {} epochs run, best epoch {}, {} parameters",
        started.elapsed().as_secs_f64(),
        model.train_history.len(),
        model.best_epoch,
        model.n_params
    );

    println!("\nlast five epochs:");
    for (i, epoch) in model
        .train_history
        .iter()
        .enumerate()
        .skip(model.train_history.len().saturating_sub(5))
    {
        println!(
            "  epoch {:>3}: ort {:.4}  mit {:.4}  val mae {:.4}",
            i, epoch.ort_loss, epoch.mit_loss, epoch.val_mae
        );
    }

    let imputed = impute_model(&model, &test)?;
    let model_mae = masked_error(ErrorKind::Mae, &imputed, test.truth(), test.indicating_mask())?;
    let mean_fill = impute_constant_stat(&test, test.corrupted(), ImputerKind::Mean)?;
    let mean_mae = masked_error(ErrorKind::Mae, &mean_fill, test.truth(), test.indicating_mask())?;
    println!("\ntest MAE: adapted linear {model_mae:.4} vs mean fill {mean_mae:.4}");

    let out = std::env::temp_dir().join("gapbench_example_model.params");
    model.save(&out)?;
    let reloaded = TrainedImputer::load(&out)?;
    let imputed_again = impute_model(&reloaded, &test)?;
    assert_eq!(imputed, imputed_again);
    println!("parameter file round trip ok ({})", out.display());
    std::fs::remove_file(out).ok();
    Ok(())
}
