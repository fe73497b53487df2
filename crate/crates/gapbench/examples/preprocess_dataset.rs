//! Walk through the preprocessing chain on ETTh1: load the CSV, split by
//! time period, cut non-overlapping windows, and standardize on the training
//! split's statistics.
//!
//! Usage: cargo run --release --example preprocess_dataset [path/to/ETTh1.csv]

use gapbench::pipeline::{
    fit_standardizer, load_csv, split_by_period, standardize, window_with_trim, DatasetRecipe,
    Direction,
};

fn main() -> gapbench::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "data/ETTh1.csv".into());
    let recipe = DatasetRecipe::ett_h1(&path);

    let frame = load_csv(&recipe.source, &recipe)?;
    println!(
        "loaded {} rows x {} features: {:?}",
        frame.len(),
        frame.n_features(),
        frame.feature_names()
    );

    let (train_f, val_f, test_f) = split_by_period(&frame, &recipe)?;
    println!(
        "period split: {} / {} / {} rows",
        train_f.len(),
        val_f.len(),
        test_f.len()
    );

    let (train, _) = window_with_trim(&train_f, recipe.window, recipe.drop_last_window)?;
    let (val, _) = window_with_trim(&val_f, recipe.window, recipe.drop_last_window)?;
    let (test, _) = window_with_trim(&test_f, recipe.window, recipe.drop_last_window)?;
    println!(
        "windows (T = {}): train {:?}, val {:?}, test {:?}",
        recipe.window,
        train.dim(),
        val.dim(),
        test.dim()
    );

    let standardizer = fit_standardizer(&train);
    println!("\nper-feature training statistics:");
    for (i, name) in frame.feature_names().iter().enumerate() {
        println!(
            "  {:<6} mean {:>10.4}  scale {:>10.4}",
            name,
            standardizer.mean()[i],
            standardizer.scale()[i]
        );
    }

    let train_std = standardize(&train, &standardizer, Direction::Forward)?;
    let restored = standardize(&train_std, &standardizer, Direction::Inverse)?;
    let max_err = train
        .values()
        .iter()
        .zip(restored.values().iter())
        .filter(|(a, _)| !a.is_nan())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    println!("\nforward/inverse standardization round trip: max |error| = {max_err:.2e}");
    Ok(())
}
