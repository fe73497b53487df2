//! Run the four naive imputers on the ETTh1 dataset with 10% point
//! missingness and print masked errors per method.
//!
//! Usage: cargo run --release --example naive_imputers [path/to/ETTh1.csv]

use gapbench::grinder::grind_point;
use gapbench::imputers::{impute, ImputerKind, ImputerSpec};
use gapbench::metrics::metric_report;
use gapbench::pipeline::{prepare, DatasetRecipe};
use gapbench::rng::derive_key;

fn main() -> gapbench::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "data/ETTh1.csv".into());
    let recipe = DatasetRecipe::ett_h1(&path);
    let prepared = prepare(&recipe)?;
    println!(
        "prepared ETTh1: train {:?}, val {:?}, test {:?}",
        prepared.train.dim(),
        prepared.val.dim(),
        prepared.test.dim()
    );

    let seeds = [1u64, 2, 3];
    let kinds = [
        ImputerKind::Mean,
        ImputerKind::Median,
        ImputerKind::Locf,
        ImputerKind::Linear,
    ];
    println!("\n10% point missing, masked metrics over the held-out cells (mean of 3 seeds):");
    println!("{:<8} {:>8} {:>8} {:>8}", "imputer", "mae", "mse", "mre");
    for kind in kinds {
        let spec = ImputerSpec::naive(kind)?;
        let mut sums = (0.0, 0.0, 0.0);
        for seed in seeds {
            let ground = grind_point(&prepared.test, 0.1, derive_key(seed, &[2]))?;
            let imputed = impute(&spec, &ground, Some(&prepared.train), None)?;
            let report = metric_report(&imputed, ground.truth(), ground.indicating_mask())?;
            sums.0 += report.mae;
            sums.1 += report.mse;
            sums.2 += report.mre;
        }
        let n = seeds.len() as f64;
        println!(
            "{:<8} {:>8.3} {:>8.3} {:>8.3}",
            kind.to_string(),
            sums.0 / n,
            sums.1 / n,
            sums.2 / n
        );
    }
    Ok(())
}
