//! Run the shipped benchmark plan programmatically: parse the config,
//! execute the full dataset x pattern x rate x imputer x seed matrix, write
//! the results file, and print the summary table.
//!
//! Usage: cargo run --release --example run_benchmark_matrix [plan.toml]

use std::path::PathBuf;

use gapbench::bench::{parse_config, run_plan, summarize, write_results};

fn main() -> gapbench::Result<()> {
    let config_path = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "configs/ett_h1_naive.toml".into()),
    );
    let text = std::fs::read_to_string(&config_path).map_err(|e| gapbench::Error::Io {
        path: config_path.display().to_string(),
        source: e,
    })?;
    let base = config_path.parent().unwrap_or(std::path::Path::new("."));
    let plan = parse_config(&text, base)?;
    println!(
        "plan: {} datasets x {} grinds x {} imputers x {} seeds = {} cells",
        plan.recipes.len(),
        plan.grinds.len(),
        plan.imputers.len(),
        plan.seeds.len(),
        plan.n_cells()
    );

    let started = std::time::Instant::now();
    let records = run_plan(&plan, 0)?;
    println!(
        "ran {} cells in {:.1}s ({} ok)",
        records.len(),
        started.elapsed().as_secs_f64(),
        records.iter().filter(|r| r.status.is_ok()).count()
    );

    write_results(&records, &plan.output, plan.format)?;
    println!("results -> {}\n", plan.output.display());
    println!("{}", summarize(&records)?);
    Ok(())
}
