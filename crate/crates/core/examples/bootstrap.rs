//! The asset-dropout bootstrap: repeat the backtest with a seeded 20% of
//! assets removed and summarise across runs.

use cbrq::synthetic::random_dataset;
use cbrq::{bootstrap_backtest, BacktestConfig, BootstrapSpec, SimilarityConfig, Variant};

fn main() -> cbrq::Result<()> {
    let data = random_dataset(25, 48, 0.01, 0.1, 9);
    let sims: Vec<_> = Variant::ALL.iter().map(|&v| SimilarityConfig::of(v)).collect();
    let spec = BootstrapSpec {
        runs: 20,
        drop_fraction: 0.2,
        master_seed: 42,
        window: 12,
    };
    let out = bootstrap_backtest(&data, &sims, &BacktestConfig::default(), &spec)?;
    println!("run 0 dropped {:?}\n", out.summary.dropped_assets[0]);
    println!("{:<18}{:>12}{:>12}{:>10}", "", "full", "boot mean", "boot sd");
    for v in &out.summary.variants {
        println!(
            "{:<18}{:>11.1}%{:>11.1}%{:>9.1}%",
            v.variant.as_str(),
            v.full_dataset.annualised_return * 100.0,
            v.mean_annualised_return * 100.0,
            v.std_annualised_return * 100.0
        );
    }
    Ok(())
}
