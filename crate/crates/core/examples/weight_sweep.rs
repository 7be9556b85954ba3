//! Neighbour error across the hybrid weight, and the score distribution of
//! retrieved neighbours.

use cbrq::prediction::{uniform_grid, PredictionOptions};
use cbrq::synthetic::random_dataset;
use cbrq::{
    build_case_base, evaluation_queries, similarity_histogram, weight_sweep, SimilarityConfig,
};

fn main() -> cbrq::Result<()> {
    let data = random_dataset(30, 60, 0.008, 0.1, 5);
    let base = build_case_base(&data, 12)?;
    let queries = evaluation_queries(&base, 6, true);
    let opts = PredictionOptions::default();

    let sweep = weight_sweep(&queries, &base, &uniform_grid(10), 20, 6, &opts)?;
    for p in &sweep.points {
        println!("w = {:.1}  mean relative error = {:.3}", p.w, p.mean_error);
    }
    println!("argmin w = {:?}\n", sweep.argmin());

    let hist = similarity_histogram(&queries, &base, &SimilarityConfig::default(), 20, 6, 10, &opts)?;
    let peak = hist.bins.iter().map(|b| b.count).max().unwrap_or(1).max(1);
    for b in &hist.bins {
        let bar = "#".repeat(b.count * 40 / peak);
        println!("[{:+.2}, {:+.2})  {bar}", b.bin_left, b.bin_right);
    }
    Ok(())
}
