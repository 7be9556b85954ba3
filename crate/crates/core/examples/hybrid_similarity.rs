//! Every similarity variant on one pair of windows, and the hybrid score
//! across the weight range.

use cbrq::{combined_sim, cumulative_distance, SimilarityConfig, Variant};

fn main() -> cbrq::Result<()> {
    let x = [0.03, -0.02, 0.05, 0.01, -0.04, 0.02, 0.06, -0.01, 0.00, 0.03, -0.02, 0.04];
    let y = [0.02, -0.03, 0.04, 0.02, -0.02, 0.01, 0.05, -0.02, 0.01, 0.02, -0.01, 0.02];
    println!("cumulative distance e = {:.6}\n", cumulative_distance(&x, &y)?);
    for v in Variant::ALL {
        let cfg = SimilarityConfig::of(v);
        let (lo, hi) = cfg.range();
        println!("{:<18} {:>9.6}   range [{lo:+.2}, {hi:+.2}]", v.as_str(), cfg.score(&x, &y)?);
    }
    println!();
    for i in 0..=4 {
        let w = i as f64 / 4.0;
        println!("w = {w:.2}  sim = {:.6}", combined_sim(&x, &y, w)?);
    }
    Ok(())
}
