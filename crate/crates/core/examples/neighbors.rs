//! Most and least similar earlier cases for one asset and month.

use cbrq::prediction::{retrieve_bottom_k, retrieve_top_k_with, TieBreak};
use cbrq::synthetic::{regime_dataset, RegimeSpec};
use cbrq::{build_case_base, QueryCase, SimilarityConfig, YearMonth};

fn main() -> cbrq::Result<()> {
    let base = build_case_base(&regime_dataset(&RegimeSpec::default(), 2), 12)?;
    let month = YearMonth::new(2008, 6)?;
    let query = QueryCase::from(base.lookup("G001", month).expect("case exists"));
    let earlier: Vec<_> = base.iter().filter(|c| c.anchor() < month).collect();
    let cfg = SimilarityConfig::default();

    println!("most similar to {}:", query.key);
    for n in retrieve_top_k_with(&query, &earlier, &cfg, 5, TieBreak::default())? {
        println!("  {:<12} {:.4}", n.key.to_string(), n.score.value);
    }
    println!("least similar:");
    for n in retrieve_bottom_k(&query, &earlier, &cfg, 5, TieBreak::default())? {
        println!("  {:<12} {:.4}", n.key.to_string(), n.score.value);
    }
    Ok(())
}
