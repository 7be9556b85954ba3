//! One next-month prediction from the k most similar earlier cases.

use cbrq::synthetic::{regime_dataset, RegimeSpec};
use cbrq::{build_case_base, evaluation_queries, predict_return, SimilarityConfig, Variant};

fn main() -> cbrq::Result<()> {
    let data = regime_dataset(&RegimeSpec::default(), 3);
    let base = build_case_base(&data, 12)?;
    let queries = evaluation_queries(&base, 6, true);
    let query = &queries[queries.len() / 2];
    let pool = base.rolling_window(query.anchor(), 6)?;

    let cfg = SimilarityConfig::new(Variant::ProposedAdjusted, 0.5)?;
    let p = predict_return(query, &pool.cases, &cfg, 10)?;
    println!("query {} over {} candidates", p.query, pool.cases.len());
    for n in &p.neighbors {
        println!("  {:<12} sim {:.4}  next {:+.4}", n.key.to_string(), n.score.value, n.solution);
    }
    println!(
        "predicted {:+.4}, actual {:+.4}",
        p.predicted_return,
        query.solution.expect("historical query")
    );
    Ok(())
}
