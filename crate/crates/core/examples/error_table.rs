//! Mean absolute prediction error for every variant and neighbourhood size.

use cbrq::prediction::{PredictionOptions, DEFAULT_KS};
use cbrq::synthetic::{regime_dataset, RegimeSpec};
use cbrq::{build_case_base, evaluate_errors, evaluation_queries, SimilarityConfig, Variant};

fn main() -> cbrq::Result<()> {
    let data = regime_dataset(&RegimeSpec::default(), 11);
    let base = build_case_base(&data, 12)?;
    let queries = evaluation_queries(&base, 6, true);
    let configs: Vec<_> = Variant::ALL.iter().map(|&v| SimilarityConfig::of(v)).collect();
    let report = evaluate_errors(&queries, &base, &configs, &DEFAULT_KS, 6, &PredictionOptions::default())?;
    print!("{report}");
    println!("{} queries, {} skipped", queries.len(), report.skipped.len());
    Ok(())
}
