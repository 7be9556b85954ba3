//! k-NN retrieval over rolling windows and the prediction experiments built
//! on it: the per-variant error table, the hybrid-weight sweep, and the
//! similarity histogram.
//!
//! Query loops fan out with rayon on whatever pool is current; results are
//! collected in query order and reduced sequentially, so reports do not
//! depend on the thread count.

use std::cmp::Ordering;
use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::debug;

use crate::casebase::{Case, CaseBase, CaseKey, QueryCase};
use crate::error::{Error, Result};
use crate::similarity::{SimilarityConfig, SimilarityScore, Variant};

pub const DEFAULT_EPSILON: f64 = 1e-6;
pub const DEFAULT_SWEEP_K: usize = 20;
pub const DEFAULT_KS: [usize; 5] = [1, 5, 10, 25, 50];

/// Ordering among equal scores.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    /// Earlier anchor month first, then ticker.
    #[default]
    MonthThenAsset,
    AssetThenMonth,
}

impl TieBreak {
    fn compare(self, a: &CaseKey, b: &CaseKey) -> Ordering {
        match self {
            TieBreak::MonthThenAsset => a
                .anchor
                .cmp(&b.anchor)
                .then_with(|| a.asset_id.cmp(&b.asset_id)),
            TieBreak::AssetThenMonth => a
                .asset_id
                .cmp(&b.asset_id)
                .then_with(|| a.anchor.cmp(&b.anchor)),
        }
    }
}

/// How similarity scores become averaging weights.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// `max(score, 0)`, falling back to a plain mean when every weight is zero.
    #[default]
    Clamp,
    /// Raw scores; fails if they sum to zero.
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictionOptions {
    pub epsilon: f64,
    pub weighting: Weighting,
    pub tie_break: TieBreak,
}

impl Default for PredictionOptions {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            weighting: Weighting::Clamp,
            tie_break: TieBreak::MonthThenAsset,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub key: CaseKey,
    pub score: SimilarityScore,
    pub solution: f64,
}

fn rank(a: &Neighbor, b: &Neighbor, tie_break: TieBreak) -> Ordering {
    b.score
        .value
        .partial_cmp(&a.score.value)
        .expect("scores are never NaN")
        .then_with(|| tie_break.compare(&a.key, &b.key))
}

fn score_candidates(
    query: &QueryCase,
    candidates: &[&Case],
    config: &SimilarityConfig,
) -> Result<Vec<Neighbor>> {
    let mut scored = Vec::with_capacity(candidates.len());
    let mut skipped = 0usize;
    for c in candidates {
        if c.key.anchor >= query.key.anchor {
            return Err(Error::Invariant(format!(
                "candidate {} is not before query {}",
                c.key, query.key
            )));
        }
        match config.score(&query.description, &c.description) {
            Ok(value) if !value.is_nan() => scored.push(Neighbor {
                key: c.key.clone(),
                score: SimilarityScore {
                    value,
                    variant: config.variant,
                },
                solution: c.solution,
            }),
            Ok(_) | Err(Error::UndefinedCorrelation(_)) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    if skipped > 0 {
        debug!(query = %query.key, skipped, variant = %config.variant, "unscorable candidates skipped");
    }
    Ok(scored)
}

pub fn retrieve_top_k(
    query: &QueryCase,
    candidates: &[&Case],
    config: &SimilarityConfig,
    k: usize,
) -> Result<Vec<Neighbor>> {
    retrieve_top_k_with(query, candidates, config, k, TieBreak::default())
}

/// The `k` highest-scoring candidates, best first. Candidates must all be
/// anchored before the query; a violation is reported as an invariant error.
pub fn retrieve_top_k_with(
    query: &QueryCase,
    candidates: &[&Case],
    config: &SimilarityConfig,
    k: usize,
    tie_break: TieBreak,
) -> Result<Vec<Neighbor>> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let mut scored = score_candidates(query, candidates, config)?;
    if scored.is_empty() {
        return Err(Error::EmptyRetrieval);
    }
    let cmp = |a: &Neighbor, b: &Neighbor| rank(a, b, tie_break);
    if k < scored.len() {
        scored.select_nth_unstable_by(k, cmp);
        scored.truncate(k);
    }
    scored.sort_unstable_by(cmp);
    Ok(scored)
}

/// The `k` lowest-scoring candidates, least similar first.
pub fn retrieve_bottom_k(
    query: &QueryCase,
    candidates: &[&Case],
    config: &SimilarityConfig,
    k: usize,
    tie_break: TieBreak,
) -> Result<Vec<Neighbor>> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let mut scored = score_candidates(query, candidates, config)?;
    if scored.is_empty() {
        return Err(Error::EmptyRetrieval);
    }
    scored.sort_unstable_by(|a, b| {
        a.score
            .value
            .partial_cmp(&b.score.value)
            .expect("scores are never NaN")
            .then_with(|| tie_break.compare(&a.key, &b.key))
    });
    scored.truncate(k);
    Ok(scored)
}

/// Similarity-weighted mean of neighbour solutions.
pub fn weighted_prediction(neighbors: &[Neighbor], weighting: Weighting) -> Result<f64> {
    if neighbors.is_empty() {
        return Err(Error::EmptyRetrieval);
    }
    let weight = |n: &Neighbor| match weighting {
        Weighting::Clamp => n.score.value.max(0.0),
        Weighting::Raw => n.score.value,
    };
    let total: f64 = neighbors.iter().map(weight).sum();
    if total == 0.0 {
        if weighting == Weighting::Raw {
            return Err(Error::Domain("similarity weights sum to zero".into()));
        }
        return Ok(neighbors.iter().map(|n| n.solution).sum::<f64>() / neighbors.len() as f64);
    }
    Ok(neighbors.iter().map(|n| weight(n) * n.solution).sum::<f64>() / total)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub query: CaseKey,
    pub predicted_return: f64,
    pub k: usize,
    pub config: SimilarityConfig,
    pub neighbors: Vec<Neighbor>,
}

pub fn predict_return(
    query: &QueryCase,
    candidates: &[&Case],
    config: &SimilarityConfig,
    k: usize,
) -> Result<Prediction> {
    predict_return_with(query, candidates, config, k, &PredictionOptions::default())
}

pub fn predict_return_with(
    query: &QueryCase,
    candidates: &[&Case],
    config: &SimilarityConfig,
    k: usize,
    options: &PredictionOptions,
) -> Result<Prediction> {
    let neighbors = retrieve_top_k_with(query, candidates, config, k, options.tie_break)?;
    let predicted_return = weighted_prediction(&neighbors, options.weighting)?;
    Ok(Prediction {
        query: query.key.clone(),
        predicted_return,
        k,
        config: *config,
        neighbors,
    })
}

/// Every case whose rolling window is non-empty, and complete when
/// `require_warm` is set, as an evaluation query.
pub fn evaluation_queries(full: &CaseBase, horizon: usize, require_warm: bool) -> Vec<QueryCase> {
    full.iter()
        .filter(|c| match full.rolling_window(c.anchor(), horizon) {
            Ok(view) => view.is_warm() || !require_warm,
            Err(_) => false,
        })
        .map(QueryCase::from)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedQuery {
    pub query: CaseKey,
    pub reason: String,
}

/// Retrievals for one query under each variant, at depth `max_k`.
#[derive(Debug, Clone)]
pub struct QueryOutcome {
    pub query: CaseKey,
    pub actual: f64,
    pub retrievals: Vec<(Variant, Vec<Neighbor>)>,
}

pub fn evaluate_query(
    query: &QueryCase,
    full: &CaseBase,
    configs: &[SimilarityConfig],
    max_k: usize,
    horizon: usize,
    options: &PredictionOptions,
) -> Result<QueryOutcome> {
    let actual = query
        .solution
        .ok_or_else(|| Error::Validation(format!("query {} has no known solution", query.key)))?;
    let view = full.rolling_window(query.anchor(), horizon)?;
    let retrievals = configs
        .iter()
        .map(|cfg| {
            retrieve_top_k_with(query, &view.cases, cfg, max_k, options.tie_break)
                .map(|n| (cfg.variant, n))
        })
        .collect::<Result<_>>()?;
    Ok(QueryOutcome {
        query: query.key.clone(),
        actual,
        retrievals,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub variant: Variant,
    pub k: usize,
    pub mean_abs_error: f64,
    pub query_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub rows: Vec<ErrorRow>,
    pub skipped: Vec<SkippedQuery>,
}

impl ErrorReport {
    pub fn get(&self, variant: Variant, k: usize) -> Option<&ErrorRow> {
        self.rows.iter().find(|r| r.variant == variant && r.k == k)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(writer);
        csv.write_record(["variant", "k", "mean_abs_error", "query_count"])?;
        for r in &self.rows {
            csv.write_record([
                r.variant.to_string(),
                r.k.to_string(),
                r.mean_abs_error.to_string(),
                r.query_count.to_string(),
            ])?;
        }
        csv.flush()?;
        Ok(())
    }
}

/// Variants as rows, k as columns.
impl fmt::Display for ErrorReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut ks: Vec<usize> = self.rows.iter().map(|r| r.k).collect();
        ks.sort_unstable();
        ks.dedup();
        let mut variants: Vec<Variant> = Vec::new();
        for r in &self.rows {
            if !variants.contains(&r.variant) {
                variants.push(r.variant);
            }
        }
        write!(f, "{:<18}", "")?;
        for k in &ks {
            write!(f, "{k:>10}")?;
        }
        writeln!(f)?;
        for v in variants {
            write!(f, "{:<18}", v.as_str())?;
            for &k in &ks {
                match self.get(v, k) {
                    Some(r) => write!(f, "{:>10.4}", r.mean_abs_error)?,
                    None => write!(f, "{:>10}", "-")?,
                }
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

fn check_ks(ks: &[usize]) -> Result<usize> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::Config("k values must be positive and non-empty".into()));
    }
    Ok(*ks.iter().max().expect("non-empty"))
}

/// Mean absolute error of the weighted-mean prediction for every
/// (variant, k) cell. A query that fails under any variant is excluded from
/// every cell and listed in `skipped`.
pub fn evaluate_errors(
    queries: &[QueryCase],
    full: &CaseBase,
    configs: &[SimilarityConfig],
    ks: &[usize],
    horizon: usize,
    options: &PredictionOptions,
) -> Result<ErrorReport> {
    let max_k = check_ks(ks)?;
    let per_query: Vec<Result<Vec<f64>>> = queries
        .par_iter()
        .map(|q| {
            let outcome = evaluate_query(q, full, configs, max_k, horizon, options)?;
            let mut errs = Vec::with_capacity(configs.len() * ks.len());
            for (_, neighbors) in &outcome.retrievals {
                for &k in ks {
                    let top = &neighbors[..k.min(neighbors.len())];
                    let predicted = weighted_prediction(top, options.weighting)?;
                    errs.push((predicted - outcome.actual).abs());
                }
            }
            Ok(errs)
        })
        .collect();

    let mut sums = vec![0.0; configs.len() * ks.len()];
    let mut count = 0usize;
    let mut skipped = Vec::new();
    for (q, res) in queries.iter().zip(per_query) {
        match res {
            Ok(errs) => {
                for (s, e) in sums.iter_mut().zip(errs) {
                    *s += e;
                }
                count += 1;
            }
            Err(e @ Error::Invariant(_)) => return Err(e),
            Err(e) => skipped.push(SkippedQuery {
                query: q.key.clone(),
                reason: e.to_string(),
            }),
        }
    }
    if count == 0 {
        return Err(Error::Domain("no query could be evaluated".into()));
    }
    let mut rows = Vec::with_capacity(sums.len());
    let mut cell = sums.into_iter();
    for cfg in configs {
        for &k in ks {
            rows.push(ErrorRow {
                variant: cfg.variant,
                k,
                mean_abs_error: cell.next().expect("one sum per cell") / count as f64,
                query_count: count,
            });
        }
    }
    Ok(ErrorReport { rows, skipped })
}

/// Mean over neighbours of `|r_neighbor - r_query| / max(|r_query|, epsilon)`.
pub fn relative_neighbor_error(actual: f64, neighbors: &[Neighbor], epsilon: f64) -> f64 {
    let denom = actual.abs().max(epsilon);
    neighbors
        .iter()
        .map(|n| (n.solution - actual).abs() / denom)
        .sum::<f64>()
        / neighbors.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub w: f64,
    pub mean_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSweepReport {
    pub k: usize,
    pub points: Vec<SweepPoint>,
    pub query_count: usize,
    pub skipped: Vec<SkippedQuery>,
}

impl WeightSweepReport {
    pub fn argmin(&self) -> Option<f64> {
        self.points
            .iter()
            .min_by(|a, b| a.mean_error.total_cmp(&b.mean_error))
            .map(|p| p.w)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(writer);
        csv.write_record(["w", "mean_error"])?;
        for p in &self.points {
            csv.write_record([p.w.to_string(), p.mean_error.to_string()])?;
        }
        csv.flush()?;
        Ok(())
    }
}

/// Evenly spaced weights `0, 1/steps, ..., 1`.
pub fn uniform_grid(steps: usize) -> Vec<f64> {
    (0..=steps).map(|i| i as f64 / steps as f64).collect()
}

/// Relative neighbour error of hybrid-metric retrieval for each weight.
pub fn weight_sweep(
    queries: &[QueryCase],
    full: &CaseBase,
    w_grid: &[f64],
    k: usize,
    horizon: usize,
    options: &PredictionOptions,
) -> Result<WeightSweepReport> {
    if w_grid.is_empty()
        || w_grid.iter().any(|w| !(0.0..=1.0).contains(w))
        || w_grid.windows(2).any(|p| p[0] >= p[1])
    {
        return Err(Error::Config(
            "weight grid must be non-empty, within [0, 1] and strictly increasing".into(),
        ));
    }
    let configs: Vec<SimilarityConfig> = w_grid
        .iter()
        .map(|&w| SimilarityConfig::new(Variant::ProposedAdjusted, w))
        .collect::<Result<_>>()?;

    let per_query: Vec<Result<Vec<f64>>> = queries
        .par_iter()
        .map(|q| {
            let outcome = evaluate_query(q, full, &configs, k, horizon, options)?;
            Ok(outcome
                .retrievals
                .iter()
                .map(|(_, n)| relative_neighbor_error(outcome.actual, n, options.epsilon))
                .collect())
        })
        .collect();

    let mut sums = vec![0.0; configs.len()];
    let mut count = 0usize;
    let mut skipped = Vec::new();
    for (q, res) in queries.iter().zip(per_query) {
        match res {
            Ok(errs) => {
                for (s, e) in sums.iter_mut().zip(errs) {
                    *s += e;
                }
                count += 1;
            }
            Err(e @ Error::Invariant(_)) => return Err(e),
            Err(e) => skipped.push(SkippedQuery {
                query: q.key.clone(),
                reason: e.to_string(),
            }),
        }
    }
    if count == 0 {
        return Err(Error::Domain("no query could be evaluated".into()));
    }
    let points = w_grid
        .iter()
        .zip(sums)
        .map(|(&w, s)| SweepPoint {
            w,
            mean_error: s / count as f64,
        })
        .collect();
    Ok(WeightSweepReport {
        k,
        points,
        query_count: count,
        skipped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub bin_left: f64,
    pub bin_right: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bins: Vec<HistogramBin>,
}

impl Histogram {
    /// `bins` uniform bins over `[lo, hi]`; the last bin is closed on the right.
    pub fn uniform(lo: f64, hi: f64, bins: usize) -> Self {
        let width = (hi - lo) / bins as f64;
        Self {
            bins: (0..bins)
                .map(|i| HistogramBin {
                    bin_left: lo + i as f64 * width,
                    bin_right: if i + 1 == bins { hi } else { lo + (i + 1) as f64 * width },
                    count: 0,
                })
                .collect(),
        }
    }

    pub fn add(&mut self, value: f64) {
        let n = self.bins.len();
        let lo = self.bins[0].bin_left;
        let hi = self.bins[n - 1].bin_right;
        let idx = (((value - lo) / (hi - lo)) * n as f64).floor();
        let idx = (idx.max(0.0) as usize).min(n - 1);
        self.bins[idx].count += 1;
    }

    pub fn total(&self) -> usize {
        self.bins.iter().map(|b| b.count).sum()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(writer);
        csv.write_record(["bin_left", "bin_right", "count"])?;
        for b in &self.bins {
            csv.write_record([b.bin_left.to_string(), b.bin_right.to_string(), b.count.to_string()])?;
        }
        csv.flush()?;
        Ok(())
    }
}

/// Distribution of every top-k score across the queries.
pub fn similarity_histogram(
    queries: &[QueryCase],
    full: &CaseBase,
    config: &SimilarityConfig,
    k: usize,
    horizon: usize,
    bins: usize,
    options: &PredictionOptions,
) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::Config("histogram needs at least one bin".into()));
    }
    let (lo, hi) = config.range();
    let mut hist = Histogram::uniform(lo, hi, bins);
    let per_query: Vec<Result<Vec<f64>>> = queries
        .par_iter()
        .map(|q| {
            let view = full.rolling_window(q.anchor(), horizon)?;
            let n = retrieve_top_k_with(q, &view.cases, config, k, options.tie_break)?;
            Ok(n.iter().map(|n| n.score.value).collect())
        })
        .collect();
    for res in per_query {
        match res {
            Ok(scores) => scores.into_iter().for_each(|s| hist.add(s)),
            Err(e @ Error::Invariant(_)) => return Err(e),
            Err(e) => debug!(error = %e, "query skipped in histogram"),
        }
    }
    Ok(hist)
}
