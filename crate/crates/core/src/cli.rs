//! Batch commands behind the `cbrq` binary.
//!
//! Each `cmd_*` function takes a fully resolved [`RunConfig`], writes its
//! reports under `output_dir`, and drops a `<command>.config.json` sidecar
//! holding that config. Outputs carry no timestamps, so re-running a command
//! rewrites byte-identical files.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use tracing::{info, warn};

use crate::backtest::{bootstrap_backtest, write_ledger_csv, BootstrapOutcome, BootstrapSpec};
use crate::casebase::{build_case_base, load_case_base, save_case_base, CaseBase, QueryCase};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::market_data::{
    parse_daily_prices, read_returns_csv, to_month_end_prices_with, to_returns, write_returns_csv,
    ResampleOptions, ReturnSeries,
};
use crate::month::YearMonth;
use crate::prediction::{
    evaluate_errors, evaluation_queries, retrieve_bottom_k, retrieve_top_k_with,
    similarity_histogram, weight_sweep, ErrorReport, Histogram, Neighbor, WeightSweepReport,
};
use crate::similarity::{SimilarityConfig, Variant};

#[derive(Debug, Parser)]
#[command(name = "cbrq", version, about = "Case-based monthly stock return prediction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert daily price files into monthly return files.
    Ingest(CommonArgs),
    /// Build the case base from the return files.
    Build(CommonArgs),
    /// Hybrid-weight sweep and similarity histogram.
    Sweep(CommonArgs),
    /// Mean absolute prediction error for each variant and k.
    Errors(CommonArgs),
    /// Top-N trading simulation with the asset-dropout bootstrap.
    Backtest(CommonArgs),
    /// Most and least similar earlier cases for one query.
    Neighbors(NeighborsArgs),
}

/// Flags override fields of the JSON config.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    #[arg(long, env = "CBRQ_CONFIG")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub variants: Option<Vec<Variant>>,
    #[arg(long)]
    pub w: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub ks: Option<Vec<usize>>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub top_n: Option<usize>,
    #[arg(long)]
    pub initial_capital: Option<f64>,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub drop_fraction: Option<f64>,
    #[arg(long)]
    pub allow_gap_fill_days: Option<u32>,
}

#[derive(Debug, Clone, Args)]
pub struct NeighborsArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub asset: String,
    /// Anchor month of the query, `YYYY-MM`.
    #[arg(long)]
    pub month: YearMonth,
    /// Similarity variant; defaults to the first configured variant.
    #[arg(long)]
    pub variant: Option<Variant>,
}

impl CommonArgs {
    /// Loads the config file (if any) and applies flag overrides.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        macro_rules! over {
            ($($field:ident => $target:ident),* $(,)?) => {
                $(if let Some(v) = &self.$field { cfg.$target = v.clone(); })*
            };
        }
        over!(
            output_dir => output_dir,
            data_dir => data_dir,
            seed => master_seed,
            jobs => jobs,
            window => window,
            horizon => horizon,
            variants => variants,
            w => w,
            ks => ks,
            k => k,
            top_n => top_n,
            initial_capital => initial_capital,
            runs => runs,
            drop_fraction => drop_fraction,
            allow_gap_fill_days => allow_gap_fill_days,
        );
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parses nothing; dispatches an already parsed command.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(a) => cmd_ingest(&a.resolve()?).map(|s| {
            println!("{} accepted, {} rejected", s.accepted.len(), s.rejected.len());
        }),
        Command::Build(a) => cmd_build(&a.resolve()?).map(|b| println!("{} cases", b.len())),
        Command::Sweep(a) => cmd_sweep(&a.resolve()?).map(|(sweep, _)| {
            for p in &sweep.points {
                println!("w = {:.2}  mean error = {:.6}", p.w, p.mean_error);
            }
        }),
        Command::Errors(a) => cmd_errors(&a.resolve()?).map(|r| print!("{r}")),
        Command::Backtest(a) => cmd_backtest(&a.resolve()?).map(|o| {
            println!(
                "{:<18}{:>14}{:>12}{:>12}{:>14}",
                "", "accumulated", "ann.ret", "ann.vol", "boot.mean"
            );
            for v in &o.summary.variants {
                println!(
                    "{:<18}{:>14.2}{:>11.1}%{:>11.1}%{:>13.1}%",
                    v.variant.as_str(),
                    v.full_dataset.accumulated_value,
                    v.full_dataset.annualised_return * 100.0,
                    v.full_dataset.annualised_volatility.unwrap_or(f64::NAN) * 100.0,
                    v.mean_annualised_return * 100.0,
                );
            }
        }),
        Command::Neighbors(a) => {
            let cfg = a.common.resolve()?;
            let variant = a.variant.unwrap_or(cfg.variants[0]);
            cmd_neighbors(&cfg, &a.asset, a.month, variant).map(|rows| {
                for r in rows {
                    println!(
                        "{:<7}{:>3}  {:<12}{}  {:.6}",
                        r.kind, r.rank, r.ticker, r.anchor, r.score
                    );
                }
            })
        }
    }
}

fn with_pool<T: Send>(cfg: &RunConfig, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_sidecar(cfg: &RunConfig, command: &str) -> Result<()> {
    let mut out = create(&cfg.output_dir.join(format!("{command}.config.json")))?;
    serde_json::to_writer_pretty(&mut out, cfg)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

fn csv_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", dir.display())))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn ticker_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

#[derive(Debug, Clone, Serialize)]
pub struct IngestSummary {
    pub accepted: Vec<String>,
    pub rejected: Vec<(String, String)>,
}

fn ingest_file(path: &Path, options: ResampleOptions) -> Result<ReturnSeries> {
    let ticker = ticker_of(path);
    let daily = parse_daily_prices(&ticker, BufReader::new(File::open(path)?))?;
    to_returns(&to_month_end_prices_with(&daily, options)?)
}

/// One returns file per accepted asset plus `rejects.csv`.
pub fn cmd_ingest(cfg: &RunConfig) -> Result<IngestSummary> {
    let files = csv_files(&cfg.data_dir)?;
    if files.is_empty() {
        return Err(Error::Config(format!("no price files in {}", cfg.data_dir.display())));
    }
    let options = ResampleOptions {
        allow_gap_fill_days: cfg.allow_gap_fill_days,
    };
    let results: Vec<Result<ReturnSeries>> =
        with_pool(cfg, || files.par_iter().map(|p| ingest_file(p, options)).collect())?;

    let returns_dir = cfg.returns_dir();
    fs::create_dir_all(&returns_dir)?;
    let mut summary = IngestSummary {
        accepted: Vec::new(),
        rejected: Vec::new(),
    };
    for (path, res) in files.iter().zip(results) {
        let ticker = ticker_of(path);
        match res {
            Ok(series) => {
                let mut out = create(&returns_dir.join(format!("{ticker}.csv")))?;
                write_returns_csv(std::slice::from_ref(&series), &mut out)?;
                out.flush()?;
                summary.accepted.push(ticker);
            }
            Err(e) => {
                warn!(%ticker, error = %e, "asset rejected");
                summary.rejected.push((ticker, e.to_string()));
            }
        }
    }
    let mut rejects = csv::Writer::from_writer(create(&cfg.output_dir.join("rejects.csv"))?);
    rejects.write_record(["ticker", "reason"])?;
    for (t, reason) in &summary.rejected {
        rejects.write_record([t, reason])?;
    }
    rejects.flush()?;
    write_sidecar(cfg, "ingest")?;
    info!(accepted = summary.accepted.len(), rejected = summary.rejected.len(), "ingest done");
    Ok(summary)
}

/// Reads every returns CSV in the configured returns directory.
pub fn load_returns(cfg: &RunConfig) -> Result<Vec<ReturnSeries>> {
    let mut all = Vec::new();
    for path in csv_files(&cfg.returns_dir())? {
        all.extend(read_returns_csv(BufReader::new(File::open(&path)?))?);
    }
    all.sort_by(|a, b| a.asset_id.cmp(&b.asset_id));
    Ok(all)
}

pub fn cmd_build(cfg: &RunConfig) -> Result<CaseBase> {
    let base = build_case_base(&load_returns(cfg)?, cfg.window)?;
    let mut out = create(&cfg.case_base_path())?;
    save_case_base(&base, &mut out)?;
    write_sidecar(cfg, "build")?;
    info!(cases = base.len(), "case base written");
    Ok(base)
}

/// The saved case base if present, otherwise one built from the returns.
pub fn case_base(cfg: &RunConfig) -> Result<CaseBase> {
    let path = cfg.case_base_path();
    let base = if path.exists() {
        load_case_base(BufReader::new(File::open(&path)?))?
    } else {
        build_case_base(&load_returns(cfg)?, cfg.window)?
    };
    if base.window() != cfg.window {
        return Err(Error::Config(format!(
            "case base window {} differs from configured {}",
            base.window(),
            cfg.window
        )));
    }
    Ok(base)
}

/// Writes `sweep.csv` and `histogram.csv`.
pub fn cmd_sweep(cfg: &RunConfig) -> Result<(WeightSweepReport, Histogram)> {
    let base = case_base(cfg)?;
    let queries = evaluation_queries(&base, cfg.horizon, cfg.require_full_warmup);
    let hist_cfg = SimilarityConfig::new(Variant::ProposedAdjusted, cfg.w)?;
    let (sweep, hist) = with_pool(cfg, || -> Result<_> {
        let sweep = weight_sweep(&queries, &base, &cfg.w_grid, cfg.sweep_k, cfg.horizon, &cfg.options)?;
        let hist = similarity_histogram(
            &queries,
            &base,
            &hist_cfg,
            cfg.sweep_k,
            cfg.horizon,
            cfg.histogram_bins,
            &cfg.options,
        )?;
        Ok((sweep, hist))
    })??;
    let mut out = create(&cfg.output_dir.join("sweep.csv"))?;
    sweep.write_csv(&mut out)?;
    let mut out = create(&cfg.output_dir.join("histogram.csv"))?;
    hist.write_csv(&mut out)?;
    write_sidecar(cfg, "sweep")?;
    Ok((sweep, hist))
}

/// Writes `errors.csv`, `errors.txt` and `errors_skipped.csv`.
pub fn cmd_errors(cfg: &RunConfig) -> Result<ErrorReport> {
    let base = case_base(cfg)?;
    let queries = evaluation_queries(&base, cfg.horizon, cfg.require_full_warmup);
    let configs = cfg.similarity_configs();
    let report = with_pool(cfg, || {
        evaluate_errors(&queries, &base, &configs, &cfg.ks, cfg.horizon, &cfg.options)
    })??;
    let mut out = create(&cfg.output_dir.join("errors.csv"))?;
    report.write_csv(&mut out)?;
    let mut out = create(&cfg.output_dir.join("errors.txt"))?;
    write!(out, "{report}")?;
    out.flush()?;
    let mut skipped = csv::Writer::from_writer(create(&cfg.output_dir.join("errors_skipped.csv"))?);
    skipped.write_record(["ticker", "month", "reason"])?;
    for s in &report.skipped {
        skipped.write_record([&s.query.asset_id, &s.query.anchor.to_string(), &s.reason])?;
    }
    skipped.flush()?;
    write_sidecar(cfg, "errors")?;
    Ok(report)
}

/// Writes `backtest_summary.csv` (per run), `backtest_table.csv`,
/// `bootstrap.json` and, when enabled, per-run ledgers under `ledgers/`.
pub fn cmd_backtest(cfg: &RunConfig) -> Result<BootstrapOutcome> {
    let dataset = load_returns(cfg)?;
    let spec = BootstrapSpec {
        runs: cfg.runs,
        drop_fraction: cfg.drop_fraction,
        master_seed: cfg.master_seed,
        window: cfg.window,
    };
    let bt = cfg.backtest_config();
    let sims = cfg.similarity_configs();
    let outcome = with_pool(cfg, || bootstrap_backtest(&dataset, &sims, &bt, &spec))??;

    let mut out = create(&cfg.output_dir.join("backtest_summary.csv"))?;
    outcome.summary.write_runs_csv(&mut out)?;
    let mut out = create(&cfg.output_dir.join("backtest_table.csv"))?;
    outcome.summary.write_table_csv(&mut out)?;
    let mut out = create(&cfg.output_dir.join("bootstrap.json"))?;
    serde_json::to_writer_pretty(&mut out, &outcome.summary)?;
    out.write_all(b"\n")?;
    out.flush()?;

    if cfg.write_ledgers {
        let dir = cfg.output_dir.join("ledgers");
        for ((sim, full), runs) in sims.iter().zip(&outcome.full_dataset).zip(&outcome.runs) {
            let vdir = dir.join(sim.variant.as_str());
            let mut out = create(&vdir.join("full.csv"))?;
            write_ledger_csv(&full.ledger, &mut out)?;
            for (i, r) in runs.iter().enumerate() {
                let mut out = create(&vdir.join(format!("run_{i:03}.csv")))?;
                write_ledger_csv(&r.ledger, &mut out)?;
            }
        }
    }
    write_sidecar(cfg, "backtest")?;
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NeighborRow {
    pub kind: &'static str,
    pub rank: usize,
    pub ticker: String,
    pub anchor: YearMonth,
    pub period_start: YearMonth,
    pub score: f64,
}

/// Top-k and bottom-k among every case anchored before the query. Writes
/// `neighbors.csv`.
pub fn cmd_neighbors(
    cfg: &RunConfig,
    asset: &str,
    month: YearMonth,
    variant: Variant,
) -> Result<Vec<NeighborRow>> {
    let base = case_base(cfg)?;
    let query = base
        .lookup(asset, month)
        .map(QueryCase::from)
        .ok_or_else(|| Error::UnknownCase {
            asset: asset.to_owned(),
            month,
        })?;
    let sim = SimilarityConfig::new(variant, cfg.w)?;
    let candidates: Vec<_> = base.iter().filter(|c| c.anchor() < month).collect();
    let top = retrieve_top_k_with(&query, &candidates, &sim, cfg.k, cfg.options.tie_break)?;
    let bottom = retrieve_bottom_k(&query, &candidates, &sim, cfg.k, cfg.options.tie_break)?;
    let window = base.window() as i64;
    let rows_of = |kind: &'static str, ns: &[Neighbor]| -> Vec<NeighborRow> {
        ns.iter()
            .enumerate()
            .map(|(i, n)| NeighborRow {
                kind,
                rank: i + 1,
                ticker: n.key.asset_id.clone(),
                anchor: n.key.anchor,
                period_start: n.key.anchor.offset(-window),
                score: n.score.value,
            })
            .collect()
    };
    let mut rows = rows_of("most", &top);
    rows.extend(rows_of("least", &bottom));

    let mut csv = csv::Writer::from_writer(create(&cfg.output_dir.join("neighbors.csv"))?);
    csv.write_record(["kind", "rank", "ticker", "period_start", "anchor", "score"])?;
    for r in &rows {
        csv.write_record([
            r.kind.to_string(),
            r.rank.to_string(),
            r.ticker.clone(),
            r.period_start.to_string(),
            r.anchor.to_string(),
            r.score.to_string(),
        ])?;
    }
    csv.flush()?;
    write_sidecar(cfg, "neighbors")?;
    Ok(rows)
}
