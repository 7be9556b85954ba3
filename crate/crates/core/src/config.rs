use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::backtest::{BacktestConfig, Shortfall};
use crate::casebase::{DEFAULT_HORIZON, DEFAULT_WINDOW};
use crate::error::{Error, Result};
use crate::month::YearMonth;
use crate::prediction::{uniform_grid, PredictionOptions, DEFAULT_SWEEP_K, DEFAULT_KS};
use crate::similarity::{SimilarityConfig, Variant, DEFAULT_WEIGHT};

/// Everything a batch run needs. Loaded from JSON; missing fields take defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data_dir: PathBuf,
    pub output_dir: PathBuf,
    /// Defaults to `<output_dir>/returns`.
    pub returns_dir: Option<PathBuf>,
    /// Defaults to `<output_dir>/casebase.jsonl`.
    pub case_base: Option<PathBuf>,
    pub allow_gap_fill_days: u32,
    pub window: usize,
    pub horizon: usize,
    pub require_full_warmup: bool,
    pub variants: Vec<Variant>,
    pub w: f64,
    pub ks: Vec<usize>,
    pub k: usize,
    pub sweep_k: usize,
    pub w_grid: Vec<f64>,
    pub histogram_bins: usize,
    pub options: PredictionOptions,
    pub top_n: usize,
    pub initial_capital: f64,
    pub cost_bps: f64,
    pub shortfall: Shortfall,
    pub start: Option<YearMonth>,
    pub end: Option<YearMonth>,
    pub runs: usize,
    pub drop_fraction: f64,
    pub master_seed: u64,
    pub write_ledgers: bool,
    /// Worker threads; 0 lets rayon decide.
    pub jobs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data_dir: PathBuf::from("data"),
            output_dir: PathBuf::from("out"),
            returns_dir: None,
            case_base: None,
            allow_gap_fill_days: 0,
            window: DEFAULT_WINDOW,
            horizon: DEFAULT_HORIZON,
            require_full_warmup: true,
            variants: Variant::ALL.to_vec(),
            w: DEFAULT_WEIGHT,
            ks: DEFAULT_KS.to_vec(),
            k: 10,
            sweep_k: DEFAULT_SWEEP_K,
            w_grid: uniform_grid(20),
            histogram_bins: 20,
            options: PredictionOptions::default(),
            top_n: 5,
            initial_capital: 1000.0,
            cost_bps: 0.0,
            shortfall: Shortfall::Fail,
            start: None,
            end: None,
            runs: 100,
            drop_fraction: 0.2,
            master_seed: 42,
            write_ledgers: true,
            jobs: 0,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn returns_dir(&self) -> PathBuf {
        self.returns_dir
            .clone()
            .unwrap_or_else(|| self.output_dir.join("returns"))
    }

    pub fn case_base_path(&self) -> PathBuf {
        self.case_base
            .clone()
            .unwrap_or_else(|| self.output_dir.join("casebase.jsonl"))
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.into()));
        if self.window == 0 || self.horizon == 0 {
            return fail("window and horizon must be positive");
        }
        if !(0.0..=1.0).contains(&self.w) {
            return fail("w must lie in [0, 1]");
        }
        if self.variants.is_empty() {
            return fail("at least one variant is required");
        }
        if self.ks.is_empty() || self.ks.contains(&0) || self.k == 0 || self.sweep_k == 0 {
            return fail("k values must be positive");
        }
        if self.top_n == 0 || !(self.initial_capital > 0.0) {
            return fail("top_n and initial_capital must be positive");
        }
        if self.runs == 0 || !(0.0..1.0).contains(&self.drop_fraction) {
            return fail("runs must be >= 1 and drop_fraction in [0, 1)");
        }
        if self.histogram_bins == 0 {
            return fail("histogram_bins must be positive");
        }
        if !(self.options.epsilon > 0.0) {
            return fail("epsilon must be positive");
        }
        Ok(())
    }

    pub fn similarity_configs(&self) -> Vec<SimilarityConfig> {
        self.variants
            .iter()
            .map(|&variant| SimilarityConfig {
                variant,
                weight: self.w,
            })
            .collect()
    }

    pub fn backtest_config(&self) -> BacktestConfig {
        BacktestConfig {
            initial_capital: self.initial_capital,
            top_n: self.top_n,
            k: self.k,
            horizon: self.horizon,
            start: self.start,
            end: self.end,
            shortfall: self.shortfall,
            cost_bps: self.cost_bps,
            require_full_warmup: self.require_full_warmup,
            options: self.options,
        }
    }
}
