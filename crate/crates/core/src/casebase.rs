//! Cases, the indexed case base, and the per-query rolling window.
//!
//! A case anchored at month `t` describes the `window` returns
//! `r[t-window] .. r[t-1]` and carries `r[t]` as its solution. The rolling
//! window for a query anchored at `t` holds every case anchored at
//! `t-1 ..= t-horizon` across all assets, so no retrieved solution is at or
//! after the month being predicted.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::error::{Error, Result};
use crate::market_data::ReturnSeries;
use crate::month::YearMonth;

pub const DEFAULT_WINDOW: usize = 12;
pub const DEFAULT_HORIZON: usize = 6;
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CaseKey {
    pub asset_id: String,
    pub anchor: YearMonth,
}

impl fmt::Display for CaseKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.asset_id, self.anchor)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Case {
    pub key: CaseKey,
    pub description: Vec<f64>,
    pub solution: f64,
}

impl Case {
    pub fn asset_id(&self) -> &str {
        &self.key.asset_id
    }

    pub fn anchor(&self) -> YearMonth {
        self.key.anchor
    }
}

/// A case presented for retrieval. The solution is unknown at prediction
/// time and only present during offline evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryCase {
    pub key: CaseKey,
    pub description: Vec<f64>,
    pub solution: Option<f64>,
}

impl QueryCase {
    pub fn anchor(&self) -> YearMonth {
        self.key.anchor
    }
}

impl From<&Case> for QueryCase {
    fn from(c: &Case) -> Self {
        Self {
            key: c.key.clone(),
            description: c.description.clone(),
            solution: Some(c.solution),
        }
    }
}

/// Slides a `window`-length description over the series; one case per month
/// that has `window` predecessors.
pub fn build_cases(returns: &ReturnSeries, window: usize) -> Vec<Case> {
    assert!(window > 0, "window must be positive");
    if returns.len() <= window {
        return Vec::new();
    }
    (window..returns.len())
        .map(|t| Case {
            key: CaseKey {
                asset_id: returns.asset_id.clone(),
                anchor: returns.start.offset(t as i64),
            },
            description: returns.returns[t - window..t].to_vec(),
            solution: returns.returns[t],
        })
        .collect()
}

/// Immutable collection of cases indexed by key and by anchor month.
#[derive(Debug, Clone, Default)]
pub struct CaseBase {
    window: usize,
    cases: Vec<Case>,
    by_key: HashMap<CaseKey, usize>,
    by_month: BTreeMap<YearMonth, Vec<usize>>,
}

impl PartialEq for CaseBase {
    fn eq(&self, other: &Self) -> bool {
        self.window == other.window && self.cases == other.cases
    }
}

impl CaseBase {
    /// Indexes `cases`, rejecting duplicate keys and mismatched description lengths.
    pub fn from_cases(window: usize, cases: Vec<Case>) -> Result<Self> {
        let mut by_key = HashMap::with_capacity(cases.len());
        let mut by_month: BTreeMap<YearMonth, Vec<usize>> = BTreeMap::new();
        for (i, c) in cases.iter().enumerate() {
            if c.description.len() != window {
                return Err(Error::Validation(format!(
                    "case {} has description length {}, expected {window}",
                    c.key,
                    c.description.len()
                )));
            }
            if by_key.insert(c.key.clone(), i).is_some() {
                return Err(Error::Integrity {
                    asset: c.key.asset_id.clone(),
                    month: c.key.anchor,
                });
            }
            by_month.entry(c.key.anchor).or_default().push(i);
        }
        Ok(Self {
            window,
            cases,
            by_key,
            by_month,
        })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    pub fn cases(&self) -> &[Case] {
        &self.cases
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Case> {
        self.cases.iter()
    }

    pub fn get(&self, key: &CaseKey) -> Option<&Case> {
        self.by_key.get(key).map(|&i| &self.cases[i])
    }

    pub fn lookup(&self, asset_id: &str, anchor: YearMonth) -> Option<&Case> {
        self.get(&CaseKey {
            asset_id: asset_id.to_owned(),
            anchor,
        })
    }

    pub fn at_month(&self, month: YearMonth) -> impl Iterator<Item = &Case> + '_ {
        self.by_month
            .get(&month)
            .into_iter()
            .flatten()
            .map(|&i| &self.cases[i])
    }

    /// Anchor months present in the base, ascending.
    pub fn months(&self) -> impl Iterator<Item = YearMonth> + '_ {
        self.by_month.keys().copied()
    }

    pub fn first_month(&self) -> Option<YearMonth> {
        self.by_month.keys().next().copied()
    }

    pub fn asset_ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self.cases.iter().map(|c| c.asset_id()).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Borrowed view of the cases anchored in the `horizon` months before `anchor`.
    pub fn rolling_window(&self, anchor: YearMonth, horizon: usize) -> Result<RollingWindow<'_>> {
        if horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        let mut cases = Vec::new();
        let mut missing_months = Vec::new();
        for j in (1..=horizon as i64).rev() {
            let month = anchor.offset(-j);
            match self.by_month.get(&month) {
                Some(idx) => cases.extend(idx.iter().map(|&i| &self.cases[i])),
                None => missing_months.push(month),
            }
        }
        if cases.is_empty() {
            return Err(Error::EmptyCaseBase { month: anchor });
        }
        Ok(RollingWindow {
            anchor,
            horizon,
            cases,
            missing_months,
        })
    }
}

/// The retrieval pool for one query.
#[derive(Debug, Clone)]
pub struct RollingWindow<'a> {
    pub anchor: YearMonth,
    pub horizon: usize,
    pub cases: Vec<&'a Case>,
    /// Months inside the horizon with no cases at all (warm-up).
    pub missing_months: Vec<YearMonth>,
}

impl RollingWindow<'_> {
    pub fn is_warm(&self) -> bool {
        self.missing_months.is_empty()
    }
}

/// Builds every asset's cases and indexes the union.
pub fn build_case_base(all_assets: &[ReturnSeries], window: usize) -> Result<CaseBase> {
    let cases = all_assets
        .iter()
        .flat_map(|s| build_cases(s, window))
        .collect();
    CaseBase::from_cases(window, cases)
}

/// Materialises the rolling window for `query` as its own case base.
pub fn rolling_case_base(query: &QueryCase, full: &CaseBase, horizon: usize) -> Result<CaseBase> {
    let view = full.rolling_window(query.anchor(), horizon)?;
    if !view.is_warm() {
        warn!(
            query = %query.key,
            missing = view.missing_months.len(),
            "rolling window incomplete (warm-up)"
        );
    }
    CaseBase::from_cases(full.window(), view.cases.into_iter().cloned().collect())
}

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    window: usize,
    case_count: usize,
}

#[derive(Serialize, Deserialize)]
struct Record {
    ticker: String,
    anchor_year: i32,
    anchor_month: u32,
    description: Vec<f64>,
    solution: f64,
}

/// JSON Lines: one header line, then one case per line.
pub fn save_case_base<W: Write>(base: &CaseBase, mut out: W) -> Result<()> {
    let header = Header {
        format_version: FORMAT_VERSION,
        window: base.window,
        case_count: base.len(),
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for c in &base.cases {
        let rec = Record {
            ticker: c.key.asset_id.clone(),
            anchor_year: c.key.anchor.year,
            anchor_month: c.key.anchor.month,
            description: c.description.clone(),
            solution: c.solution,
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_case_base<R: BufRead>(input: R) -> Result<CaseBase> {
    let mut lines = input.lines();
    let load_err = |record, message: String| Error::Load {
        record,
        last_valid: record.saturating_sub(1),
        message,
    };
    let header_line = lines
        .next()
        .ok_or_else(|| load_err(0, "missing header".into()))??;
    let header: Header =
        serde_json::from_str(&header_line).map_err(|e| load_err(0, format!("bad header: {e}")))?;
    if header.format_version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: header.format_version,
            expected: FORMAT_VERSION,
        });
    }

    let mut cases = Vec::with_capacity(header.case_count);
    for (i, line) in lines.enumerate() {
        let record = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line).map_err(|e| load_err(record, e.to_string()))?;
        if rec.description.len() != header.window {
            return Err(load_err(
                record,
                format!("description length {} != window {}", rec.description.len(), header.window),
            ));
        }
        let anchor = YearMonth::new(rec.anchor_year, rec.anchor_month)
            .map_err(|e| load_err(record, e.to_string()))?;
        cases.push(Case {
            key: CaseKey {
                asset_id: rec.ticker,
                anchor,
            },
            description: rec.description,
            solution: rec.solution,
        });
    }
    if cases.len() != header.case_count {
        return Err(Error::Load {
            record: cases.len() + 1,
            last_valid: cases.len(),
            message: format!("expected {} records, found {}", header.case_count, cases.len()),
        });
    }
    CaseBase::from_cases(header.window, cases)
}
