//! Daily price ingestion, month-end resampling and monthly simple returns.
//!
//! Price files are CSV with at least a `Date` (`YYYY-MM-DD`) and an
//! `Adj Close` column; everything else is ignored. Rows whose price is empty,
//! `null` or `NaN` are dropped as missing observations, so a month without any
//! usable row surfaces later as a gap.

use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::month::YearMonth;

const DATE_COLUMN: &str = "Date";
const PRICE_COLUMN: &str = "Adj Close";

#[derive(Debug, Clone, PartialEq)]
pub struct DailyPriceSeries {
    pub asset_id: String,
    observations: Vec<(NaiveDate, f64)>,
}

impl DailyPriceSeries {
    /// Sorts by date and validates positivity and date uniqueness.
    pub fn new(asset_id: impl Into<String>, mut observations: Vec<(NaiveDate, f64)>) -> Result<Self> {
        for &(date, price) in &observations {
            if !(price.is_finite() && price > 0.0) {
                return Err(Error::Validation(format!("non-positive price {price} on {date}")));
            }
        }
        observations.sort_by_key(|&(d, _)| d);
        if let Some(w) = observations.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::Validation(format!("duplicate date {}", w[0].0)));
        }
        Ok(Self {
            asset_id: asset_id.into(),
            observations,
        })
    }

    pub fn observations(&self) -> &[(NaiveDate, f64)] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

/// Month-end prices over a contiguous run of calendar months.
#[derive(Debug, Clone, PartialEq)]
pub struct MonthlyPriceSeries {
    pub asset_id: String,
    pub start: YearMonth,
    pub prices: Vec<f64>,
}

impl MonthlyPriceSeries {
    pub fn new(asset_id: impl Into<String>, start: YearMonth, prices: Vec<f64>) -> Result<Self> {
        if let Some(p) = prices.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
            return Err(Error::Validation(format!("non-positive price {p}")));
        }
        Ok(Self {
            asset_id: asset_id.into(),
            start,
            prices,
        })
    }

    pub fn months(&self) -> impl Iterator<Item = YearMonth> + '_ {
        (0..self.prices.len() as i64).map(|i| self.start.offset(i))
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }
}

/// Monthly simple returns; `returns[i]` belongs to month `start + i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnSeries {
    pub asset_id: String,
    pub start: YearMonth,
    pub returns: Vec<f64>,
}

impl ReturnSeries {
    pub fn new(asset_id: impl Into<String>, start: YearMonth, returns: Vec<f64>) -> Result<Self> {
        if let Some(r) = returns.iter().find(|r| !(r.is_finite() && **r > -1.0)) {
            return Err(Error::Validation(format!("return {r} is not > -1")));
        }
        Ok(Self {
            asset_id: asset_id.into(),
            start,
            returns,
        })
    }

    pub fn months(&self) -> impl Iterator<Item = YearMonth> + '_ {
        (0..self.returns.len() as i64).map(|i| self.start.offset(i))
    }

    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }

    /// Rebuilds the price path `[p0, p0(1+r1), ...]`.
    pub fn reconstruct_prices(&self, initial_price: f64) -> Vec<f64> {
        let mut prices = Vec::with_capacity(self.returns.len() + 1);
        prices.push(initial_price);
        let mut p = initial_price;
        for r in &self.returns {
            p *= 1.0 + r;
            prices.push(p);
        }
        prices
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResampleOptions {
    /// A calendar month with no observations is forward-filled from the
    /// previous observation when the surrounding observations are at most
    /// this many calendar days apart. Zero disables filling.
    pub allow_gap_fill_days: u32,
}

fn is_missing(field: &str) -> bool {
    let f = field.trim();
    f.is_empty() || f.eq_ignore_ascii_case("null") || f.eq_ignore_ascii_case("nan")
}

/// Parses a daily price CSV. Row numbers in errors are 1-based file lines.
pub fn parse_daily_prices<R: Read>(asset_id: &str, reader: R) -> Result<DailyPriceSeries> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = csv.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse {
                row: 1,
                message: format!("missing column {name:?}"),
            })
    };
    let date_col = column(DATE_COLUMN)?;
    let price_col = column(PRICE_COLUMN)?;

    let mut observations = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, record) in csv.records().enumerate() {
        let row = i + 2;
        let record = record?;
        let date_field = record.get(date_col).unwrap_or("");
        let date = NaiveDate::parse_from_str(date_field, "%Y-%m-%d").map_err(|e| Error::Parse {
            row,
            message: format!("malformed date {date_field:?}: {e}"),
        })?;
        let price_field = record.get(price_col).unwrap_or("");
        if is_missing(price_field) {
            continue;
        }
        let price: f64 = price_field.parse().map_err(|_| Error::Parse {
            row,
            message: format!("malformed price {price_field:?}"),
        })?;
        if price.is_nan() {
            continue;
        }
        if !(price > 0.0 && price.is_finite()) {
            return Err(Error::Validation(format!("row {row}: non-positive price {price}")));
        }
        if !seen.insert(date) {
            return Err(Error::Validation(format!("row {row}: duplicate date {date}")));
        }
        observations.push((date, price));
    }
    DailyPriceSeries::new(asset_id, observations)
}

pub fn to_month_end_prices(daily: &DailyPriceSeries) -> Result<MonthlyPriceSeries> {
    to_month_end_prices_with(daily, ResampleOptions::default())
}

/// Takes the last observation of each calendar month.
pub fn to_month_end_prices_with(
    daily: &DailyPriceSeries,
    options: ResampleOptions,
) -> Result<MonthlyPriceSeries> {
    let obs = daily.observations();
    let Some(&(first_date, _)) = obs.first() else {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    };
    let start = YearMonth::of(first_date);
    let mut prices: Vec<f64> = Vec::new();
    let mut current = start;
    let mut prev: Option<(NaiveDate, f64)> = None;

    for (i, &(date, price)) in obs.iter().enumerate() {
        let month = YearMonth::of(date);
        while current < month {
            // `current` is complete iff it received the previous observation.
            let filled = prev.is_some_and(|(d, _)| YearMonth::of(d) == current);
            if !filled {
                let (prev_date, prev_price) = prev.expect("first observation opens the span");
                let gap = (date - prev_date).num_days();
                if options.allow_gap_fill_days == 0 || gap > options.allow_gap_fill_days as i64 {
                    return Err(Error::MonthGap {
                        asset: daily.asset_id.clone(),
                        month: current,
                    });
                }
                prices.push(prev_price);
            }
            current = current.succ();
        }
        let is_last_in_month = obs
            .get(i + 1)
            .is_none_or(|&(next, _)| YearMonth::of(next) != month);
        if is_last_in_month {
            prices.push(price);
        }
        prev = Some((date, price));
    }
    MonthlyPriceSeries::new(daily.asset_id.clone(), start, prices)
}

/// `r[t] = (p[t] - p[t-1]) / p[t-1]`, labelled with the month of `p[t]`.
pub fn to_returns(monthly: &MonthlyPriceSeries) -> Result<ReturnSeries> {
    if monthly.prices.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: monthly.prices.len(),
        });
    }
    let returns = monthly
        .prices
        .windows(2)
        .map(|w| (w[1] - w[0]) / w[0])
        .collect();
    ReturnSeries::new(monthly.asset_id.clone(), monthly.start.succ(), returns)
}

#[derive(Debug, Serialize, Deserialize)]
struct ReturnRow {
    ticker: String,
    year: i32,
    month: u32,
    #[serde(rename = "return")]
    value: f64,
}

/// Writes `ticker,year,month,return` rows.
pub fn write_returns_csv<W: Write>(series: &[ReturnSeries], writer: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    for s in series {
        for (month, &value) in s.months().zip(&s.returns) {
            csv.serialize(ReturnRow {
                ticker: s.asset_id.clone(),
                year: month.year,
                month: month.month,
                value,
            })?;
        }
    }
    csv.flush()?;
    Ok(())
}

/// Reads `ticker,year,month,return` rows; each ticker's months must be contiguous.
pub fn read_returns_csv<R: Read>(reader: R) -> Result<Vec<ReturnSeries>> {
    let mut csv = csv::Reader::from_reader(reader);
    let mut out: Vec<ReturnSeries> = Vec::new();
    for (i, row) in csv.deserialize::<ReturnRow>().enumerate() {
        let row_no = i + 2;
        let row = row.map_err(|e| Error::Parse {
            row: row_no,
            message: e.to_string(),
        })?;
        let month = YearMonth::new(row.year, row.month)?;
        match out.last_mut() {
            Some(s) if s.asset_id == row.ticker => {
                let expected = s.start.offset(s.returns.len() as i64);
                if month != expected {
                    return Err(Error::Parse {
                        row: row_no,
                        message: format!("{}: expected {expected}, found {month}", row.ticker),
                    });
                }
                s.returns.push(row.value);
            }
            _ => out.push(ReturnSeries {
                asset_id: row.ticker,
                start: month,
                returns: vec![row.value],
            }),
        }
    }
    out.into_iter()
        .map(|s| ReturnSeries::new(s.asset_id, s.start, s.returns))
        .collect()
}
