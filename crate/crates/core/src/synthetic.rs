//! Seeded synthetic return data for examples, demos and tests.

use std::fmt::Write as _;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::market_data::ReturnSeries;
use crate::month::YearMonth;

pub fn default_start() -> YearMonth {
    YearMonth { year: 2005, month: 2 }
}

/// Independent uniform returns in `[-spread, spread]` plus `drift`.
pub fn random_dataset(assets: usize, months: usize, drift: f64, spread: f64, seed: u64) -> Vec<ReturnSeries> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..assets)
        .map(|a| ReturnSeries {
            asset_id: format!("R{a:03}"),
            start: default_start(),
            returns: (0..months)
                .map(|_| drift + rng.random_range(-spread..=spread))
                .collect(),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeSpec {
    pub assets: usize,
    pub months: usize,
    pub templates: usize,
    /// Length of each repeating template.
    pub period: usize,
    /// Template returns are drawn from `[-amplitude, amplitude]`.
    pub amplitude: f64,
    /// Half-width of the uniform noise added to every return.
    pub noise: f64,
}

impl Default for RegimeSpec {
    fn default() -> Self {
        Self {
            assets: 40,
            months: 60,
            templates: 4,
            period: 6,
            amplitude: 0.08,
            noise: 0.005,
        }
    }
}

/// Every asset repeats one of `templates` return patterns, at a random
/// phase, plus small noise. Asset `i` follows template `i % templates`.
pub fn regime_dataset(spec: &RegimeSpec, seed: u64) -> Vec<ReturnSeries> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let templates: Vec<Vec<f64>> = (0..spec.templates)
        .map(|_| {
            (0..spec.period)
                .map(|_| rng.random_range(-spec.amplitude..=spec.amplitude))
                .collect()
        })
        .collect();
    (0..spec.assets)
        .map(|a| {
            let t = &templates[a % spec.templates];
            let phase = rng.random_range(0..spec.period);
            let returns = (0..spec.months)
                .map(|m| {
                    let noise = if spec.noise > 0.0 {
                        rng.random_range(-spec.noise..=spec.noise)
                    } else {
                        0.0
                    };
                    t[(m + phase) % spec.period] + noise
                })
                .collect();
            ReturnSeries {
                asset_id: format!("G{a:03}"),
                start: default_start(),
                returns,
            }
        })
        .collect()
}

/// Renders a daily price CSV (`Date,Open,Adj Close`) whose month-end prices
/// reproduce `series` from `initial_price`. Three trading days per month;
/// the first covered month is the one before `series.start`.
pub fn daily_price_csv(series: &ReturnSeries, initial_price: f64) -> String {
    let prices = series.reconstruct_prices(initial_price);
    let mut out = String::from("Date,Open,Adj Close\n");
    let first = series.start.pred();
    for (i, &p) in prices.iter().enumerate() {
        let m = first.offset(i as i64);
        let prev = if i == 0 { p } else { prices[i - 1] };
        for (day, price) in [(3, prev), (15, 0.5 * (prev + p)), (28, p)] {
            let date = NaiveDate::from_ymd_opt(m.year, m.month, day).expect("valid day");
            writeln!(out, "{date},{price},{price}").expect("string write");
        }
    }
    out
}
