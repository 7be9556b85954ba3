//! Daily prices to month-end prices to monthly returns, including what
//! happens when a month is missing.

use cbrq::market_data::{to_month_end_prices_with, ResampleOptions};
use cbrq::synthetic::{daily_price_csv, random_dataset};
use cbrq::{parse_daily_prices, to_month_end_prices, to_returns};

fn main() -> cbrq::Result<()> {
    let series = &random_dataset(1, 6, 0.01, 0.05, 7)[0];
    let csv = daily_price_csv(series, 100.0);
    println!("{}", csv.lines().take(4).collect::<Vec<_>>().join("\n"));

    let daily = parse_daily_prices("ACME", csv.as_bytes())?;
    let monthly = to_month_end_prices(&daily)?;
    let returns = to_returns(&monthly)?;
    println!("\n{} daily rows -> {} month ends", daily.len(), monthly.len());
    for (m, r) in returns.months().zip(&returns.returns) {
        println!("{m}  {r:+.4}");
    }

    // Drop every observation in 2005-03.
    let gappy: String = csv
        .lines()
        .filter(|l| !l.starts_with("2005-03"))
        .map(|l| format!("{l}\n"))
        .collect();
    let daily = parse_daily_prices("ACME", gappy.as_bytes())?;
    match to_month_end_prices(&daily) {
        Err(e) => println!("\nstrict resampling: {e}"),
        Ok(_) => unreachable!(),
    }
    let filled = to_month_end_prices_with(&daily, ResampleOptions { allow_gap_fill_days: 45 })?;
    println!("with 45-day gap fill: {} month ends", filled.len());
    Ok(())
}
