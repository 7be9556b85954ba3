//! Pearson correlation cannot tell a series from a shifted copy of itself;
//! the zero-referenced correlation can.

use cbrq::{adjusted_corr, pearson};

fn main() -> cbrq::Result<()> {
    let x = [0.05, 0.02, 0.08, -0.01, 0.04, 0.06, 0.03, 0.07, 0.01, 0.05, 0.02, 0.04];
    println!("{:>6} {:>10} {:>10}", "shift", "pearson", "adjusted");
    for c in [0.0, 0.01, 0.03, 0.05, 0.1, 0.2] {
        let y: Vec<f64> = x.iter().map(|v| v - c).collect();
        println!("{c:>6.2} {:>10.6} {:>10.6}", pearson(&x, &y)?, adjusted_corr(&x, &y)?);
    }
    let neg: Vec<f64> = x.iter().map(|v| -v).collect();
    println!("\nadjusted(x, -x) = {}", adjusted_corr(&x, &neg)?);
    Ok(())
}
