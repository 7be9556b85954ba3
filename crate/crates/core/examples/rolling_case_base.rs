//! Cases, the rolling retrieval window and case-base persistence.

use cbrq::synthetic::random_dataset;
use cbrq::{build_case_base, load_case_base, rolling_case_base, save_case_base, QueryCase};

fn main() -> cbrq::Result<()> {
    let data = random_dataset(8, 36, 0.005, 0.08, 1);
    let base = build_case_base(&data, 12)?;
    println!("{} assets x (36 - 12) months = {} cases", data.len(), base.len());

    let first = base.first_month().expect("non-empty");
    for offset in [1, 3, 6, 12] {
        let view = base.rolling_window(first.offset(offset), 6)?;
        println!(
            "anchor {}: {:>3} candidates, warm = {}, missing {:?}",
            view.anchor,
            view.cases.len(),
            view.is_warm(),
            view.missing_months.iter().map(|m| m.to_string()).collect::<Vec<_>>()
        );
    }

    let query = QueryCase::from(base.lookup("R003", first.offset(12)).expect("case exists"));
    let window = rolling_case_base(&query, &base, 6)?;
    println!("materialised window for {}: {} cases", query.key, window.len());

    let mut buf = Vec::new();
    save_case_base(&base, &mut buf)?;
    let back = load_case_base(buf.as_slice())?;
    println!("saved {} bytes, reloaded {} cases", buf.len(), back.len());
    Ok(())
}
