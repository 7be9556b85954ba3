//! Calendar-month labels.

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::Error;

/// A calendar month. Orders chronologically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct YearMonth {
    pub year: i32,
    pub month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Result<Self, Error> {
        if !(1..=12).contains(&month) {
            return Err(Error::Validation(format!("month {month} out of range")));
        }
        Ok(Self { year, month })
    }

    pub fn of(date: NaiveDate) -> Self {
        Self {
            year: date.year(),
            month: date.month(),
        }
    }

    /// Months since year 0, January.
    pub fn ordinal(self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    pub fn from_ordinal(ordinal: i64) -> Self {
        Self {
            year: ordinal.div_euclid(12) as i32,
            month: ordinal.rem_euclid(12) as u32 + 1,
        }
    }

    pub fn offset(self, months: i64) -> Self {
        Self::from_ordinal(self.ordinal() + months)
    }

    pub fn succ(self) -> Self {
        self.offset(1)
    }

    pub fn pred(self) -> Self {
        self.offset(-1)
    }

    /// Signed number of months from `self` to `other`.
    pub fn months_until(self, other: YearMonth) -> i64 {
        other.ordinal() - self.ordinal()
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (y, m) = s
            .trim()
            .split_once('-')
            .ok_or_else(|| Error::Validation(format!("expected YYYY-MM, got {s:?}")))?;
        let year = y
            .parse()
            .map_err(|_| Error::Validation(format!("bad year in {s:?}")))?;
        let month = m
            .parse()
            .map_err(|_| Error::Validation(format!("bad month in {s:?}")))?;
        YearMonth::new(year, month)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordinal_round_trip_across_year_boundary() {
        let dec = YearMonth::new(2019, 12).unwrap();
        assert_eq!(dec.succ(), YearMonth::new(2020, 1).unwrap());
        assert_eq!(dec.succ().pred(), dec);
        assert_eq!(dec.offset(-12), YearMonth::new(2018, 12).unwrap());
        assert_eq!(dec.months_until(dec.offset(7)), 7);
    }

    #[test]
    fn parse_and_display() {
        let m: YearMonth = "2005-03".parse().unwrap();
        assert_eq!(m.to_string(), "2005-03");
        assert!("2005-13".parse::<YearMonth>().is_err());
        assert!("200503".parse::<YearMonth>().is_err());
    }
}
