//! Similarity between return windows.
//!
//! Six variants are supported. The hybrid metric blends closeness of
//! cumulative growth, `w / (1 + e)`, with a zero-referenced correlation,
//! `(1 - w) * tau`. Larger scores always mean more similar, including for
//! `CumulativeOnly`, which reports `1 / (1 + e)` rather than the raw distance.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::casebase::Case;
use crate::error::{Error, Result};

pub const DEFAULT_WEIGHT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    ProposedAdjusted,
    ProposedPearson,
    PearsonOnly,
    Shape,
    AdjustedOnly,
    CumulativeOnly,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::ProposedAdjusted,
        Variant::ProposedPearson,
        Variant::PearsonOnly,
        Variant::Shape,
        Variant::AdjustedOnly,
        Variant::CumulativeOnly,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::ProposedAdjusted => "ProposedAdjusted",
            Variant::ProposedPearson => "ProposedPearson",
            Variant::PearsonOnly => "PearsonOnly",
            Variant::Shape => "Shape",
            Variant::AdjustedOnly => "AdjustedOnly",
            Variant::CumulativeOnly => "CumulativeOnly",
        }
    }

    pub fn uses_weight(self) -> bool {
        matches!(self, Variant::ProposedAdjusted | Variant::ProposedPearson)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown similarity variant {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityConfig {
    pub variant: Variant,
    pub weight: f64,
}

impl Default for SimilarityConfig {
    fn default() -> Self {
        Self {
            variant: Variant::ProposedAdjusted,
            weight: DEFAULT_WEIGHT,
        }
    }
}

impl SimilarityConfig {
    pub fn new(variant: Variant, weight: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&weight) {
            return Err(Error::Config(format!("weight {weight} outside [0, 1]")));
        }
        Ok(Self { variant, weight })
    }

    pub fn of(variant: Variant) -> Self {
        Self {
            variant,
            weight: DEFAULT_WEIGHT,
        }
    }

    /// The interval scores of this configuration fall in; the lower bound
    /// is open for the cumulative and hybrid variants.
    pub fn range(&self) -> (f64, f64) {
        match self.variant {
            Variant::PearsonOnly | Variant::AdjustedOnly | Variant::Shape => (-1.0, 1.0),
            Variant::CumulativeOnly => (0.0, 1.0),
            Variant::ProposedAdjusted | Variant::ProposedPearson => (-(1.0 - self.weight), 1.0),
        }
    }

    pub fn score(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        match self.variant {
            Variant::ProposedAdjusted => combined_sim(x, y, self.weight),
            Variant::ProposedPearson => combined_sim_pearson(x, y, self.weight),
            Variant::PearsonOnly => pearson(x, y),
            Variant::Shape => shape_sim(x, y),
            Variant::AdjustedOnly => adjusted_corr(x, y),
            Variant::CumulativeOnly => Ok(1.0 / (1.0 + cumulative_distance(x, y)?)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityScore {
    pub value: f64,
    pub variant: Variant,
}

pub fn score(a: &Case, b: &Case, config: &SimilarityConfig) -> Result<SimilarityScore> {
    Ok(SimilarityScore {
        value: config.score(&a.description, &b.description)?,
        variant: config.variant,
    })
}

fn check_lengths(x: &[f64], y: &[f64], min: usize) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < min {
        return Err(Error::InsufficientData {
            needed: min,
            got: x.len(),
        });
    }
    Ok(())
}

/// Cosine of the angle between `x` and `y`.
///
/// Evaluated as `1 - |u - v|^2 / 2` (or `-1 + |u + v|^2 / 2`) on the unit
/// vectors, which keeps full relative precision near +/-1, so parallel inputs
/// score exactly 1.0. Returns `None` when either vector has zero norm.
fn cosine(x: &[f64], y: &[f64]) -> Option<f64> {
    let nx = x.iter().map(|a| a * a).sum::<f64>().sqrt();
    let ny = y.iter().map(|b| b * b).sum::<f64>().sqrt();
    if nx == 0.0 || ny == 0.0 {
        return None;
    }
    let dot: f64 = x.iter().zip(y).map(|(a, b)| (a / nx) * (b / ny)).sum();
    let value = if dot >= 0.0 {
        let d2: f64 = x.iter().zip(y).map(|(a, b)| (a / nx - b / ny).powi(2)).sum();
        1.0 - 0.5 * d2
    } else {
        let s2: f64 = x.iter().zip(y).map(|(a, b)| (a / nx + b / ny).powi(2)).sum();
        -1.0 + 0.5 * s2
    };
    Some(value.clamp(-1.0, 1.0))
}

fn centered(x: &[f64]) -> Vec<f64> {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|a| a - mean).collect()
}

/// Pearson product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_lengths(x, y, 2)?;
    // centring a constant vector can leave rounding residue instead of zeros
    let constant = |v: &[f64]| v.iter().all(|a| *a == v[0]);
    if constant(x) || constant(y) {
        return Err(Error::UndefinedCorrelation("zero-variance input to pearson"));
    }
    cosine(&centered(x), &centered(y))
        .ok_or(Error::UndefinedCorrelation("zero-variance input to pearson"))
}

/// Correlation about zero rather than about the means, i.e. the cosine
/// similarity of the raw return vectors.
pub fn adjusted_corr(x: &[f64], y: &[f64]) -> Result<f64> {
    check_lengths(x, y, 1)?;
    cosine(x, y).ok_or(Error::UndefinedCorrelation("all-zero input to adjusted correlation"))
}

/// `|prod(1 + x) - prod(1 + y)|`: distance between cumulative growth factors.
pub fn cumulative_distance(x: &[f64], y: &[f64]) -> Result<f64> {
    check_lengths(x, y, 0)?;
    if let Some(r) = x.iter().chain(y).find(|r| !(**r > -1.0)) {
        return Err(Error::Domain(format!("return {r} is not > -1")));
    }
    let gx: f64 = x.iter().map(|r| 1.0 + r).product();
    let gy: f64 = y.iter().map(|r| 1.0 + r).product();
    Ok((gx - gy).abs())
}

// At w = 1 the correlation term carries no weight and is not evaluated, so
// inputs with an undefined correlation still score.
fn blend(
    x: &[f64],
    y: &[f64],
    weight: f64,
    correlation: fn(&[f64], &[f64]) -> Result<f64>,
) -> Result<f64> {
    let distance = cumulative_distance(x, y)?;
    if weight == 1.0 {
        return Ok(weight / (1.0 + distance));
    }
    let corr = correlation(x, y)?;
    Ok(weight / (1.0 + distance) + (1.0 - weight) * corr)
}

/// Hybrid similarity `w / (1 + e) + (1 - w) * adjusted_corr`.
pub fn combined_sim(x: &[f64], y: &[f64], weight: f64) -> Result<f64> {
    blend(x, y, weight, adjusted_corr)
}

/// The hybrid metric with Pearson in place of the adjusted correlation.
pub fn combined_sim_pearson(x: &[f64], y: &[f64], weight: f64) -> Result<f64> {
    blend(x, y, weight, pearson)
}

fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// Sign-agreement shape similarity: `2 m / n - 1`, where `m` counts periods
/// moving in the same direction (a zero matches only a zero).
pub fn shape_sim(x: &[f64], y: &[f64]) -> Result<f64> {
    check_lengths(x, y, 1)?;
    let matches = x.iter().zip(y).filter(|(a, b)| sign(**a) == sign(**b)).count();
    Ok(2.0 * matches as f64 / x.len() as f64 - 1.0)
}
