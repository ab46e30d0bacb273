use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Divisor used for the standard deviation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StdKind {
    /// Divide by N.
    #[default]
    Population,
    /// Divide by N - 1 (0 for a single value).
    Sample,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub best: f64,
    pub n: usize,
}

impl Summary {
    /// `mean±std` with one decimal, as in the result tables.
    pub fn formatted(&self) -> String {
        format_mean_std(self.mean, self.std)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("cannot summarize an empty list of scores")]
pub struct EmptyScores;

pub fn aggregate_stats(scores: &[f64], kind: StdKind) -> Result<Summary, EmptyScores> {
    if scores.is_empty() {
        return Err(EmptyScores);
    }
    let n = scores.len();
    let mean = scores.iter().sum::<f64>() / n as f64;
    let ss: f64 = scores.iter().map(|x| (x - mean).powi(2)).sum();
    let std = match kind {
        StdKind::Population => (ss / n as f64).sqrt(),
        StdKind::Sample if n > 1 => (ss / (n - 1) as f64).sqrt(),
        StdKind::Sample => 0.0,
    };
    let best = scores.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(Summary { mean, std, best, n })
}

pub fn format_mean_std(mean: f64, std: f64) -> String {
    // avoid "-0.0" from tiny negative rounding
    let clean = |x: f64| if x.abs() < 0.05 { 0.0 } else { x };
    format!("{:.1}±{:.1}", clean(mean), clean(std))
}
