use serde::Serialize;

use crate::error::{Error, Result};

/// One step of an empirical CDF: `fraction` of the scores lie strictly below `threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StairStep {
    pub fraction: f64,
    pub threshold: f64,
}

/// Empirical CDF of a per-trajectory score, one step per distinct score value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Staircase {
    pub steps: Vec<StairStep>,
    pub count: usize,
}

impl Staircase {
    pub fn from_scores(scores: impl IntoIterator<Item = f64>) -> Result<Self> {
        let mut values: Vec<f64> = scores.into_iter().filter(|v| !v.is_nan()).collect();
        if values.is_empty() {
            return Err(Error::EmptyStaircase);
        }
        values.sort_by(f64::total_cmp);
        let n = values.len();
        let mut steps = Vec::new();
        for (i, &v) in values.iter().enumerate() {
            if i == 0 || values[i - 1] != v {
                steps.push(StairStep {
                    fraction: i as f64 / n as f64,
                    threshold: v,
                });
            }
        }
        Ok(Self { steps, count: n })
    }

    /// Fraction of scores strictly below `threshold`.
    pub fn fraction_below(&self, threshold: f64) -> f64 {
        let idx = self.steps.partition_point(|s| s.threshold < threshold);
        match self.steps.get(idx) {
            Some(step) => step.fraction,
            None => 1.0,
        }
    }
}

/// Staircase over a map of scores keyed by trajectory id.
pub fn staircase<'a, K: 'a>(scores: impl IntoIterator<Item = (&'a K, &'a f64)>) -> Result<Staircase> {
    Staircase::from_scores(scores.into_iter().map(|(_, v)| *v))
}
