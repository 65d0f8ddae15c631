//! Dataset cleaning: minimum trip duration, bounding box, and a time window
//! on the quasi-identifier record.

use chrono::{Duration, NaiveTime};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{BBox, Dataset, TimeInterval, Timestamp, Trajectory};

/// Window applied to the quasi-identifier timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QiWindow {
    /// A single absolute interval.
    Absolute(TimeInterval),
    /// A `[start, end)` time-of-day range (UTC), applied on every day.
    /// `start > end` wraps around midnight.
    Daily { start: NaiveTime, end: NaiveTime },
}

impl QiWindow {
    pub fn contains(&self, t: Timestamp) -> bool {
        match *self {
            QiWindow::Absolute(iv) => iv.contains(t),
            QiWindow::Daily { start, end } => {
                let tod = t.time();
                if start <= end {
                    start <= tod && tod < end
                } else {
                    tod >= start || tod < end
                }
            }
        }
    }

    /// Parses `HH:MM..HH:MM` (daily) or `<timestamp>..<timestamp>` (absolute).
    pub fn parse(text: &str) -> Result<Self> {
        let (a, b) = text
            .split_once("..")
            .ok_or_else(|| Error::Config(format!("window {text:?} must look like start..end")))?;
        let (a, b) = (a.trim(), b.trim());
        let tod = |v: &str| {
            NaiveTime::parse_from_str(v, "%H:%M")
                .or_else(|_| NaiveTime::parse_from_str(v, "%H:%M:%S"))
        };
        if let (Ok(start), Ok(end)) = (tod(a), tod(b)) {
            if start == end {
                return Err(Error::Config(format!("window {text:?} is empty")));
            }
            return Ok(QiWindow::Daily { start, end });
        }
        let ts = |v: &str| {
            crate::model::parse_timestamp(v)
                .ok_or_else(|| Error::Config(format!("bad timestamp {v:?} in window {text:?}")))
        };
        Ok(QiWindow::Absolute(TimeInterval::new(ts(a)?, ts(b)?)?))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterConfig {
    pub min_duration: Duration,
    pub bbox: BBox,
    pub time_window: Option<QiWindow>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            min_duration: Duration::seconds(60),
            bbox: BBox::NYC,
            time_window: None,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_duration < Duration::zero() {
            return Err(Error::Config("minimum duration must be non-negative".into()));
        }
        self.bbox.validate()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct FilterReport {
    pub input_count: usize,
    pub kept_count: usize,
    pub dropped_duration: usize,
    pub dropped_bbox: usize,
    pub dropped_window: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Verdict {
    Keep,
    Duration,
    BBox,
    Window,
}

fn judge(t: &Trajectory, f: &FilterConfig) -> Verdict {
    if t.duration() < f.min_duration {
        Verdict::Duration
    } else if !(f.bbox.contains(t.qi().s) && f.bbox.contains(t.sa().s)) {
        Verdict::BBox
    } else if f.time_window.is_some_and(|w| !w.contains(t.qi().t)) {
        Verdict::Window
    } else {
        Verdict::Keep
    }
}

/// Keeps trajectories that pass every rule, in input order. Each dropped
/// trajectory is charged to the first rule it fails (duration, bbox, window).
pub fn filter_dataset(d: &Dataset, f: &FilterConfig) -> (Dataset, FilterReport) {
    let mut report = FilterReport {
        input_count: d.len(),
        ..Default::default()
    };
    let mut kept = Vec::new();
    for t in d.trajectories() {
        match judge(t, f) {
            Verdict::Keep => kept.push(t.clone()),
            Verdict::Duration => report.dropped_duration += 1,
            Verdict::BBox => report.dropped_bbox += 1,
            Verdict::Window => report.dropped_window += 1,
        }
    }
    report.kept_count = kept.len();
    (Dataset::from_unique(kept, d.provenance.clone()), report)
}
