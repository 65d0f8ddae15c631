//! Trajectory data model.
//!
//! A [`Dataset`] is a list of [`Trajectory`] values, each an ordered run of
//! [`Record`]s with one record designated as the quasi-identifier (the point an
//! adversary can link to background knowledge) and one as the sensitive
//! attribute (the point whose meaning the adversary wants to infer).

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use chrono::{DateTime, NaiveDateTime, SecondsFormat, Timelike, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Timestamp = DateTime<Utc>;

/// WGS84 position in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coord {
    pub lon: f64,
    pub lat: f64,
}

impl Coord {
    pub const fn new(lon: f64, lat: f64) -> Self {
        Self { lon, lat }
    }

    pub fn is_valid(&self) -> bool {
        (-180.0..=180.0).contains(&self.lon) && (-90.0..=90.0).contains(&self.lat)
    }
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.6}, {:.6})", self.lon, self.lat)
    }
}

/// One spatio-temporal point of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub t: Timestamp,
    pub s: Coord,
    pub traj_id: String,
    /// Opaque attributes carried through every stage untouched.
    pub extras: BTreeMap<String, String>,
}

impl Record {
    pub fn new(t: Timestamp, s: Coord, traj_id: impl Into<String>) -> Self {
        Self {
            t,
            s,
            traj_id: traj_id.into(),
            extras: BTreeMap::new(),
        }
    }

    pub fn with_extras(mut self, extras: BTreeMap<String, String>) -> Self {
        self.extras = extras;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    id: String,
    records: Vec<Record>,
    qi_index: usize,
    sa_index: usize,
}

impl Trajectory {
    /// Builds a trajectory whose first record is the quasi-identifier and whose
    /// last record is the sensitive attribute.
    pub fn new(id: impl Into<String>, records: Vec<Record>) -> Result<Self> {
        let sa = records.len().saturating_sub(1);
        Self::with_roles(id, records, 0, sa)
    }

    pub fn with_roles(
        id: impl Into<String>,
        records: Vec<Record>,
        qi_index: usize,
        sa_index: usize,
    ) -> Result<Self> {
        let id = id.into();
        let fail = |message: &str| Error::Trajectory {
            id: id.clone(),
            message: message.to_string(),
        };
        if id.is_empty() {
            return Err(fail("empty pseudonym"));
        }
        if records.len() < 2 {
            return Err(fail("needs at least two records"));
        }
        if qi_index >= records.len() || sa_index >= records.len() {
            return Err(fail("role index out of range"));
        }
        if qi_index == sa_index {
            return Err(fail("quasi-identifier and sensitive attribute must differ"));
        }
        if records.windows(2).any(|w| w[1].t < w[0].t) {
            return Err(fail("records are not in time order"));
        }
        if let Some(r) = records.iter().find(|r| !r.s.is_valid()) {
            return Err(fail(&format!("coordinate {} out of range", r.s)));
        }
        if records.iter().any(|r| r.traj_id != id) {
            return Err(fail("record pseudonym does not match trajectory"));
        }
        Ok(Self {
            id,
            records,
            qi_index,
            sa_index,
        })
    }

    /// Rebuilds a trajectory from a perturbed copy of its records.
    ///
    /// Noise may push a drop-off before its pick-up, so time order is not
    /// re-checked here; roles and ids are inherited from `self`.
    pub(crate) fn with_replaced_records(&self, records: Vec<Record>) -> Self {
        debug_assert_eq!(records.len(), self.records.len());
        Self {
            id: self.id.clone(),
            records,
            qi_index: self.qi_index,
            sa_index: self.sa_index,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn qi_index(&self) -> usize {
        self.qi_index
    }

    pub fn sa_index(&self) -> usize {
        self.sa_index
    }

    pub fn qi(&self) -> &Record {
        &self.records[self.qi_index]
    }

    pub fn sa(&self) -> &Record {
        &self.records[self.sa_index]
    }

    /// Signed elapsed time from the quasi-identifier to the sensitive attribute.
    pub fn duration(&self) -> chrono::Duration {
        self.sa().t - self.qi().t
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    trajectories: Vec<Trajectory>,
    pub provenance: String,
}

impl Dataset {
    pub fn new(trajectories: Vec<Trajectory>, provenance: impl Into<String>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(trajectories.len());
        for t in &trajectories {
            if !seen.insert(t.id()) {
                return Err(Error::DuplicateTrajectory(t.id().to_string()));
            }
        }
        Ok(Self {
            trajectories,
            provenance: provenance.into(),
        })
    }

    /// Caller guarantees unique ids (e.g. a subset or a per-trajectory map of a valid dataset).
    pub(crate) fn from_unique(trajectories: Vec<Trajectory>, provenance: String) -> Self {
        Self {
            trajectories,
            provenance,
        }
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    /// Earliest and latest timestamps over every record.
    pub fn time_span(&self) -> Option<(Timestamp, Timestamp)> {
        let mut it = self.trajectories.iter().flat_map(|t| t.records.iter().map(|r| r.t));
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), t| (lo.min(t), hi.max(t))))
    }
}

/// Axis-aligned lon/lat box, closed on all sides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub lon_min: f64,
    pub lat_min: f64,
    pub lon_max: f64,
    pub lat_max: f64,
}

impl BBox {
    /// Decimal reading of the NYC taxi cleaning box (74°40'W..71°45'W, 40°18'N..41°30'N).
    pub const NYC: BBox = BBox {
        lon_min: -74.667,
        lat_min: 40.3,
        lon_max: -71.75,
        lat_max: 41.5,
    };

    pub fn new(lon_min: f64, lat_min: f64, lon_max: f64, lat_max: f64) -> Result<Self> {
        let b = Self {
            lon_min,
            lat_min,
            lon_max,
            lat_max,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.lon_min, self.lat_min, self.lon_max, self.lat_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.lon_min >= self.lon_max || self.lat_min >= self.lat_max {
            return Err(Error::Config(format!("bounding box {self:?} is not well-ordered")));
        }
        Ok(())
    }

    pub fn contains(&self, c: Coord) -> bool {
        (self.lon_min..=self.lon_max).contains(&c.lon) && (self.lat_min..=self.lat_max).contains(&c.lat)
    }
}

/// Half-open time interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimeInterval {
    pub start: Timestamp,
    pub end: Timestamp,
}

impl TimeInterval {
    /// Covers every representable instant.
    pub const ALL: TimeInterval = TimeInterval {
        start: DateTime::<Utc>::MIN_UTC,
        end: DateTime::<Utc>::MAX_UTC,
    };

    pub fn new(start: Timestamp, end: Timestamp) -> Result<Self> {
        if start >= end {
            return Err(Error::Config(format!(
                "time interval [{}, {}) is empty",
                format_timestamp(start),
                format_timestamp(end)
            )));
        }
        Ok(Self { start, end })
    }

    pub fn contains(&self, t: Timestamp) -> bool {
        self.start <= t && t < self.end
    }

    pub fn overlaps(&self, other: &TimeInterval) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn is_unbounded_start(&self) -> bool {
        self.start == DateTime::<Utc>::MIN_UTC
    }

    pub fn is_unbounded_end(&self) -> bool {
        self.end == DateTime::<Utc>::MAX_UTC
    }
}

/// Textual layout of a timestamp column, detected from its first value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeFormat {
    /// ISO-8601 / RFC 3339 with a `T` separator, with or without an offset.
    Iso,
    /// `YYYY-MM-DD HH:MM:SS`, taken as UTC.
    Space,
}

impl TimeFormat {
    pub fn detect(value: &str) -> Option<Self> {
        let v = value.trim();
        if parse_with(v, TimeFormat::Iso).is_some() {
            Some(TimeFormat::Iso)
        } else if parse_with(v, TimeFormat::Space).is_some() {
            Some(TimeFormat::Space)
        } else {
            None
        }
    }

    pub fn parse(self, value: &str) -> Option<Timestamp> {
        parse_with(value.trim(), self)
    }
}

fn parse_with(v: &str, fmt: TimeFormat) -> Option<Timestamp> {
    let t = match fmt {
        TimeFormat::Iso => DateTime::parse_from_rfc3339(v)
            .map(|d| d.with_timezone(&Utc))
            .ok()
            .or_else(|| {
                NaiveDateTime::parse_from_str(v, "%Y-%m-%dT%H:%M:%S%.f")
                    .ok()
                    .map(|n| n.and_utc())
            })?,
        TimeFormat::Space => NaiveDateTime::parse_from_str(v, "%Y-%m-%d %H:%M:%S%.f")
            .ok()?
            .and_utc(),
    };
    // Records carry second resolution.
    t.with_nanosecond(0)
}

/// Parses either supported timestamp layout.
pub fn parse_timestamp(value: &str) -> Option<Timestamp> {
    TimeFormat::detect(value).and_then(|f| f.parse(value))
}

/// ISO-8601 UTC with a `Z` suffix and whole seconds.
pub fn format_timestamp(t: Timestamp) -> String {
    t.to_rfc3339_opts(SecondsFormat::Secs, true)
}
