//! Uniform spatio-temporal grids.
//!
//! Cell lookup is pure integer arithmetic: coordinates are measured from the
//! bbox minimum corner in nano-degrees and timestamps from the time origin in
//! seconds, then floor-divided by the cell sizes. With integer arithmetic a
//! grid whose sizes are integer multiples of another's nests into it exactly.

use chrono::Duration;
use serde::Serialize;

use super::geometry::Polygon;
use super::AreaId;
use crate::error::{Error, Result};
use crate::model::{format_timestamp, BBox, Coord, TimeInterval, Timestamp};

const NANO: f64 = 1e9;

#[derive(Debug, Clone, PartialEq)]
pub struct GridParams {
    pub bbox: BBox,
    pub spatial_size_deg: f64,
    pub temporal_size: Duration,
    pub time_range: TimeInterval,
    pub time_origin: Timestamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GridCell {
    pub col: u64,
    pub row: u64,
    pub slot: u64,
}

#[derive(Debug, Clone)]
pub struct Grid {
    params: GridParams,
    size_nano: i64,
    width_nano: i64,
    height_nano: i64,
    slot_secs: i64,
    cols: u64,
    rows: u64,
    /// Slots are numbered from the time origin; `[first_slot, end_slot)` cover the time range.
    first_slot: u64,
    end_slot: u64,
    widths: (usize, usize, usize),
}

#[derive(Serialize)]
struct GridDescription {
    kind: &'static str,
    bbox: [f64; 4],
    spatial_size_deg: f64,
    temporal_size_s: i64,
    time_range: [String; 2],
    time_origin: String,
}

fn to_nano(deg: f64) -> i64 {
    (deg * NANO).round() as i64
}

fn digits(max_index: u64) -> usize {
    max_index.max(1).ilog10() as usize + 1
}

impl Grid {
    pub fn new(params: GridParams) -> Result<Self> {
        params.bbox.validate()?;
        if !(params.spatial_size_deg.is_finite() && params.spatial_size_deg > 0.0) {
            return Err(Error::Config("spatial cell size must be positive".into()));
        }
        let size_nano = to_nano(params.spatial_size_deg);
        if size_nano == 0 {
            return Err(Error::Config("spatial cell size below 1e-9 degrees".into()));
        }
        let slot_secs = params.temporal_size.num_seconds();
        if slot_secs <= 0 || params.temporal_size != Duration::seconds(slot_secs) {
            return Err(Error::Config("temporal cell size must be a positive whole number of seconds".into()));
        }
        let range = params.time_range;
        if range.start >= range.end {
            return Err(Error::Config("grid time range is empty".into()));
        }
        if params.time_origin > range.start {
            return Err(Error::Config("time origin must not be after the start of the time range".into()));
        }
        let width_nano = to_nano(params.bbox.lon_max) - to_nano(params.bbox.lon_min);
        let height_nano = to_nano(params.bbox.lat_max) - to_nano(params.bbox.lat_min);
        let cols = (width_nano as u64).div_ceil(size_nano as u64);
        let rows = (height_nano as u64).div_ceil(size_nano as u64);
        let since = |t: Timestamp| (t - params.time_origin).num_seconds();
        let first_slot = (since(range.start) / slot_secs) as u64;
        let end_slot = (since(range.end) as u64).div_ceil(slot_secs as u64);
        Ok(Self {
            widths: (digits(cols - 1), digits(rows - 1), digits(end_slot - 1)),
            params,
            size_nano,
            width_nano,
            height_nano,
            slot_secs,
            cols,
            rows,
            first_slot,
            end_slot,
        })
    }

    pub fn params(&self) -> &GridParams {
        &self.params
    }

    pub fn cols(&self) -> u64 {
        self.cols
    }

    pub fn rows(&self) -> u64 {
        self.rows
    }

    pub fn slots(&self) -> u64 {
        self.end_slot - self.first_slot
    }

    pub fn cell_count(&self) -> u64 {
        self.cols * self.rows * self.slots()
    }

    /// Cell containing the point, or `None` outside `[bbox min, bbox max)` × time range.
    pub fn cell_at(&self, t: Timestamp, s: Coord) -> Option<GridCell> {
        if !self.params.time_range.contains(t) {
            return None;
        }
        let dx = to_nano(s.lon) - to_nano(self.params.bbox.lon_min);
        let dy = to_nano(s.lat) - to_nano(self.params.bbox.lat_min);
        if !(0..self.width_nano).contains(&dx) || !(0..self.height_nano).contains(&dy) {
            return None;
        }
        let secs = (t - self.params.time_origin).num_seconds();
        Some(GridCell {
            col: (dx / self.size_nano) as u64,
            row: (dy / self.size_nano) as u64,
            slot: (secs / self.slot_secs) as u64,
        })
    }

    pub fn id(&self, cell: GridCell) -> AreaId {
        let (wc, wr, ws) = self.widths;
        AreaId::new(format!(
            "c{:0wc$}_r{:0wr$}_t{:0ws$}",
            cell.col, cell.row, cell.slot
        ))
    }

    pub fn parse_id(&self, id: &AreaId) -> Option<GridCell> {
        let mut parts = id.as_str().split('_');
        let mut field = |prefix: char| -> Option<u64> {
            parts.next()?.strip_prefix(prefix)?.parse().ok()
        };
        let cell = GridCell {
            col: field('c')?,
            row: field('r')?,
            slot: field('t')?,
        };
        let in_range = cell.col < self.cols
            && cell.row < self.rows
            && (self.first_slot..self.end_slot).contains(&cell.slot);
        (in_range && self.id(cell) == *id).then_some(cell)
    }

    /// Spatial footprint of a cell, clipped to the bbox.
    pub fn cell_polygon(&self, cell: GridCell) -> Polygon {
        let b = &self.params.bbox;
        let (lon_min, lat_min) = (to_nano(b.lon_min), to_nano(b.lat_min));
        let edge = |origin: i64, index: u64| (origin + index as i64 * self.size_nano) as f64 / NANO;
        let lon0 = edge(lon_min, cell.col);
        let lat0 = edge(lat_min, cell.row);
        Polygon::rectangle(
            Coord::new(lon0, lat0),
            Coord::new(edge(lon_min, cell.col + 1).min(b.lon_max), edge(lat_min, cell.row + 1).min(b.lat_max)),
        )
    }

    /// Temporal extent of a cell, clipped to the time range.
    pub fn cell_interval(&self, cell: GridCell) -> TimeInterval {
        let start = self.params.time_origin + Duration::seconds(cell.slot as i64 * self.slot_secs);
        let end = start + Duration::seconds(self.slot_secs);
        TimeInterval {
            start: start.max(self.params.time_range.start),
            end: end.min(self.params.time_range.end),
        }
    }

    pub fn cells(&self) -> impl Iterator<Item = GridCell> + '_ {
        (self.first_slot..self.end_slot).flat_map(move |slot| {
            (0..self.rows).flat_map(move |row| (0..self.cols).map(move |col| GridCell { col, row, slot }))
        })
    }

    pub(crate) fn description(&self) -> serde_json::Value {
        let p = &self.params;
        serde_json::to_value(GridDescription {
            kind: "grid",
            bbox: [p.bbox.lon_min, p.bbox.lat_min, p.bbox.lon_max, p.bbox.lat_max],
            spatial_size_deg: p.spatial_size_deg,
            temporal_size_s: self.slot_secs,
            time_range: [format_timestamp(p.time_range.start), format_timestamp(p.time_range.end)],
            time_origin: format_timestamp(p.time_origin),
        })
        .expect("grid description serializes")
    }
}
