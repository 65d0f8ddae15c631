//! Equivalence areas: spatio-temporal regions within which an adversary cannot
//! tell trajectories apart.
//!
//! An [`AreaSet`] is either a uniform grid (cells are computed, never stored)
//! or an ordered list of polygon areas behind a packed R-tree. When polygon
//! areas overlap, the area listed last wins.

mod geojson;
pub mod geometry;
pub mod grid;

use std::collections::HashMap;
use std::fmt;

use rstar::primitives::{GeomWithData, Rectangle};
use rstar::{RTree, AABB};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{Coord, TimeInterval, Timestamp};

pub use self::geojson::{load_polygon_areas, parse_time_windows};
pub use self::geometry::Polygon;
pub use self::grid::{Grid, GridCell, GridParams};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AreaId(String);

impl AreaId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AreaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Result of locating a point: the winning area, or `None` when no area contains it.
pub type AreaMatch = Option<AreaId>;

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceArea {
    pub area_id: AreaId,
    /// Disjoint parts; a point in any part is in the area.
    pub spatial: Vec<Polygon>,
    /// Pairwise disjoint half-open intervals.
    pub temporal: Vec<TimeInterval>,
    pub label: Option<String>,
}

impl EquivalenceArea {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.area_id.as_str().is_empty() {
            return Err("empty area id".into());
        }
        if self.spatial.is_empty() {
            return Err("area has no polygons".into());
        }
        if !geometry::parts_are_disjoint(&self.spatial) {
            return Err("polygon parts overlap".into());
        }
        if self.temporal.is_empty() {
            return Err("area has no time windows".into());
        }
        for (i, a) in self.temporal.iter().enumerate() {
            if a.start >= a.end {
                return Err(format!("time window {i} is empty"));
            }
            if self.temporal[..i].iter().any(|b| a.overlaps(b)) {
                return Err(format!("time window {i} overlaps an earlier window"));
            }
        }
        Ok(())
    }

    pub fn active_at(&self, t: Timestamp) -> bool {
        self.temporal.iter().any(|iv| iv.contains(t))
    }

    pub fn contains(&self, t: Timestamp, s: Coord) -> bool {
        self.active_at(t) && self.spatial.iter().any(|p| p.contains(s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AreaSetKind {
    Grid,
    Polygon,
}

type PartEntry = GeomWithData<Rectangle<[f64; 2]>, (u32, u32)>;

struct PolygonAreas {
    areas: Vec<EquivalenceArea>,
    by_id: HashMap<AreaId, usize>,
    index: RTree<PartEntry>,
}

impl PolygonAreas {
    fn get(&self, id: &AreaId) -> Option<&EquivalenceArea> {
        self.by_id.get(id).map(|&i| &self.areas[i])
    }
}

enum Inner {
    Grid(Grid),
    Polygons(PolygonAreas),
}

pub struct AreaSet {
    inner: Inner,
    fingerprint: String,
}

impl fmt::Debug for AreaSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AreaSet")
            .field("kind", &self.kind())
            .field("areas", &self.len())
            .field("fingerprint", &self.fingerprint)
            .finish()
    }
}

fn digest(value: &serde_json::Value) -> String {
    let bytes = serde_json::to_vec(value).expect("JSON value serializes");
    hex::encode(&Sha256::digest(bytes)[..8])
}

impl AreaSet {
    /// Uniform grid with half-open cells aligned to the bbox minimum corner and the time origin.
    pub fn build_grid(params: GridParams) -> Result<Self> {
        let grid = Grid::new(params)?;
        let fingerprint = digest(&grid.description());
        Ok(Self {
            inner: Inner::Grid(grid),
            fingerprint,
        })
    }

    /// Polygon areas in priority order: later areas win overlaps.
    pub fn from_areas(areas: Vec<EquivalenceArea>) -> Result<Self> {
        let mut by_id = HashMap::with_capacity(areas.len());
        for (i, a) in areas.iter().enumerate() {
            a.validate().map_err(|message| Error::Geometry {
                feature: a.area_id.to_string(),
                message,
            })?;
            if by_id.insert(a.area_id.clone(), i).is_some() {
                return Err(Error::DuplicateArea(a.area_id.to_string()));
            }
        }
        let entries: Vec<PartEntry> = areas
            .iter()
            .enumerate()
            .flat_map(|(ai, a)| {
                a.spatial.iter().enumerate().map(move |(pi, p)| {
                    let e = p.envelope();
                    GeomWithData::new(
                        Rectangle::from_corners([e.min.lon, e.min.lat], [e.max.lon, e.max.lat]),
                        (ai as u32, pi as u32),
                    )
                })
            })
            .collect();
        let index = RTree::bulk_load(entries);
        let inner = PolygonAreas { areas, by_id, index };
        let fingerprint = digest(&geojson::polygon_collection(&inner.areas));
        Ok(Self {
            inner: Inner::Polygons(inner),
            fingerprint,
        })
    }

    pub fn kind(&self) -> AreaSetKind {
        match self.inner {
            Inner::Grid(_) => AreaSetKind::Grid,
            Inner::Polygons(_) => AreaSetKind::Polygon,
        }
    }

    /// Total number of areas, materialized or not.
    pub fn len(&self) -> u64 {
        match &self.inner {
            Inner::Grid(g) => g.cell_count(),
            Inner::Polygons(p) => p.areas.len() as u64,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn grid(&self) -> Option<&Grid> {
        match &self.inner {
            Inner::Grid(g) => Some(g),
            Inner::Polygons(_) => None,
        }
    }

    /// Polygon areas in priority order; empty for grids.
    pub fn polygon_areas(&self) -> &[EquivalenceArea] {
        match &self.inner {
            Inner::Grid(_) => &[],
            Inner::Polygons(p) => &p.areas,
        }
    }

    /// Stable digest of the area definitions; equal sets have equal fingerprints.
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    /// Every area id, for sets small enough to list. Grids are not listed:
    /// their cells are materialized only when a point lands in them.
    pub fn listed_ids(&self) -> Option<Vec<AreaId>> {
        match &self.inner {
            Inner::Grid(_) => None,
            Inner::Polygons(p) => Some(p.areas.iter().map(|a| a.area_id.clone()).collect()),
        }
    }

    pub fn locate(&self, t: Timestamp, s: Coord) -> AreaMatch {
        match &self.inner {
            Inner::Grid(g) => g.cell_at(t, s).map(|c| g.id(c)),
            Inner::Polygons(p) => {
                let probe = AABB::from_point([s.lon, s.lat]);
                p.index
                    .locate_in_envelope_intersecting(&probe)
                    .filter(|e| {
                        let (ai, pi) = e.data;
                        let area = &p.areas[ai as usize];
                        area.active_at(t) && area.spatial[pi as usize].contains(s)
                    })
                    .map(|e| e.data.0)
                    .max()
                    .map(|ai| p.areas[ai as usize].area_id.clone())
            }
        }
    }

    /// Full definition of one area. Grid cells are built on demand.
    pub fn area(&self, id: &AreaId) -> Option<EquivalenceArea> {
        match &self.inner {
            Inner::Grid(g) => g.parse_id(id).map(|cell| EquivalenceArea {
                area_id: id.clone(),
                spatial: vec![g.cell_polygon(cell)],
                temporal: vec![g.cell_interval(cell)],
                label: None,
            }),
            Inner::Polygons(p) => p.get(id).cloned(),
        }
    }

    pub fn label(&self, id: &AreaId) -> Option<String> {
        match &self.inner {
            Inner::Grid(_) => None,
            Inner::Polygons(p) => p.get(id).and_then(|a| a.label.clone()),
        }
    }

    /// Compact, serializable description used in run manifests and reports.
    pub fn description(&self) -> serde_json::Value {
        match &self.inner {
            Inner::Grid(g) => g.description(),
            Inner::Polygons(p) => serde_json::json!({
                "kind": "polygon",
                "areas": p.areas.len(),
                "fingerprint": self.fingerprint,
            }),
        }
    }

    /// GeoJSON FeatureCollection of every area; grid cells become rectangles.
    /// Grids over large extents produce very large collections.
    pub fn to_geojson(&self) -> serde_json::Value {
        match &self.inner {
            Inner::Grid(g) => {
                let features: Vec<_> = g
                    .cells()
                    .filter_map(|c| self.area(&g.id(c)))
                    .map(|a| geojson::area_feature(&a, serde_json::Map::new()))
                    .collect();
                serde_json::json!({ "type": "FeatureCollection", "features": features })
            }
            Inner::Polygons(p) => geojson::polygon_collection(&p.areas),
        }
    }

    /// GeoJSON geometry object for one area.
    pub fn geometry_json(&self, id: &AreaId) -> Option<serde_json::Value> {
        self.area(id).map(|a| geojson::geometry_json(&a.spatial))
    }

    /// Compact one-line GeoJSON Feature for one area; `extra` properties follow
    /// `area_id`, `label` and `time_windows`.
    pub fn feature_line(&self, id: &AreaId, extra: &[(&str, serde_json::Value)]) -> Option<String> {
        let area = self.area(id)?;
        let mut out = geojson::feature_head(&area);
        for (k, v) in extra {
            out.push(',');
            out.push_str(&serde_json::Value::from(*k).to_string());
            out.push(':');
            out.push_str(&v.to_string());
        }
        out.push_str("}}");
        Some(out)
    }

    /// GeoJSON Feature for one area with `extra` merged into its properties.
    pub fn feature_json(&self, id: &AreaId, extra: serde_json::Map<String, serde_json::Value>) -> Option<serde_json::Value> {
        self.area(id).map(|a| geojson::area_feature(&a, extra))
    }
}
