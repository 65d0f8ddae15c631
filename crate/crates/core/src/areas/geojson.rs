//! GeoJSON input and output for polygon area sets.
//!
//! Feature properties: `area_id` (string), `label` (string), and
//! `time_windows`, a list of `[start, end]` ISO-8601 pairs where `null` means
//! unbounded on that side.

use geojson::{feature::Id, FeatureCollection, GeoJson, Value};
use serde_json::{json, Map, Value as Json};

use super::geometry::Polygon;
use super::{AreaId, AreaSet, EquivalenceArea};
use crate::error::{Error, Result};
use crate::model::{format_timestamp, parse_timestamp, Coord, TimeInterval};

/// Builds one area per feature, in feature order (later features win overlaps).
/// Features without `time_windows` inherit `default_time_windows`.
pub fn load_polygon_areas(fc: &FeatureCollection, default_time_windows: &[TimeInterval]) -> Result<AreaSet> {
    let mut areas = Vec::with_capacity(fc.features.len());
    for (i, feature) in fc.features.iter().enumerate() {
        let props = feature.properties.as_ref();
        let prop = |k: &str| props.and_then(|p| p.get(k)).filter(|v| !v.is_null());
        let area_id = match (prop("area_id"), &feature.id) {
            (Some(Json::String(s)), _) => s.clone(),
            (Some(other), _) => other.to_string(),
            (None, Some(Id::String(s))) => s.clone(),
            (None, Some(Id::Number(n))) => n.to_string(),
            (None, None) => format!("f{i}"),
        };
        let name = format!("#{i} ({area_id})");
        let fail = |message: String| Error::Geometry {
            feature: name.clone(),
            message,
        };
        let geometry = feature
            .geometry
            .as_ref()
            .ok_or_else(|| fail("missing geometry".into()))?;
        let spatial = match &geometry.value {
            Value::Polygon(rings) => vec![polygon(rings).map_err(fail)?],
            Value::MultiPolygon(polys) => polys
                .iter()
                .map(|rings| polygon(rings))
                .collect::<std::result::Result<_, _>>()
                .map_err(fail)?,
            other => return Err(fail(format!("unsupported geometry type {}", other.type_name()))),
        };
        let label = match prop("label") {
            Some(Json::String(s)) => Some(s.clone()),
            Some(other) => Some(other.to_string()),
            None => None,
        };
        let temporal = match prop("time_windows") {
            Some(v) => parse_time_windows(v).map_err(fail)?,
            None => default_time_windows.to_vec(),
        };
        areas.push(EquivalenceArea {
            area_id: AreaId::new(area_id),
            spatial,
            temporal,
            label,
        });
    }
    AreaSet::from_areas(areas)
}

impl AreaSet {
    /// Parses GeoJSON text that holds a FeatureCollection of polygon areas.
    pub fn from_geojson_str(text: &str, default_time_windows: &[TimeInterval]) -> Result<Self> {
        let gj: GeoJson = text.parse().map_err(|e: geojson::Error| Error::GeoJson(e.to_string()))?;
        match gj {
            GeoJson::FeatureCollection(fc) => load_polygon_areas(&fc, default_time_windows),
            _ => Err(Error::GeoJson("expected a FeatureCollection".into())),
        }
    }
}

fn polygon(rings: &[Vec<Vec<f64>>]) -> std::result::Result<Polygon, String> {
    let rings = rings
        .iter()
        .map(|ring| {
            ring.iter()
                .map(|pos| match pos.as_slice() {
                    [lon, lat, ..] => Ok(Coord::new(*lon, *lat)),
                    _ => Err("position needs two coordinates".to_string()),
                })
                .collect::<std::result::Result<Vec<_>, _>>()
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Polygon::new(rings)
}

/// Reads a `time_windows` value: a list of `[start, end]` pairs.
pub fn parse_time_windows(v: &Json) -> std::result::Result<Vec<TimeInterval>, String> {
    let list = v.as_array().ok_or("time_windows must be a list")?;
    list.iter()
        .map(|pair| {
            let pair = pair.as_array().filter(|p| p.len() == 2).ok_or("time window must be a [start, end] pair")?;
            let end_of = |j: usize, unbounded| match &pair[j] {
                Json::Null => Ok(unbounded),
                Json::String(s) => parse_timestamp(s).ok_or_else(|| format!("bad timestamp {s:?}")),
                other => Err(format!("bad timestamp {other}")),
            };
            let start = end_of(0, TimeInterval::ALL.start)?;
            let end = end_of(1, TimeInterval::ALL.end)?;
            TimeInterval::new(start, end).map_err(|e| e.to_string())
        })
        .collect()
}

fn ring_json(ring: &[Coord]) -> Json {
    Json::Array(ring.iter().map(|c| json!([c.lon, c.lat])).collect())
}

fn polygon_json(p: &Polygon) -> Json {
    Json::Array(p.rings().iter().map(|r| ring_json(r)).collect())
}

pub(super) fn geometry_json(parts: &[Polygon]) -> Json {
    match parts {
        [single] => json!({ "type": "Polygon", "coordinates": polygon_json(single) }),
        many => json!({
            "type": "MultiPolygon",
            "coordinates": many.iter().map(polygon_json).collect::<Vec<_>>(),
        }),
    }
}

fn windows_json(windows: &[TimeInterval]) -> Json {
    Json::Array(
        windows
            .iter()
            .map(|w| {
                let start = (!w.is_unbounded_start()).then(|| format_timestamp(w.start));
                let end = (!w.is_unbounded_end()).then(|| format_timestamp(w.end));
                json!([start, end])
            })
            .collect(),
    )
}

fn push_num(out: &mut String, x: f64) {
    out.push_str(&serde_json::to_string(&x).unwrap_or_else(|_| "null".into()));
}

fn push_ring(out: &mut String, ring: &[Coord]) {
    out.push('[');
    for (i, c) in ring.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push('[');
        push_num(out, c.lon);
        out.push(',');
        push_num(out, c.lat);
        out.push(']');
    }
    out.push(']');
}

fn push_polygon(out: &mut String, p: &Polygon) {
    out.push('[');
    for (i, r) in p.rings().iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        push_ring(out, r);
    }
    out.push(']');
}

/// Compact feature text up to and including the default properties, left open
/// so callers can append more properties and close it with `}}`.
pub(crate) fn feature_head(area: &EquivalenceArea) -> String {
    let mut out = String::with_capacity(256);
    out.push_str(r#"{"type":"Feature","geometry":"#);
    match &area.spatial[..] {
        [single] => {
            out.push_str(r#"{"type":"Polygon","coordinates":"#);
            push_polygon(&mut out, single);
        }
        many => {
            out.push_str(r#"{"type":"MultiPolygon","coordinates":["#);
            for (i, p) in many.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                push_polygon(&mut out, p);
            }
            out.push(']');
        }
    }
    out.push_str(r#"},"properties":{"area_id":"#);
    out.push_str(&json!(area.area_id).to_string());
    out.push_str(r#","label":"#);
    out.push_str(&json!(area.label).to_string());
    out.push_str(r#","time_windows":"#);
    out.push_str(&windows_json(&area.temporal).to_string());
    out
}

/// Feature for one area, with `extra` properties merged over the defaults.
pub(crate) fn area_feature(area: &EquivalenceArea, extra: Map<String, Json>) -> Json {
    let mut props = Map::new();
    props.insert("area_id".into(), json!(area.area_id));
    props.insert("label".into(), json!(area.label));
    props.insert("time_windows".into(), windows_json(&area.temporal));
    props.extend(extra);
    json!({
        "type": "Feature",
        "geometry": geometry_json(&area.spatial),
        "properties": props,
    })
}

pub(super) fn polygon_collection(areas: &[EquivalenceArea]) -> Json {
    json!({
        "type": "FeatureCollection",
        "features": areas.iter().map(|a| area_feature(a, Map::new())).collect::<Vec<_>>(),
    })
}
