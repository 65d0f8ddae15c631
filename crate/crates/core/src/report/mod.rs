//! Score reports and their renderings: JSON, per-area GeoJSON, diff GeoJSON,
//! and staircase CSV/SVG.
//!
//! Every renderer is deterministic. Scores print with six decimals and
//! trailing zeros trimmed; undefined values are `null` in JSON and an empty
//! cell in CSV.

mod svg;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use crate::anonymize::{NoiseConfig, PerturbReport};
use crate::areas::{AreaId, AreaSet};
use crate::error::{Error, Result};
use crate::filter::FilterReport;
use crate::ingest::ParseStats;
use crate::metrics::{MeanScores, Staircase};
use crate::numfmt::{fmt_score, round_score, ser_opt_score};

pub use self::svg::{render_staircase_panel_svg, render_staircase_svg, PanelCell};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    K,
    L,
    StrictK,
    T,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::K, Metric::L, Metric::StrictK, Metric::T];
    /// Metrics defined per area.
    pub const AREA: [Metric; 3] = [Metric::K, Metric::L, Metric::T];

    pub fn name(self) -> &'static str {
        match self {
            Metric::K => "k",
            Metric::L => "l",
            Metric::StrictK => "strict_k",
            Metric::T => "t",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "k" => Ok(Metric::K),
            "l" => Ok(Metric::L),
            "strict_k" => Ok(Metric::StrictK),
            "t" => Ok(Metric::T),
            _ => Err(Error::Config(format!("unknown metric {s:?} (expected k, l, strict_k or t)"))),
        }
    }

    fn title(self) -> &'static str {
        match self {
            Metric::K => "k-anonymity",
            Metric::L => "l-diversity",
            Metric::StrictK => "strict k-anonymity",
            Metric::T => "t-closeness",
        }
    }
}

/// Everything a scoring run produced, plus the settings that produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreReport {
    pub tool: String,
    pub config: Value,
    pub area_source: Value,
    pub area_fingerprint: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parse: Option<ParseStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub filter: Option<FilterReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseConfig>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub perturbations: Vec<PerturbReport>,
    #[serde(flatten)]
    pub scores: MeanScores,
}

impl ScoreReport {
    pub fn new(scores: MeanScores, areas: &AreaSet, config: Value) -> Self {
        Self {
            tool: format!("trajrisk {}", env!("CARGO_PKG_VERSION")),
            config,
            area_source: areas.description(),
            area_fingerprint: areas.fingerprint().to_string(),
            parse: None,
            filter: None,
            noise: None,
            perturbations: Vec::new(),
            scores,
        }
    }

    pub fn staircase(&self, metric: Metric) -> Option<&Staircase> {
        let s = &self.scores.staircases;
        match metric {
            Metric::K => s.k.as_ref(),
            Metric::L => s.l.as_ref(),
            Metric::StrictK => s.strict_k.as_ref(),
            Metric::T => s.t.as_ref(),
        }
    }

    fn area_value(&self, id: &AreaId, metric: Metric) -> Option<f64> {
        let a = self.scores.areas.get(id);
        match metric {
            Metric::K => Some(a.map_or(0.0, |a| a.k)),
            Metric::L => Some(a.map_or(0.0, |a| a.l)),
            Metric::T => a.and_then(|a| a.t),
            Metric::StrictK => None,
        }
    }
}

fn to_json_string<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

/// FeatureCollection with one compact feature per line.
fn feature_collection(features: &[String]) -> String {
    let mut out = String::with_capacity(features.iter().map(|f| f.len() + 2).sum::<usize>() + 64);
    out.push_str("{\"type\":\"FeatureCollection\",\"features\":[");
    for (i, f) in features.iter().enumerate() {
        out.push_str(if i == 0 { "\n" } else { ",\n" });
        out.push_str(f);
    }
    out.push_str("\n]}\n");
    out
}

pub fn render_report_json(report: &ScoreReport) -> Result<String> {
    to_json_string(report)
}

fn num(x: Option<f64>) -> Value {
    x.map_or(Value::Null, |v| json!(round_score(v)))
}

fn require_area_metric(metric: Metric) -> Result<()> {
    if metric == Metric::StrictK {
        return Err(Error::Config("strict_k is a per-trajectory score and has no area map".into()));
    }
    Ok(())
}

/// FeatureCollection of every scored area with properties
/// `area_id, label, k, l, t, metric, value`, sorted by area id.
pub fn render_area_geojson(report: &ScoreReport, areas: &AreaSet, metric: Metric) -> Result<String> {
    require_area_metric(metric)?;
    check_fingerprint(&report.area_fingerprint, areas.fingerprint())?;
    let mut features = Vec::with_capacity(report.scores.areas.len());
    for (id, a) in &report.scores.areas {
        let props = [
            ("k", num(Some(a.k))),
            ("l", num(Some(a.l))),
            ("t", num(a.t)),
            ("matched_count", num(Some(a.matched_count))),
            ("metric", json!(metric.name())),
            ("value", num(report.area_value(id, metric))),
        ];
        features.push(feature(areas, id, &props)?);
    }
    Ok(feature_collection(&features))
}

fn feature(areas: &AreaSet, id: &AreaId, props: &[(&str, Value)]) -> Result<String> {
    areas
        .feature_line(id, props)
        .ok_or_else(|| Error::MismatchedAreaSets(format!("area {id} is not in the area set"), areas.fingerprint().into()))
}

fn check_fingerprint(a: &str, b: &str) -> Result<()> {
    if a != b {
        return Err(Error::MismatchedAreaSets(a.into(), b.into()));
    }
    Ok(())
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn emit_area_geojson(report: &ScoreReport, areas: &AreaSet, metric: Metric, path: &Path) -> Result<()> {
    write_file(path, &render_area_geojson(report, areas, metric)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AreaDelta {
    #[serde(serialize_with = "ser_opt_score")]
    pub k: Option<f64>,
    #[serde(serialize_with = "ser_opt_score")]
    pub l: Option<f64>,
    #[serde(serialize_with = "ser_opt_score")]
    pub t: Option<f64>,
}

/// Per-area change from a raw report to an anonymized one (anonymized minus raw).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiffReport {
    pub area_fingerprint: String,
    pub areas: BTreeMap<AreaId, AreaDelta>,
}

fn sub(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    Some(a? - b?)
}

/// Compares two reports over the union of their areas. An area absent from one
/// side had no trajectories there: k and l are 0 and t is undefined.
pub fn diff_reports(raw: &ScoreReport, anon: &ScoreReport) -> Result<DiffReport> {
    check_fingerprint(&raw.area_fingerprint, &anon.area_fingerprint)?;
    let ids: BTreeSet<&AreaId> = raw.scores.areas.keys().chain(anon.scores.areas.keys()).collect();
    let areas = ids
        .into_iter()
        .map(|id| {
            let d = |m| sub(anon.area_value(id, m), raw.area_value(id, m));
            (id.clone(), AreaDelta { k: d(Metric::K), l: d(Metric::L), t: d(Metric::T) })
        })
        .collect();
    Ok(DiffReport {
        area_fingerprint: raw.area_fingerprint.clone(),
        areas,
    })
}

pub fn render_diff_geojson(raw: &ScoreReport, anon: &ScoreReport, areas: &AreaSet, metric: Metric) -> Result<String> {
    require_area_metric(metric)?;
    check_fingerprint(&raw.area_fingerprint, areas.fingerprint())?;
    let diff = diff_reports(raw, anon)?;
    let mut features = Vec::with_capacity(diff.areas.len());
    for (id, d) in &diff.areas {
        let delta = match metric {
            Metric::K => d.k,
            Metric::L => d.l,
            _ => d.t,
        };
        let props = [
            ("metric", json!(metric.name())),
            ("raw", num(raw.area_value(id, metric))),
            ("anonymized", num(anon.area_value(id, metric))),
            ("delta", num(delta)),
            ("delta_k", num(d.k)),
            ("delta_l", num(d.l)),
            ("delta_t", num(d.t)),
        ];
        features.push(feature(areas, id, &props)?);
    }
    Ok(feature_collection(&features))
}

pub fn emit_diff_geojson(raw: &ScoreReport, anon: &ScoreReport, areas: &AreaSet, metric: Metric, path: &Path) -> Result<()> {
    write_file(path, &render_diff_geojson(raw, anon, areas, metric)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StaircaseFormat {
    Csv,
    Svg,
}

impl StaircaseFormat {
    pub fn extension(self) -> &'static str {
        match self {
            StaircaseFormat::Csv => "csv",
            StaircaseFormat::Svg => "svg",
        }
    }
}

pub fn render_staircase_csv(s: &Staircase) -> String {
    let mut out = String::from("fraction,threshold\n");
    for step in &s.steps {
        let _ = writeln!(out, "{},{}", fmt_score(step.fraction), fmt_score(step.threshold));
    }
    out
}

pub fn render_staircase(report: &ScoreReport, metric: Metric, format: StaircaseFormat) -> Result<String> {
    let s = report.staircase(metric).ok_or(Error::EmptyStaircase)?;
    Ok(match format {
        StaircaseFormat::Csv => render_staircase_csv(s),
        StaircaseFormat::Svg => render_staircase_svg(s, metric.title(), metric == Metric::T),
    })
}

pub fn emit_staircase(report: &ScoreReport, metric: Metric, path: &Path, format: StaircaseFormat) -> Result<()> {
    write_file(path, &render_staircase(report, metric, format)?)
}

/// Long-format CSV of several labelled staircases: `config,fraction,threshold`.
pub fn render_staircase_table(series: &[(String, Option<&Staircase>)]) -> String {
    let mut out = String::from("config,fraction,threshold\n");
    for (name, s) in series {
        for step in s.iter().flat_map(|s| &s.steps) {
            let _ = writeln!(out, "{},{},{}", name, fmt_score(step.fraction), fmt_score(step.threshold));
        }
    }
    out
}

pub fn metric_title(metric: Metric) -> &'static str {
    metric.title()
}
