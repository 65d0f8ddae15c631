//! Brute-force reference: every point is tested against every area, every
//! score is recomputed from scratch with plain loops and f64 arithmetic.

use std::collections::{BTreeMap, BTreeSet};

use chrono::Duration;

use trajrisk::areas::AreaSet;
use trajrisk::metrics::{score_area_set, ScoreOptions, ScoreSet};
use trajrisk::model::{Dataset, Timestamp};

pub type Ring = Vec<(f64, f64)>;
pub type Window = (Timestamp, Timestamp);

#[derive(Debug, Clone)]
pub enum AreaSpec {
    Grid {
        lon_min: f64,
        lat_min: f64,
        lon_max: f64,
        lat_max: f64,
        size: f64,
        origin: Timestamp,
        slot_secs: i64,
        range: Window,
    },
    /// (id, parts as lists of rings, time windows), in priority order.
    Polygons(Vec<(String, Vec<Vec<Ring>>, Vec<Window>)>),
}

pub struct Instance {
    pub dataset: Dataset,
    pub areas: AreaSet,
    pub spec: AreaSpec,
    pub drop_self_loops: bool,
}

struct NaiveArea {
    id: String,
    /// Spatial parts, each a list of rings.
    parts: Vec<Vec<Ring>>,
    windows: Vec<Window>,
    /// Half-open box used for grid cells instead of polygon containment.
    cell: Option<(f64, f64, f64, f64)>,
}

impl NaiveArea {
    fn contains(&self, t: Timestamp, x: f64, y: f64) -> bool {
        if !self.windows.iter().any(|&(a, b)| a <= t && t < b) {
            return false;
        }
        match self.cell {
            Some((x0, y0, x1, y1)) => x0 <= x && x < x1 && y0 <= y && y < y1,
            None => self.parts.iter().any(|rings| inside(rings, x, y)),
        }
    }
}

fn orient(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> f64 {
    (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0)
}

/// Even-odd rule with a rightward ray; any point on an edge is inside.
pub fn inside(rings: &[Ring], x: f64, y: f64) -> bool {
    let p = (x, y);
    let mut crossings = 0;
    for ring in rings {
        for i in 0..ring.len() - 1 {
            let (a, b) = (ring[i], ring[i + 1]);
            let in_box = a.0.min(b.0) <= x && x <= a.0.max(b.0) && a.1.min(b.1) <= y && y <= a.1.max(b.1);
            if in_box && orient(a, b, p) == 0.0 {
                return true;
            }
            let (lo, hi) = if a.1 <= b.1 { (a, b) } else { (b, a) };
            if lo.1 <= y && y < hi.1 && orient(lo, hi, p) > 0.0 {
                crossings += 1;
            }
        }
    }
    crossings % 2 == 1
}

fn width(n: u64) -> usize {
    n.saturating_sub(1).to_string().len()
}

fn naive_areas(spec: &AreaSpec) -> Vec<NaiveArea> {
    match spec {
        AreaSpec::Polygons(list) => list
            .iter()
            .map(|(id, parts, windows)| NaiveArea {
                id: id.clone(),
                parts: parts.clone(),
                windows: windows.clone(),
                cell: None,
            })
            .collect(),
        AreaSpec::Grid {
            lon_min,
            lat_min,
            lon_max,
            lat_max,
            size,
            origin,
            slot_secs,
            range,
        } => {
            let mut cols = 0u64;
            while lon_min + cols as f64 * size < *lon_max {
                cols += 1;
            }
            let mut rows = 0u64;
            while lat_min + rows as f64 * size < *lat_max {
                rows += 1;
            }
            let slot = |s: u64| *origin + Duration::seconds(s as i64 * slot_secs);
            let slots: Vec<u64> = (0..)
                .take_while(|&s| slot(s) < range.1)
                .filter(|&s| slot(s + 1) > range.0)
                .collect();
            let end_slot = slots.last().map_or(0, |s| s + 1);
            let (wc, wr, ws) = (width(cols), width(rows), width(end_slot));
            let mut out = Vec::new();
            for &s in &slots {
                for r in 0..rows {
                    for c in 0..cols {
                        let x0 = lon_min + c as f64 * size;
                        let y0 = lat_min + r as f64 * size;
                        out.push(NaiveArea {
                            id: format!("c{c:0wc$}_r{r:0wr$}_t{s:0ws$}"),
                            parts: Vec::new(),
                            windows: vec![(slot(s).max(range.0), slot(s + 1).min(range.1))],
                            cell: Some((x0, y0, (x0 + size).min(*lon_max), (y0 + size).min(*lat_max))),
                        });
                    }
                }
            }
            out
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefArea {
    pub k: usize,
    pub l: usize,
    pub t: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NaiveTrajectory {
    pub origin: Option<String>,
    pub destination: Option<String>,
    pub strict_k: Option<usize>,
}

pub struct NaiveScores {
    pub is_grid: bool,
    pub areas: BTreeMap<String, RefArea>,
    pub trajectories: BTreeMap<String, NaiveTrajectory>,
}

pub fn naive_scores(inst: &Instance) -> NaiveScores {
    let areas = naive_areas(&inst.spec);
    let locate = |t: Timestamp, x: f64, y: f64| -> Option<String> {
        let mut hit = None;
        for a in &areas {
            if a.contains(t, x, y) {
                hit = Some(a.id.clone());
            }
        }
        hit
    };
    let mut ends = Vec::new();
    for tr in inst.dataset.trajectories() {
        let (q, s) = (tr.qi(), tr.sa());
        ends.push((tr.id().to_string(), locate(q.t, q.s.lon, q.s.lat), locate(s.t, s.s.lon, s.s.lat)));
    }
    let contributes = |o: &Option<String>, d: &Option<String>| match (o, d) {
        (Some(o), Some(d)) => !(inst.drop_self_loops && o == d),
        _ => false,
    };

    let mut global: BTreeMap<String, f64> = BTreeMap::new();
    let mut total = 0.0;
    for (_, o, d) in &ends {
        if contributes(o, d) {
            *global.entry(d.clone().unwrap()).or_insert(0.0) += 1.0;
            total += 1.0;
        }
    }

    let mut out = BTreeMap::new();
    for a in &areas {
        let members: Vec<_> = ends.iter().filter(|(_, o, _)| o.as_deref() == Some(a.id.as_str())).collect();
        let mut q: BTreeMap<String, f64> = BTreeMap::new();
        let mut n = 0.0;
        for (_, o, d) in &members {
            if contributes(o, d) {
                *q.entry(d.clone().unwrap()).or_insert(0.0) += 1.0;
                n += 1.0;
            }
        }
        let t = (n > 0.0).then(|| {
            let keys: BTreeSet<&String> = q.keys().chain(global.keys()).collect();
            keys.into_iter()
                .map(|z| (q.get(z).unwrap_or(&0.0) / n - global.get(z).unwrap_or(&0.0) / total).abs())
                .sum::<f64>()
                / 2.0
        });
        out.insert(a.id.clone(), RefArea { k: members.len(), l: q.len(), t });
    }

    let mut trajectories = BTreeMap::new();
    for (id, o, d) in &ends {
        let strict_k = match (o, d) {
            (Some(_), Some(_)) => Some(ends.iter().filter(|(j, o2, d2)| j != id && o2 == o && d2 == d).count()),
            _ => None,
        };
        trajectories.insert(
            id.clone(),
            NaiveTrajectory { origin: o.clone(), destination: d.clone(), strict_k },
        );
    }
    NaiveScores {
        is_grid: matches!(inst.spec, AreaSpec::Grid { .. }),
        areas: out,
        trajectories,
    }
}

pub fn engine_scores(inst: &Instance) -> ScoreSet {
    score_area_set(&inst.dataset, &inst.areas, ScoreOptions { drop_self_loops: inst.drop_self_loops })
}

fn same_t(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(a), Some(b)) => (a - b).abs() <= 1e-12,
        _ => false,
    }
}

/// Compares engine and reference; returns the first disagreement.
pub fn compare(inst: &Instance) -> Result<(), String> {
    let naive = naive_scores(inst);
    let got = engine_scores(inst);

    for (id, a) in &got.areas {
        let want = naive.areas.get(id.as_str()).ok_or_else(|| format!("engine area {id} unknown to reference"))?;
        if (a.k, a.l) != (want.k, want.l) || !same_t(a.t, want.t) {
            return Err(format!("area {id}: engine k={} l={} t={:?}, reference {want:?}", a.k, a.l, a.t));
        }
    }
    let touched: BTreeSet<&String> = naive
        .trajectories
        .values()
        .flat_map(|t| t.origin.iter().chain(t.destination.iter()))
        .collect();
    for id in naive.areas.keys() {
        let required = !naive.is_grid || touched.contains(id);
        if required && !got.areas.keys().any(|k| k.as_str() == id) {
            return Err(format!("area {id} missing from engine output"));
        }
    }
    if got.trajectories.len() != naive.trajectories.len() {
        return Err("trajectory count differs".into());
    }
    for (id, want) in &naive.trajectories {
        let t = &got.trajectories[id];
        let area = |a: &Option<trajrisk::areas::AreaId>| a.as_ref().map(|a| a.as_str().to_string());
        if area(&t.origin_area) != want.origin || area(&t.destination_area) != want.destination {
            return Err(format!("trajectory {id}: engine {:?}->{:?}, reference {:?}->{:?}", t.origin_area, t.destination_area, want.origin, want.destination));
        }
        if t.strict_k != want.strict_k {
            return Err(format!("trajectory {id}: strict_k {:?} vs {:?}", t.strict_k, want.strict_k));
        }
        let origin = want.origin.as_ref().map(|o| &naive.areas[o]);
        if t.k != origin.map(|a| a.k) || t.l != origin.map(|a| a.l) || !same_t(t.t, origin.and_then(|a| a.t)) {
            return Err(format!("trajectory {id}: per-trajectory scores differ"));
        }
    }
    Ok(())
}
