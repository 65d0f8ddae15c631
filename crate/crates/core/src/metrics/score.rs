use std::collections::BTreeMap;

use serde::Serialize;

use super::{build_match_table, k_anonymity, l_diversity, t_closeness, Staircase};
use crate::areas::{AreaId, AreaSet};
use crate::model::Dataset;
use crate::numfmt::{ser_opt_score, ser_score};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ScoreOptions {
    /// Leave trajectories that start and end in the same area out of l and t.
    pub drop_self_loops: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AreaScores {
    pub area_id: AreaId,
    pub k: usize,
    pub l: usize,
    #[serde(serialize_with = "ser_opt_score")]
    pub t: Option<f64>,
    /// Trajectories behind `l` and `t`: origin matched, destination matched,
    /// and not a dropped self-loop.
    pub matched_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryScores {
    pub traj_id: String,
    pub origin_area: Option<AreaId>,
    pub destination_area: Option<AreaId>,
    /// k of the origin area; `None` when the origin is unmatched.
    pub k: Option<usize>,
    pub strict_k: Option<usize>,
    /// l of the origin area.
    pub l: Option<usize>,
    /// t of the origin area.
    #[serde(serialize_with = "ser_opt_score")]
    pub t: Option<f64>,
}

/// Empirical CDFs of the per-trajectory scores; `None` when no trajectory has the score.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Staircases {
    pub k: Option<Staircase>,
    pub l: Option<Staircase>,
    pub strict_k: Option<Staircase>,
    pub t: Option<Staircase>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreSet {
    pub trajectory_count: usize,
    pub unmatched_qi: usize,
    pub unmatched_sa: usize,
    pub self_loops: usize,
    #[serde(serialize_with = "ser_opt_score")]
    pub t_max: Option<f64>,
    pub areas: BTreeMap<AreaId, AreaScores>,
    pub trajectories: BTreeMap<String, TrajectoryScores>,
    pub staircases: Staircases,
}

/// Scores every area and trajectory of `d` against `areas`.
pub fn score_area_set(d: &Dataset, areas: &AreaSet, opts: ScoreOptions) -> ScoreSet {
    let mt = build_match_table(d, areas, opts.drop_self_loops);
    let k = k_anonymity(&mt);
    let l = l_diversity(&mt);
    let t = t_closeness(&mt);
    let strict = mt.strict_k();

    let area_scores: BTreeMap<AreaId, AreaScores> = mt
        .areas()
        .iter()
        .map(|(id, m)| {
            let s = AreaScores {
                area_id: id.clone(),
                k: k[id],
                l: l[id],
                t: t.per_area[id],
                matched_count: m.contributing(),
            };
            (id.clone(), s)
        })
        .collect();

    let trajectories: BTreeMap<String, TrajectoryScores> = mt
        .trajectories()
        .iter()
        .map(|(id, m)| {
            let origin = m.origin.as_ref().map(|o| &area_scores[o]);
            let s = TrajectoryScores {
                traj_id: id.clone(),
                origin_area: m.origin.clone(),
                destination_area: m.destination.clone(),
                k: origin.map(|a| a.k),
                strict_k: strict[id],
                l: origin.map(|a| a.l),
                t: origin.and_then(|a| a.t),
            };
            (id.clone(), s)
        })
        .collect();

    let stairs = |f: &dyn Fn(&TrajectoryScores) -> Option<f64>| {
        Staircase::from_scores(trajectories.values().filter_map(f)).ok()
    };
    let staircases = Staircases {
        k: stairs(&|s| s.k.map(|v| v as f64)),
        l: stairs(&|s| s.l.map(|v| v as f64)),
        strict_k: stairs(&|s| s.strict_k.map(|v| v as f64)),
        t: stairs(&|s| s.t),
    };

    ScoreSet {
        trajectory_count: d.len(),
        unmatched_qi: mt.unmatched_qi,
        unmatched_sa: mt.unmatched_sa,
        self_loops: mt.self_loops,
        t_max: t.t_max,
        areas: area_scores,
        trajectories,
        staircases,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanAreaScores {
    pub area_id: AreaId,
    #[serde(serialize_with = "ser_score")]
    pub k: f64,
    #[serde(serialize_with = "ser_score")]
    pub l: f64,
    #[serde(serialize_with = "ser_opt_score")]
    pub t: Option<f64>,
    #[serde(serialize_with = "ser_score")]
    pub matched_count: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanTrajectoryScores {
    pub traj_id: String,
    /// Origin area when every run agrees on it.
    pub origin_area: Option<AreaId>,
    /// Destination area when every run agrees on it.
    pub destination_area: Option<AreaId>,
    #[serde(serialize_with = "ser_opt_score")]
    pub k: Option<f64>,
    #[serde(serialize_with = "ser_opt_score")]
    pub strict_k: Option<f64>,
    #[serde(serialize_with = "ser_opt_score")]
    pub l: Option<f64>,
    #[serde(serialize_with = "ser_opt_score")]
    pub t: Option<f64>,
}

/// Scores averaged over one or more runs of the same dataset.
///
/// An area missing from a run (a grid cell nobody visited) counts as k = l = 0
/// for that run; t and per-trajectory values are averaged over the runs where
/// they are defined.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanScores {
    pub runs: usize,
    pub trajectory_count: usize,
    #[serde(serialize_with = "ser_score")]
    pub unmatched_qi: f64,
    #[serde(serialize_with = "ser_score")]
    pub unmatched_sa: f64,
    #[serde(serialize_with = "ser_score")]
    pub self_loops: f64,
    #[serde(serialize_with = "ser_opt_score")]
    pub t_max: Option<f64>,
    pub areas: BTreeMap<AreaId, MeanAreaScores>,
    pub trajectories: BTreeMap<String, MeanTrajectoryScores>,
    pub staircases: Staircases,
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, n) = values.flatten().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

impl MeanScores {
    /// Averages `runs`; panics when `runs` is empty.
    pub fn average(runs: &[ScoreSet]) -> Self {
        assert!(!runs.is_empty(), "averaging needs at least one run");
        let n = runs.len() as f64;
        let mean = |f: &dyn Fn(&ScoreSet) -> f64| runs.iter().map(f).sum::<f64>() / n;

        let area_ids: std::collections::BTreeSet<&AreaId> = runs.iter().flat_map(|r| r.areas.keys()).collect();
        let areas = area_ids
            .into_iter()
            .map(|id| {
                let a = MeanAreaScores {
                    area_id: id.clone(),
                    k: mean(&|r| r.areas.get(id).map_or(0.0, |a| a.k as f64)),
                    l: mean(&|r| r.areas.get(id).map_or(0.0, |a| a.l as f64)),
                    t: mean_defined(runs.iter().map(|r| r.areas.get(id).and_then(|a| a.t))),
                    matched_count: mean(&|r| r.areas.get(id).map_or(0.0, |a| a.matched_count as f64)),
                };
                (id.clone(), a)
            })
            .collect();

        let traj_ids: std::collections::BTreeSet<&String> =
            runs.iter().flat_map(|r| r.trajectories.keys()).collect();
        let trajectories: BTreeMap<String, MeanTrajectoryScores> = traj_ids
            .into_iter()
            .map(|id| {
                let each = |f: &dyn Fn(&TrajectoryScores) -> Option<f64>| {
                    mean_defined(runs.iter().map(|r| r.trajectories.get(id).and_then(f)))
                };
                let agreed = |f: &dyn Fn(&TrajectoryScores) -> Option<AreaId>| {
                    let mut each = runs.iter().map(|r| r.trajectories.get(id).and_then(f));
                    let first = each.next().flatten();
                    each.all(|a| a == first).then_some(first).flatten()
                };
                let s = MeanTrajectoryScores {
                    traj_id: id.clone(),
                    origin_area: agreed(&|s| s.origin_area.clone()),
                    destination_area: agreed(&|s| s.destination_area.clone()),
                    k: each(&|s| s.k.map(|v| v as f64)),
                    strict_k: each(&|s| s.strict_k.map(|v| v as f64)),
                    l: each(&|s| s.l.map(|v| v as f64)),
                    t: each(&|s| s.t),
                };
                (id.clone(), s)
            })
            .collect();

        let stairs = |f: &dyn Fn(&MeanTrajectoryScores) -> Option<f64>| {
            Staircase::from_scores(trajectories.values().filter_map(f)).ok()
        };
        let staircases = Staircases {
            k: stairs(&|s| s.k),
            l: stairs(&|s| s.l),
            strict_k: stairs(&|s| s.strict_k),
            t: stairs(&|s| s.t),
        };

        Self {
            runs: runs.len(),
            trajectory_count: runs[0].trajectory_count,
            unmatched_qi: mean(&|r| r.unmatched_qi as f64),
            unmatched_sa: mean(&|r| r.unmatched_sa as f64),
            self_loops: mean(&|r| r.self_loops as f64),
            t_max: mean_defined(runs.iter().map(|r| r.t_max)),
            areas,
            trajectories,
            staircases,
        }
    }
}

impl From<&ScoreSet> for MeanScores {
    fn from(s: &ScoreSet) -> Self {
        Self::average(std::slice::from_ref(s))
    }
}
