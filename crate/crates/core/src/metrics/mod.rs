//! Matching sets and the privacy metrics derived from them.
//!
//! For an area `A`, the matching set `M_A` holds the trajectories whose
//! quasi-identifier lies in `A`, and the inference set `I_A` holds the distinct
//! areas reached by the sensitive attributes of those trajectories.
//!
//! * k-anonymity `k_A = |M_A|` counts the trajectory itself.
//! * l-diversity `l_A = |I_A|`.
//! * strict k-anonymity counts the *other* trajectories sharing both the
//!   origin and the destination area, so it excludes the trajectory itself.
//! * t-closeness is the total variation distance between the destination
//!   distribution of `M_A` and that of all matched trajectories.
//!
//! Trajectories whose sensitive attribute lands in no area, and (optionally)
//! trajectories that start and end in the same area, count towards `k` but are
//! left out of `I_A` and of the destination distributions.

mod score;
mod staircase;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::Serialize;

use crate::areas::{AreaId, AreaMatch, AreaSet};
use crate::model::Dataset;

pub use self::score::{score_area_set, AreaScores, MeanAreaScores, MeanScores, MeanTrajectoryScores, ScoreOptions, ScoreSet, Staircases, TrajectoryScores};
pub use self::staircase::{staircase, Staircase, StairStep};

/// Where a trajectory's two role points landed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TrajectoryMatch {
    pub origin: AreaMatch,
    pub destination: AreaMatch,
}

impl TrajectoryMatch {
    pub fn is_self_loop(&self) -> bool {
        self.origin.is_some() && self.origin == self.destination
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AreaMatches {
    /// `M_A`: ids of trajectories whose quasi-identifier is in the area.
    pub matched: BTreeSet<String>,
    /// Destination areas of the trajectories in `M_A` that survive exclusions,
    /// with their trajectory counts. The key set is `I_A`.
    pub destinations: BTreeMap<AreaId, usize>,
}

impl AreaMatches {
    pub fn inference_set(&self) -> impl Iterator<Item = &AreaId> {
        self.destinations.keys()
    }

    /// Trajectories that feed the l and t computations.
    pub fn contributing(&self) -> usize {
        self.destinations.values().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchTable {
    areas: BTreeMap<AreaId, AreaMatches>,
    trajectories: BTreeMap<String, TrajectoryMatch>,
    pub unmatched_qi: usize,
    pub unmatched_sa: usize,
    /// Trajectories whose origin and destination fall in the same area.
    pub self_loops: usize,
    pub drop_self_loops: bool,
}

impl MatchTable {
    /// Per-area matches. Listed area sets contribute every area; grids contribute
    /// the cells touched by some origin or destination.
    pub fn areas(&self) -> &BTreeMap<AreaId, AreaMatches> {
        &self.areas
    }

    pub fn trajectories(&self) -> &BTreeMap<String, TrajectoryMatch> {
        &self.trajectories
    }

    pub fn trajectory_count(&self) -> usize {
        self.trajectories.len()
    }

    fn contributes(&self, m: &TrajectoryMatch) -> bool {
        m.origin.is_some() && m.destination.is_some() && !(self.drop_self_loops && m.is_self_loop())
    }

    /// Destination frequencies over every contributing trajectory (the global distribution `P`).
    pub fn global_destinations(&self) -> BTreeMap<&AreaId, usize> {
        let mut p = BTreeMap::new();
        for m in self.areas.values() {
            for (dest, n) in &m.destinations {
                *p.entry(dest).or_insert(0) += n;
            }
        }
        p
    }

    /// Strict k-anonymity per trajectory; `None` when either end is unmatched.
    pub fn strict_k(&self) -> BTreeMap<String, Option<usize>> {
        let mut pairs: HashMap<(&AreaId, &AreaId), usize> = HashMap::new();
        for m in self.trajectories.values() {
            if let (Some(o), Some(d)) = (&m.origin, &m.destination) {
                *pairs.entry((o, d)).or_insert(0) += 1;
            }
        }
        self.trajectories
            .iter()
            .map(|(id, m)| {
                let k = match (&m.origin, &m.destination) {
                    (Some(o), Some(d)) => Some(pairs[&(o, d)] - 1),
                    _ => None,
                };
                (id.clone(), k)
            })
            .collect()
    }
}

/// Locates every trajectory's origin and destination and builds `M_A` / `I_A`.
pub fn build_match_table(d: &Dataset, areas: &AreaSet, drop_self_loops: bool) -> MatchTable {
    let located: Vec<(String, TrajectoryMatch)> = d
        .trajectories()
        .par_iter()
        .map(|t| {
            let (qi, sa) = (t.qi(), t.sa());
            (
                t.id().to_string(),
                TrajectoryMatch {
                    origin: areas.locate(qi.t, qi.s),
                    destination: areas.locate(sa.t, sa.s),
                },
            )
        })
        .collect();

    let mut table = MatchTable {
        areas: areas
            .listed_ids()
            .unwrap_or_default()
            .into_iter()
            .map(|id| (id, AreaMatches::default()))
            .collect(),
        trajectories: BTreeMap::new(),
        unmatched_qi: 0,
        unmatched_sa: 0,
        self_loops: 0,
        drop_self_loops,
    };

    for (id, m) in located {
        if m.origin.is_none() {
            table.unmatched_qi += 1;
        }
        if m.destination.is_none() {
            table.unmatched_sa += 1;
        }
        if m.is_self_loop() {
            table.self_loops += 1;
        }
        if let Some(dest) = &m.destination {
            table.areas.entry(dest.clone()).or_default();
        }
        if let Some(origin) = &m.origin {
            let contributes = table.contributes(&m);
            let entry = table.areas.entry(origin.clone()).or_default();
            entry.matched.insert(id.clone());
            if contributes {
                let dest = m.destination.clone().expect("contributing trajectories have a destination");
                *entry.destinations.entry(dest).or_insert(0) += 1;
            }
        }
        table.trajectories.insert(id, m);
    }
    table
}

/// `k_A = |M_A|` for every area in the table, zeros included.
pub fn k_anonymity(mt: &MatchTable) -> BTreeMap<AreaId, usize> {
    mt.areas.iter().map(|(id, m)| (id.clone(), m.matched.len())).collect()
}

/// `l_A = |I_A|` for every area in the table.
pub fn l_diversity(mt: &MatchTable) -> BTreeMap<AreaId, usize> {
    mt.areas
        .iter()
        .map(|(id, m)| (id.clone(), m.destinations.len()))
        .collect()
}

/// Strict k-anonymity for every trajectory of `d`. Self-loop handling does not
/// affect it.
pub fn strict_k(d: &Dataset, areas: &AreaSet) -> BTreeMap<String, Option<usize>> {
    build_match_table(d, areas, false).strict_k()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TCloseness {
    /// `None` for areas with no contributing trajectory.
    pub per_area: BTreeMap<AreaId, Option<f64>>,
    pub t_max: Option<f64>,
}

/// Total variation distance `½ Σ_z |Q_A(z) − P(z)|` between each area's
/// destination distribution and the global one.
pub fn t_closeness(mt: &MatchTable) -> TCloseness {
    let p = mt.global_destinations();
    let total: u128 = p.values().map(|&n| n as u128).sum();
    let per_area: BTreeMap<AreaId, Option<f64>> = mt
        .areas
        .iter()
        .map(|(id, m)| (id.clone(), total_variation(&m.destinations, &p, total)))
        .collect();
    let t_max = per_area.values().flatten().copied().reduce(f64::max);
    TCloseness { per_area, t_max }
}

/// Computed on integer counts: `Σ_z |q_z·N − p_z·n| / (2·n·N)`, one rounding.
///
/// Destinations outside `q`'s support contribute `p_z·n` each, so the sum is
/// taken over `q` alone and corrected by the total `N·n`.
fn total_variation(q: &BTreeMap<AreaId, usize>, p: &BTreeMap<&AreaId, usize>, total: u128) -> Option<f64> {
    let n: u128 = q.values().map(|&c| c as u128).sum();
    if n == 0 {
        return None;
    }
    let mut numerator = total * n;
    for (z, &qz) in q {
        let qn = qz as u128 * total;
        match p.get(z) {
            Some(&pz) => {
                let pn = pz as u128 * n;
                numerator = numerator - pn + qn.abs_diff(pn);
            }
            None => numerator += qn,
        }
    }
    Some(numerator as f64 / (2 * n * total) as f64)
}
