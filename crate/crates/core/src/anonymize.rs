//! Gaussian spatio-temporal perturbation and repetition-averaged scoring.
//!
//! Every draw comes from a generator keyed by (seed, repetition, trajectory id,
//! record index), so the output does not depend on thread scheduling.

use chrono::Duration;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::areas::AreaSet;
use crate::error::{Error, Result};
use crate::metrics::{score_area_set, MeanScores, ScoreOptions};
use crate::model::{Coord, Dataset, Record};

/// Meters per degree of latitude, also used for longitude at the equator.
pub const METERS_PER_DEGREE: f64 = 111_320.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseConfig {
    pub sigma_space_m: f64,
    #[serde(serialize_with = "ser_seconds")]
    pub sigma_time: Duration,
    pub seed: u64,
    pub repetitions: u32,
}

fn ser_seconds<S: serde::Serializer>(d: &Duration, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(d.num_milliseconds() as f64 / 1000.0)
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            sigma_space_m: 500.0,
            sigma_time: Duration::minutes(10),
            seed: 0,
            repetitions: 3,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_space_m.is_finite() && self.sigma_space_m >= 0.0) {
            return Err(Error::Config(format!("sigma_space must be a finite value >= 0, got {}", self.sigma_space_m)));
        }
        if self.sigma_time < Duration::zero() {
            return Err(Error::Config("sigma_time must be >= 0".into()));
        }
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.sigma_space_m == 0.0 && self.sigma_time.is_zero()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct PerturbReport {
    pub records_perturbed: usize,
    /// Trajectories whose sensitive attribute ends up earlier than the quasi-identifier.
    pub trips_time_inverted: usize,
}

fn record_rng(seed: u64, repetition: u32, traj_id: &str, record: usize) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(b"trajrisk-noise-v1");
    h.update(seed.to_le_bytes());
    h.update(repetition.to_le_bytes());
    h.update((traj_id.len() as u64).to_le_bytes());
    h.update(traj_id.as_bytes());
    h.update((record as u64).to_le_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

/// Standard normal draws for the (north, east, time) axes of one record.
pub fn record_draws(seed: u64, repetition: u32, traj_id: &str, record: usize) -> [f64; 3] {
    let mut rng = record_rng(seed, repetition, traj_id, record);
    [
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
    ]
}

fn perturb_record(r: &Record, z: [f64; 3], cfg: &NoiseConfig) -> Record {
    let mut out = r.clone();
    if cfg.sigma_space_m != 0.0 {
        let dlat = z[0] * cfg.sigma_space_m / METERS_PER_DEGREE;
        let dlon = z[1] * cfg.sigma_space_m / (METERS_PER_DEGREE * r.s.lat.to_radians().cos());
        out.s = Coord::new(r.s.lon + dlon, r.s.lat + dlat);
    }
    if !cfg.sigma_time.is_zero() {
        let sigma_ms = cfg.sigma_time.num_milliseconds() as f64;
        let secs = (z[2] * sigma_ms / 1000.0).round() as i64;
        out.t = r.t + Duration::seconds(secs);
    }
    out
}

/// Adds independent zero-mean Gaussian noise to every record of `d`.
///
/// Spatial noise has standard deviation `sigma_space_m` meters on the north and
/// east axes, converted to degrees at the record's own latitude. Time noise is
/// rounded to whole seconds. Nothing is clamped or re-filtered.
pub fn perturb(d: &Dataset, cfg: &NoiseConfig, repetition: u32) -> (Dataset, PerturbReport) {
    let trajectories: Vec<_> = d
        .trajectories()
        .par_iter()
        .map(|t| {
            let records = t
                .records()
                .iter()
                .enumerate()
                .map(|(i, r)| perturb_record(r, record_draws(cfg.seed, repetition, t.id(), i), cfg))
                .collect();
            t.with_replaced_records(records)
        })
        .collect();
    let report = PerturbReport {
        records_perturbed: if cfg.is_zero() {
            0
        } else {
            trajectories.iter().map(|t| t.records().len()).sum()
        },
        trips_time_inverted: trajectories.iter().filter(|t| t.sa().t < t.qi().t).count(),
    };
    let provenance = format!("{} | perturbed seed={} rep={}", d.provenance, cfg.seed, repetition);
    (Dataset::from_unique(trajectories, provenance), report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AveragedRun {
    pub scores: MeanScores,
    pub perturbations: Vec<PerturbReport>,
}

/// Perturbs `d` once per repetition, scores each copy, and averages the results.
pub fn score_averaged(d: &Dataset, areas: &AreaSet, cfg: &NoiseConfig, opts: ScoreOptions) -> Result<AveragedRun> {
    cfg.validate()?;
    let mut runs = Vec::with_capacity(cfg.repetitions as usize);
    let mut perturbations = Vec::with_capacity(cfg.repetitions as usize);
    for rep in 0..cfg.repetitions {
        let (p, report) = perturb(d, cfg, rep);
        runs.push(score_area_set(&p, areas, opts));
        perturbations.push(report);
    }
    Ok(AveragedRun {
        scores: MeanScores::average(&runs),
        perturbations,
    })
}
