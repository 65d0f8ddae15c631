//! The steps behind each subcommand: load, build areas, score, write outputs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::settings::{default_time_range, AreaSource, RunConfig};
use crate::anonymize::{perturb, NoiseConfig, PerturbReport};
use crate::areas::{AreaSet, GridParams};
use crate::error::{Error, Result};
use crate::filter::{filter_dataset, FilterReport};
use crate::ingest::{parse_dataset, write_canonical, ParseStats};
use crate::metrics::{score_area_set, MeanScores, ScoreOptions, ScoreSet};
use crate::model::{format_timestamp, Dataset, TimeInterval};
use crate::numfmt::fmt_opt;
use crate::report::{
    diff_reports, render_area_geojson, render_diff_geojson, render_report_json, render_staircase, Metric,
    ScoreReport, StaircaseFormat,
};

/// Why a run stopped, with the process exit code that goes with it.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_EMPTY: i32 = 3;

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::MismatchedAreaSets(..) => EXIT_CONFIG,
            _ => EXIT_INPUT,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

pub type Outcome<T> = std::result::Result<T, Failure>;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct HashingReader<R> {
    inner: R,
    hasher: Sha256,
}

impl<R: Read> Read for HashingReader<R> {
    fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.hasher.update(&buf[..n]);
        Ok(n)
    }
}

pub struct Loaded {
    pub dataset: Dataset,
    pub parse: ParseStats,
    pub filter: FilterReport,
    pub input_sha256: String,
}

/// Parses and filters the input. An empty result is exit code 3.
pub fn load(rc: &RunConfig) -> Outcome<Loaded> {
    let path = &rc.input;
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = HashingReader {
        inner: BufReader::new(file),
        hasher: Sha256::new(),
    };
    let parsed = parse_dataset(&mut reader, &rc.schema, rc.parse_mode)?;
    std::io::copy(&mut reader, &mut std::io::sink()).map_err(|e| Error::io(path, e))?;
    let input_sha256 = hex::encode(reader.hasher.finalize());
    let (dataset, filter) = filter_dataset(&parsed.dataset, &rc.filter);
    eprintln!(
        "trajrisk: {} rows read, {} malformed, {} trajectories kept after filtering",
        parsed.stats.rows, parsed.stats.errors, filter.kept_count
    );
    if dataset.is_empty() {
        return Err(Failure {
            code: EXIT_EMPTY,
            message: format!(
                "no trajectories left after filtering ({} too short, {} outside the bbox, {} outside the time window)",
                filter.dropped_duration, filter.dropped_bbox, filter.dropped_window
            ),
        });
    }
    Ok(Loaded {
        dataset,
        parse: parsed.stats,
        filter,
        input_sha256,
    })
}

pub struct BuiltAreas {
    pub set: AreaSet,
    /// Resolved description for config echoes.
    pub echo: Value,
    pub file_sha256: Option<String>,
}

/// Builds the area set. Grid time ranges default to whole days around `d`.
pub fn build_areas(src: &AreaSource, rc: &RunConfig, d: &Dataset) -> Result<BuiltAreas> {
    match src {
        AreaSource::Grid {
            spatial_size_deg,
            temporal_size,
            time_origin,
            time_range,
        } => {
            let span = d.time_span().ok_or_else(|| Error::Config("cannot size a grid for an empty dataset".into()))?;
            let range = time_range.unwrap_or_else(|| default_time_range(span));
            let origin = time_origin.unwrap_or(range.start);
            let params = GridParams {
                bbox: rc.filter.bbox,
                spatial_size_deg: *spatial_size_deg,
                temporal_size: *temporal_size,
                time_range: range,
                time_origin: origin,
            };
            let set = AreaSet::build_grid(params)?;
            Ok(BuiltAreas {
                echo: set.description(),
                set,
                file_sha256: None,
            })
        }
        AreaSource::GeoJson { path } => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let set = AreaSet::from_geojson_str(&text, &[TimeInterval::ALL])?;
            let sha = sha256_hex(text.as_bytes());
            Ok(BuiltAreas {
                echo: json!({
                    "kind": "polygon",
                    "path": path.to_string_lossy(),
                    "sha256": sha,
                    "areas": set.len(),
                    "fingerprint": set.fingerprint(),
                }),
                set,
                file_sha256: Some(sha),
            })
        }
    }
}

fn noise_json(n: &NoiseConfig) -> Value {
    serde_json::to_value(n).unwrap_or(Value::Null)
}

/// Fully resolved settings, defaults included.
pub fn effective_config(rc: &RunConfig, areas: Option<&Value>, noise: Option<&NoiseConfig>) -> Value {
    let schema = &rc.schema;
    json!({
        "input": rc.input.to_string_lossy(),
        "schema": {
            "id": schema.id,
            "pickup_time": schema.pickup_time,
            "pickup_lon": schema.pickup_lon,
            "pickup_lat": schema.pickup_lat,
            "dropoff_time": schema.dropoff_time,
            "dropoff_lon": schema.dropoff_lon,
            "dropoff_lat": schema.dropoff_lat,
        },
        "strict": rc.parse_mode == crate::ingest::ParseMode::Strict,
        "filter": {
            "min_duration_s": rc.filter.min_duration.num_milliseconds() as f64 / 1000.0,
            "bbox": [rc.filter.bbox.lon_min, rc.filter.bbox.lat_min, rc.filter.bbox.lon_max, rc.filter.bbox.lat_max],
            "qi_window": rc.settings.get("qi-window"),
        },
        "drop_self_loops": rc.drop_self_loops,
        "areas": areas,
        "noise": noise.map(noise_json),
        "settings": rc
            .settings
            .as_map()
            .iter()
            .filter(|(k, _)| !matches!(k.as_str(), "out" | "jobs"))
            .collect::<BTreeMap<_, _>>(),
    })
}

/// Files written by a run, keyed by path relative to the output root.
pub struct OutDir {
    root: PathBuf,
    prefix: String,
    pub files: BTreeMap<String, String>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            prefix: String::new(),
            files: BTreeMap::new(),
        })
    }

    pub fn sub(&self, name: &str) -> Result<Self> {
        let prefix = format!("{}{}/", self.prefix, name);
        let dir = self.root.join(&prefix);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Self {
            root: self.root.clone(),
            prefix,
            files: BTreeMap::new(),
        })
    }

    pub fn absorb(&mut self, other: OutDir) {
        self.files.extend(other.files);
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let rel = format!("{}{}", self.prefix, name);
        let path = self.root.join(&rel);
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.files.insert(rel, sha256_hex(bytes));
        Ok(())
    }

    pub fn write_manifest(&mut self, command: &str, config: Value, extra: Value) -> Result<()> {
        let mut m = json!({
            "tool": "trajrisk",
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "config": config,
            "files": self.files,
        });
        if let (Value::Object(m), Value::Object(extra)) = (&mut m, extra) {
            m.extend(extra);
        }
        let mut text = serde_json::to_string_pretty(&m)?;
        text.push('\n');
        let path = self.root.join(format!("{}manifest.json", self.prefix));
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}

pub fn render_trajectories_csv(s: &MeanScores) -> String {
    let mut out = String::from("traj_id,origin_area,destination_area,k,strict_k,l,t\n");
    let area = |a: &Option<crate::areas::AreaId>| a.as_ref().map(|a| a.as_str().to_string()).unwrap_or_default();
    for t in s.trajectories.values() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            csv_field(&t.traj_id),
            csv_field(&area(&t.origin_area)),
            csv_field(&area(&t.destination_area)),
            fmt_opt(t.k),
            fmt_opt(t.strict_k),
            fmt_opt(t.l),
            fmt_opt(t.t)
        );
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Report JSON, per-metric area maps, staircases and per-trajectory scores.
pub fn write_score_outputs(out: &mut OutDir, report: &ScoreReport, areas: &AreaSet) -> Result<()> {
    out.write("report.json", render_report_json(report)?.as_bytes())?;
    for m in Metric::AREA {
        out.write(&format!("areas_{}.geojson", m.name()), render_area_geojson(report, areas, m)?.as_bytes())?;
    }
    for m in Metric::ALL {
        if report.staircase(m).is_none() {
            continue;
        }
        for f in [StaircaseFormat::Csv, StaircaseFormat::Svg] {
            let text = render_staircase(report, m, f)?;
            out.write(&format!("staircase_{}.{}", m.name(), f.extension()), text.as_bytes())?;
        }
    }
    out.write("trajectories.csv", render_trajectories_csv(&report.scores).as_bytes())?;
    Ok(())
}

pub fn write_diff_outputs(out: &mut OutDir, raw: &ScoreReport, anon: &ScoreReport, areas: &AreaSet) -> Result<()> {
    for m in Metric::AREA {
        out.write(&format!("diff_{}.geojson", m.name()), render_diff_geojson(raw, anon, areas, m)?.as_bytes())?;
    }
    let mut text = serde_json::to_string_pretty(&diff_reports(raw, anon)?)?;
    text.push('\n');
    out.write("diff.json", text.as_bytes())
}

/// Perturbed copies of `d`, one per repetition.
pub fn perturbed_copies(d: &Dataset, noise: &NoiseConfig) -> Vec<(Dataset, PerturbReport)> {
    (0..noise.repetitions).map(|rep| perturb(d, noise, rep)).collect()
}

pub fn write_perturbed(out: &mut OutDir, copies: &[(Dataset, PerturbReport)]) -> Result<()> {
    for (rep, (d, _)) in copies.iter().enumerate() {
        let mut buf = Vec::new();
        write_canonical(d, &mut buf)?;
        out.write(&format!("perturbed_r{rep}.csv"), &buf)?;
    }
    Ok(())
}

pub fn raw_report(d: &Dataset, areas: &AreaSet, opts: ScoreOptions, config: Value, loaded: &Loaded) -> ScoreReport {
    let scores = score_area_set(d, areas, opts);
    let mut r = ScoreReport::new(MeanScores::from(&scores), areas, config);
    r.parse = Some(loaded.parse);
    r.filter = Some(loaded.filter);
    r
}

pub fn anonymized_report(
    copies: &[(Dataset, PerturbReport)],
    areas: &AreaSet,
    opts: ScoreOptions,
    noise: &NoiseConfig,
    config: Value,
    loaded: &Loaded,
) -> ScoreReport {
    let runs: Vec<ScoreSet> = copies.iter().map(|(d, _)| score_area_set(d, areas, opts)).collect();
    let mut r = ScoreReport::new(MeanScores::average(&runs), areas, config);
    r.parse = Some(loaded.parse);
    r.filter = Some(loaded.filter);
    r.noise = Some(*noise);
    r.perturbations = copies.iter().map(|(_, p)| *p).collect();
    r
}

pub fn input_echo(rc: &RunConfig, loaded: &Loaded) -> Value {
    json!({
        "input": {
            "path": rc.input.to_string_lossy(),
            "sha256": loaded.input_sha256,
        },
        "data_time_span": loaded.dataset.time_span().map(|(a, b)| [format_timestamp(a), format_timestamp(b)]),
    })
}

pub fn require_out(rc: &RunConfig) -> Outcome<PathBuf> {
    rc.out
        .clone()
        .ok_or_else(|| Failure::from(Error::Config("no output directory given (--out)".into())))
}
