//! Flat `key = value` settings shared by the config file and the command line.
//!
//! Both sources produce the same string map, so a value parses identically no
//! matter where it came from. Command-line values replace file values.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::{Duration, DurationRound};

use crate::anonymize::NoiseConfig;
use crate::error::{Error, Result};
use crate::filter::{FilterConfig, QiWindow};
use crate::ingest::{ParseMode, Schema};
use crate::model::{parse_timestamp, BBox, TimeInterval, Timestamp};

/// Every key the config file may contain. `map.<field>` keys are also accepted.
pub const KEYS: &[&str] = &[
    "input",
    "schema",
    "schema-preset",
    "strict",
    "min-duration",
    "bbox",
    "qi-window",
    "grid",
    "twindow",
    "time-origin",
    "time-range",
    "areas",
    "drop-self-loops",
    "sigma-space",
    "sigma-time",
    "seed",
    "repetitions",
    "spatial-sizes",
    "temporal-sizes",
    "out",
    "jobs",
    "emit-perturbed",
];

const NOISE_KEYS: &[&str] = &["sigma-space", "sigma-time", "repetitions"];

fn normalize_key(k: &str) -> String {
    let k = k.trim().to_ascii_lowercase();
    match k.strip_prefix("map.") {
        Some(field) => format!("map.{}", field.replace('-', "_")),
        None => k.replace('_', "-"),
    }
}

fn check_key(k: &str) -> Result<()> {
    if KEYS.contains(&k) || k.starts_with("map.") {
        Ok(())
    } else {
        Err(Error::Config(format!("unknown setting {k:?}")))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    /// Parses `key = value` lines. `#` starts a comment, `[section]` lines are
    /// ignored, and surrounding quotes on values are dropped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut s = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() || (line.starts_with('[') && line.ends_with(']')) {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("config line {}: expected key = value", n + 1)))?;
            let v = v.trim();
            let v = v
                .strip_prefix('"')
                .and_then(|v| v.strip_suffix('"'))
                .unwrap_or(v);
            s.set(k, v)?;
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        let k = normalize_key(key);
        check_key(&k)?;
        self.values.insert(k, value.into());
        Ok(())
    }

    /// Sets `key` when `value` is present.
    pub fn set_opt(&mut self, key: &str, value: Option<impl ToString>) -> Result<()> {
        match value {
            Some(v) => self.set(key, v.to_string()),
            None => Ok(()),
        }
    }

    /// Records a command-line switch; an absent switch leaves the file value alone.
    pub fn set_flag(&mut self, key: &str, on: bool) -> Result<()> {
        if on {
            self.set(key, "true")?;
        }
        Ok(())
    }

    /// `other` wins on every key it defines.
    pub fn overlay(&mut self, other: &Settings) {
        for (k, v) in &other.values {
            self.values.insert(k.clone(), v.clone());
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn has_noise(&self) -> bool {
        NOISE_KEYS.iter().any(|k| self.values.contains_key(*k))
    }

    pub fn as_map(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    fn parsed<T>(&self, key: &str, f: impl FnOnce(&str) -> Result<T>) -> Result<Option<T>> {
        self.get(key).map(f).transpose()
    }

    fn flag(&self, key: &str) -> Result<bool> {
        Ok(self.parsed(key, parse_bool)?.unwrap_or(false))
    }
}

pub fn parse_bool(v: &str) -> Result<bool> {
    match v.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Config(format!("expected true or false, got {v:?}"))),
    }
}

/// Durations like `90s`, `10m`, `10min`, `1h`; a bare number is seconds.
pub fn parse_duration(v: &str) -> Result<Duration> {
    let v = v.trim();
    let split = v.find(|c: char| c.is_ascii_alphabetic()).unwrap_or(v.len());
    let (num, unit) = v.split_at(split);
    let x: f64 = num
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("bad duration {v:?}")))?;
    let scale = match unit.trim() {
        "" | "s" | "sec" => 1.0,
        "m" | "min" => 60.0,
        "h" => 3600.0,
        _ => return Err(Error::Config(format!("bad duration unit in {v:?} (use s, m or h)"))),
    };
    let ms = x * scale * 1000.0;
    if !ms.is_finite() || ms < 0.0 {
        return Err(Error::Config(format!("duration {v:?} must be finite and non-negative")));
    }
    Ok(Duration::milliseconds(ms.round() as i64))
}

fn parse_f64(v: &str) -> Result<f64> {
    let x: f64 = v
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("expected a number, got {v:?}")))?;
    if !x.is_finite() {
        return Err(Error::Config(format!("expected a finite number, got {v:?}")));
    }
    Ok(x)
}

fn parse_int<T: std::str::FromStr>(v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::Config(format!("expected a non-negative integer, got {v:?}")))
}

fn parse_list<T>(v: &str, f: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    let items: Vec<T> = v
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(f)
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(Error::Config(format!("empty list {v:?}")));
    }
    Ok(items)
}

fn parse_bbox(v: &str) -> Result<BBox> {
    let xs = parse_list(v, parse_f64)?;
    match xs[..] {
        [a, b, c, d] => BBox::new(a, b, c, d),
        _ => Err(Error::Config(format!("bbox {v:?} needs lon_min,lat_min,lon_max,lat_max"))),
    }
}

fn parse_ts(v: &str) -> Result<Timestamp> {
    parse_timestamp(v.trim()).ok_or_else(|| Error::Config(format!("bad timestamp {v:?}")))
}

fn parse_interval(v: &str) -> Result<TimeInterval> {
    let (a, b) = v
        .split_once("..")
        .ok_or_else(|| Error::Config(format!("interval {v:?} must look like start..end")))?;
    TimeInterval::new(parse_ts(a)?, parse_ts(b)?)
}

/// Name used for a sweep configuration's output directory.
pub fn config_dir_name(spatial: f64, temporal: Duration) -> String {
    let minutes = temporal.num_milliseconds() as f64 / 60_000.0;
    format!("s{}_t{}", crate::numfmt::fmt_score(spatial), crate::numfmt::fmt_score(minutes))
}

#[derive(Debug, Clone, PartialEq)]
pub enum AreaSource {
    Grid {
        spatial_size_deg: f64,
        temporal_size: Duration,
        time_origin: Option<Timestamp>,
        time_range: Option<TimeInterval>,
    },
    GeoJson {
        path: PathBuf,
    },
}

/// Settings resolved into typed values, with defaults filled in.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub input: PathBuf,
    pub schema: Schema,
    pub parse_mode: ParseMode,
    pub filter: FilterConfig,
    pub drop_self_loops: bool,
    pub noise: NoiseConfig,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub emit_perturbed: bool,
    pub settings: Settings,
}

impl RunConfig {
    /// `default_seed` applies when no seed setting is present.
    pub fn resolve(settings: Settings, default_seed: Option<u64>) -> Result<Self> {
        let s = &settings;
        let input = s
            .get("input")
            .map(PathBuf::from)
            .ok_or_else(|| Error::Config("no input file given (--input)".into()))?;

        let mut schema = match s.get("schema-preset").unwrap_or("canonical") {
            "canonical" => Schema::default(),
            "nyc-2009" | "nyc_yellow_2009" => Schema::nyc_yellow_2009(),
            other => return Err(Error::Config(format!("unknown schema preset {other:?} (canonical, nyc-2009)"))),
        };
        if let Some(path) = s.get("schema") {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            schema = Schema::from_kv(&text).map_err(|e| Error::Config(e.to_string()))?;
        }
        for (k, v) in s.as_map() {
            if let Some(field) = k.strip_prefix("map.") {
                schema.set(field, v).map_err(|e| Error::Config(e.to_string()))?;
            }
        }

        let mut filter = FilterConfig::default();
        if let Some(d) = s.parsed("min-duration", parse_duration)? {
            filter.min_duration = d;
        }
        if let Some(b) = s.parsed("bbox", parse_bbox)? {
            filter.bbox = b;
        }
        filter.time_window = s.parsed("qi-window", QiWindow::parse)?;
        filter.validate()?;

        let mut noise = NoiseConfig {
            seed: default_seed.unwrap_or(0),
            ..NoiseConfig::default()
        };
        if let Some(v) = s.parsed("sigma-space", parse_f64)? {
            noise.sigma_space_m = v;
        }
        if let Some(v) = s.parsed("sigma-time", parse_duration)? {
            noise.sigma_time = v;
        }
        if let Some(v) = s.parsed("seed", parse_int)? {
            noise.seed = v;
        }
        if let Some(v) = s.parsed("repetitions", parse_int)? {
            noise.repetitions = v;
        }
        noise.validate()?;

        let jobs = s.parsed("jobs", parse_int::<usize>)?;
        if jobs == Some(0) {
            return Err(Error::Config("jobs must be at least 1".into()));
        }

        Ok(Self {
            input,
            schema,
            parse_mode: if s.flag("strict")? { ParseMode::Strict } else { ParseMode::Lenient },
            filter,
            drop_self_loops: s.flag("drop-self-loops")?,
            noise,
            out: s.get("out").map(PathBuf::from),
            jobs,
            emit_perturbed: s.flag("emit-perturbed")?,
            settings,
        })
    }

    /// The single area source of a `score` or `compare` run.
    pub fn area_source(&self) -> Result<AreaSource> {
        let s = &self.settings;
        match (s.get("grid"), s.get("areas")) {
            (Some(_), Some(_)) => Err(Error::Config("give either --grid or --areas, not both".into())),
            (None, None) => Err(Error::Config("no area source given (--grid or --areas)".into())),
            (None, Some(path)) => {
                for k in ["twindow", "time-origin", "time-range"] {
                    if s.get(k).is_some() {
                        return Err(Error::Config(format!("{k} only applies to --grid")));
                    }
                }
                Ok(AreaSource::GeoJson { path: path.into() })
            }
            (Some(size), None) => {
                let twindow = s
                    .get("twindow")
                    .ok_or_else(|| Error::Config("--grid needs --twindow".into()))?;
                self.grid_source(parse_f64(size)?, parse_duration(twindow)?)
            }
        }
    }

    fn grid_source(&self, spatial_size_deg: f64, temporal_size: Duration) -> Result<AreaSource> {
        let s = &self.settings;
        Ok(AreaSource::Grid {
            spatial_size_deg,
            temporal_size,
            time_origin: s.parsed("time-origin", parse_ts)?,
            time_range: s.parsed("time-range", parse_interval)?,
        })
    }

    /// Every (spatial, temporal) grid of a sweep, spatial sizes outermost.
    pub fn sweep_sources(&self) -> Result<(Vec<f64>, Vec<Duration>)> {
        let s = &self.settings;
        if s.get("areas").is_some() || s.get("grid").is_some() || s.get("twindow").is_some() {
            return Err(Error::Config("sweep takes --spatial-sizes and --temporal-sizes instead of an area source".into()));
        }
        let spatial = parse_list(s.get("spatial-sizes").unwrap_or("0.002,0.005,0.01"), parse_f64)?;
        let temporal = parse_list(s.get("temporal-sizes").unwrap_or("5m,10m,30m"), parse_duration)?;
        let mut names: Vec<String> = Vec::new();
        for &sp in &spatial {
            for &t in &temporal {
                let name = config_dir_name(sp, t);
                if names.contains(&name) {
                    return Err(Error::Config(format!("sweep lists repeat configuration {name}")));
                }
                names.push(name);
            }
        }
        Ok((spatial, temporal))
    }

    pub fn sweep_grid(&self, spatial: f64, temporal: Duration) -> Result<AreaSource> {
        self.grid_source(spatial, temporal)
    }
}

/// Default grid time range: whole UTC days around the data, one spare day on
/// each side so perturbed timestamps stay covered.
pub fn default_time_range(span: (Timestamp, Timestamp)) -> TimeInterval {
    let day = Duration::days(1);
    let floor = |t: Timestamp| t.duration_trunc(day).unwrap_or(t);
    TimeInterval {
        start: floor(span.0) - day,
        end: floor(span.1) + day + day,
    }
}
