//! Trip-record CSV ingestion and the canonical CSV emitter.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::model::{format_timestamp, Coord, Dataset, Record, TimeFormat, Trajectory};

/// Column names of the canonical CSV layout, in output order.
pub const CANONICAL_COLUMNS: [&str; 7] = [
    "id",
    "pickup_time",
    "pickup_lon",
    "pickup_lat",
    "dropoff_time",
    "dropoff_lon",
    "dropoff_lat",
];

/// Maps logical trip fields onto input column names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    pub pickup_time: String,
    pub dropoff_time: String,
    pub pickup_lon: String,
    pub pickup_lat: String,
    pub dropoff_lon: String,
    pub dropoff_lat: String,
    /// When `None`, sequential pseudonyms are synthesized.
    pub id: Option<String>,
}

impl Default for Schema {
    fn default() -> Self {
        Self {
            pickup_time: "pickup_time".into(),
            dropoff_time: "dropoff_time".into(),
            pickup_lon: "pickup_lon".into(),
            pickup_lat: "pickup_lat".into(),
            dropoff_lon: "dropoff_lon".into(),
            dropoff_lat: "dropoff_lat".into(),
            id: Some("id".into()),
        }
    }
}

impl Schema {
    /// Column names of the 2009 NYC yellow-cab trip records.
    pub fn nyc_yellow_2009() -> Self {
        Self {
            pickup_time: "Trip_Pickup_DateTime".into(),
            dropoff_time: "Trip_Dropoff_DateTime".into(),
            pickup_lon: "Start_Lon".into(),
            pickup_lat: "Start_Lat".into(),
            dropoff_lon: "End_Lon".into(),
            dropoff_lat: "End_Lat".into(),
            id: None,
        }
    }

    /// Sets one logical field. `id` may be set to an empty string to request
    /// synthesized pseudonyms.
    pub fn set(&mut self, key: &str, column: &str) -> Result<()> {
        let column = column.trim().to_string();
        let slot = match key.trim() {
            "pickup_time" => &mut self.pickup_time,
            "dropoff_time" => &mut self.dropoff_time,
            "pickup_lon" => &mut self.pickup_lon,
            "pickup_lat" => &mut self.pickup_lat,
            "dropoff_lon" => &mut self.dropoff_lon,
            "dropoff_lat" => &mut self.dropoff_lat,
            "id" => {
                self.id = (!column.is_empty()).then_some(column);
                return Ok(());
            }
            other => return Err(Error::Schema(format!("unknown schema field {other:?}"))),
        };
        if column.is_empty() {
            return Err(Error::Schema(format!("empty column name for {key}")));
        }
        *slot = column;
        Ok(())
    }

    /// Reads `field = column` lines on top of the default schema. `#` starts a comment.
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut schema = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Schema(format!("line {}: expected field=column", n + 1)))?;
            schema.set(k, v.trim().trim_matches('"'))?;
        }
        Ok(schema)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    /// Skip and count malformed rows.
    #[default]
    Lenient,
    /// Abort on the first malformed row.
    Strict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize)]
pub struct ParseStats {
    pub rows: u64,
    pub errors: u64,
}

#[derive(Debug, Clone)]
pub struct Parsed {
    pub dataset: Dataset,
    pub stats: ParseStats,
}

struct Columns {
    pickup_time: usize,
    dropoff_time: usize,
    pickup_lon: usize,
    pickup_lat: usize,
    dropoff_lon: usize,
    dropoff_lat: usize,
    id: Option<usize>,
    /// Unmapped columns, carried as extras.
    extras: Vec<(usize, String)>,
}

impl Columns {
    fn resolve(header: &csv::StringRecord, schema: &Schema) -> Result<Self> {
        let find = |name: &str| {
            header
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| Error::Schema(format!("column {name:?} not found in header")))
        };
        let cols = Columns {
            pickup_time: find(&schema.pickup_time)?,
            dropoff_time: find(&schema.dropoff_time)?,
            pickup_lon: find(&schema.pickup_lon)?,
            pickup_lat: find(&schema.pickup_lat)?,
            dropoff_lon: find(&schema.dropoff_lon)?,
            dropoff_lat: find(&schema.dropoff_lat)?,
            id: schema.id.as_deref().map(find).transpose()?,
            extras: Vec::new(),
        };
        let mapped = [
            cols.pickup_time,
            cols.dropoff_time,
            cols.pickup_lon,
            cols.pickup_lat,
            cols.dropoff_lon,
            cols.dropoff_lat,
        ];
        let extras = header
            .iter()
            .enumerate()
            .filter(|(i, _)| !mapped.contains(i) && Some(*i) != cols.id)
            .map(|(i, h)| (i, h.trim().to_string()))
            .collect();
        Ok(Columns { extras, ..cols })
    }
}

/// Parses trip records into a dataset with one two-record trajectory per row.
pub fn parse_dataset<R: Read>(input: R, schema: &Schema, mode: ParseMode) -> Result<Parsed> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(input);
    let header = reader.headers()?.clone();
    let cols = Columns::resolve(&header, schema)?;

    let mut pickup_fmt = None;
    let mut dropoff_fmt = None;
    let mut seen = HashSet::new();
    let mut trajectories = Vec::new();
    let mut stats = ParseStats::default();

    for (row, result) in reader.records().enumerate() {
        stats.rows += 1;
        let line = row as u64 + 2;
        let outcome = result.map_err(|e| e.to_string()).and_then(|rec| {
            if rec.len() != header.len() {
                return Err(format!("expected {} fields, found {}", header.len(), rec.len()));
            }
            let id = match cols.id {
                Some(i) => rec[i].trim().to_string(),
                None => trajectories.len().to_string(),
            };
            if id.is_empty() {
                return Err("empty trajectory id".into());
            }
            if seen.contains(&id) {
                return Err(format!("duplicate trajectory id {id:?}"));
            }
            let t0 = parse_time(&rec[cols.pickup_time], &mut pickup_fmt)?;
            let t1 = parse_time(&rec[cols.dropoff_time], &mut dropoff_fmt)?;
            let s0 = parse_coord(&rec[cols.pickup_lon], &rec[cols.pickup_lat])?;
            let s1 = parse_coord(&rec[cols.dropoff_lon], &rec[cols.dropoff_lat])?;
            let extras: BTreeMap<String, String> = cols
                .extras
                .iter()
                .map(|(i, name)| (name.clone(), rec[*i].to_string()))
                .collect();
            let records = vec![
                Record::new(t0, s0, id.clone()).with_extras(extras.clone()),
                Record::new(t1, s1, id.clone()).with_extras(extras),
            ];
            Trajectory::new(id, records).map_err(|e| e.to_string())
        });
        match outcome {
            Ok(traj) => {
                seen.insert(traj.id().to_string());
                trajectories.push(traj);
            }
            Err(message) => match mode {
                ParseMode::Strict => return Err(Error::Row { line, message }),
                ParseMode::Lenient => stats.errors += 1,
            },
        }
    }

    Ok(Parsed {
        dataset: Dataset::from_unique(trajectories, String::new()),
        stats,
    })
}

fn parse_time(
    value: &str,
    fmt: &mut Option<TimeFormat>,
) -> std::result::Result<crate::model::Timestamp, String> {
    let f = match *fmt {
        Some(f) => f,
        None => {
            let f = TimeFormat::detect(value).ok_or_else(|| format!("unparsable timestamp {value:?}"))?;
            *fmt = Some(f);
            f
        }
    };
    f.parse(value)
        .ok_or_else(|| format!("timestamp {value:?} does not match the column's format"))
}

fn parse_coord(lon: &str, lat: &str) -> std::result::Result<Coord, String> {
    let num = |v: &str| {
        v.trim()
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| format!("invalid coordinate {v:?}"))
    };
    let c = Coord::new(num(lon)?, num(lat)?);
    if !c.is_valid() {
        return Err(format!("coordinate {c} out of range"));
    }
    Ok(c)
}

/// Writes the canonical CSV: fixed columns, then the union of extras keys in
/// lexicographic order. Only the quasi-identifier and sensitive-attribute
/// records are written; extras come from the quasi-identifier record.
pub fn write_canonical<W: Write>(dataset: &Dataset, out: W) -> Result<()> {
    let extra_keys: BTreeSet<&str> = dataset
        .trajectories()
        .iter()
        .flat_map(|t| t.qi().extras.keys().map(String::as_str))
        .collect();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CANONICAL_COLUMNS.iter().copied().chain(extra_keys.iter().copied()))?;
    for t in dataset.trajectories() {
        let (qi, sa) = (t.qi(), t.sa());
        let mut row = vec![
            t.id().to_string(),
            format_timestamp(qi.t),
            format!("{:.6}", qi.s.lon),
            format!("{:.6}", qi.s.lat),
            format_timestamp(sa.t),
            format!("{:.6}", sa.s.lon),
            format!("{:.6}", sa.s.lat),
        ];
        row.extend(
            extra_keys
                .iter()
                .map(|k| qi.extras.get(*k).cloned().unwrap_or_default()),
        );
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
