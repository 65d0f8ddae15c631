//! Command-line front end.
//!
//! Exit codes: 0 success, 1 configuration error, 2 input or I/O error,
//! 3 nothing left to score after filtering.

mod pipeline;
pub mod settings;

use std::ffi::OsString;
use std::io::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::{json, Value};

use self::pipeline::*;
use self::settings::{config_dir_name, RunConfig, Settings};
use crate::error::Error;
use crate::ingest::write_canonical;
use crate::metrics::{ScoreOptions, Staircase};
use crate::report::{render_report_json, render_staircase_panel_svg, render_staircase_table, Metric, PanelCell, ScoreReport};

pub use self::pipeline::{EXIT_CONFIG, EXIT_EMPTY, EXIT_INPUT};

#[derive(Debug, Parser)]
#[command(name = "trajrisk", version, about = "Measure re-identification and inference risk in trip datasets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and filter trip records, then write them in the canonical CSV layout.
    Ingest(IngestArgs),
    /// Score one area set: per-area maps, staircases and a run manifest.
    Score(ScoreArgs),
    /// Score every combination of grid spatial and temporal sizes.
    Sweep(SweepArgs),
    /// Write Gaussian-perturbed copies of the dataset.
    Perturb(PerturbArgs),
    /// Score raw and perturbed data on the same areas and write per-area differences.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Flat `key = value` file; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Trip CSV.
    #[arg(long)]
    input: Option<String>,
    /// File of `field = column` lines.
    #[arg(long)]
    schema: Option<String>,
    /// `canonical` (default) or `nyc-2009`.
    #[arg(long)]
    schema_preset: Option<String>,
    /// Override one column mapping, e.g. `--map pickup_time=tpep_pickup_datetime`.
    #[arg(long = "map", value_name = "FIELD=COLUMN")]
    map: Vec<String>,
    /// Abort on the first malformed row instead of skipping it.
    #[arg(long)]
    strict: bool,
    /// Shortest trip kept, e.g. `60s`.
    #[arg(long)]
    min_duration: Option<String>,
    /// `lon_min,lat_min,lon_max,lat_max`; both trip ends must lie inside.
    #[arg(long, allow_hyphen_values = true)]
    bbox: Option<String>,
    /// Keep trips whose origin time falls in `HH:MM..HH:MM` (daily, UTC) or `ts..ts`.
    #[arg(long)]
    qi_window: Option<String>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<String>,
    /// Output directory (`ingest`: output file, stdout when omitted).
    #[arg(long)]
    out: Option<String>,
}

#[derive(Debug, Args)]
pub struct AreaArgs {
    /// Grid cell size in degrees.
    #[arg(long)]
    grid: Option<String>,
    /// Grid time slot length, e.g. `10m`.
    #[arg(long)]
    twindow: Option<String>,
    /// Instant grid slots are counted from (default: start of the time range).
    #[arg(long)]
    time_origin: Option<String>,
    /// Grid time coverage `ts..ts` (default: whole days around the data, plus one day each side).
    #[arg(long)]
    time_range: Option<String>,
    /// GeoJSON FeatureCollection of equivalence areas.
    #[arg(long)]
    areas: Option<String>,
    /// Leave trips that end in their origin area out of l and t.
    #[arg(long)]
    drop_self_loops: bool,
}

#[derive(Debug, Args)]
pub struct SweepAreaArgs {
    /// Comma-separated cell sizes in degrees.
    #[arg(long)]
    spatial_sizes: Option<String>,
    /// Comma-separated slot lengths.
    #[arg(long)]
    temporal_sizes: Option<String>,
    #[arg(long)]
    time_origin: Option<String>,
    #[arg(long)]
    time_range: Option<String>,
    #[arg(long)]
    drop_self_loops: bool,
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    /// Spatial noise standard deviation in meters.
    #[arg(long)]
    sigma_space: Option<String>,
    /// Temporal noise standard deviation, e.g. `10m`.
    #[arg(long)]
    sigma_time: Option<String>,
    /// Noise seed; defaults to $TRAJRISK_SEED, then 0.
    #[arg(long)]
    seed: Option<String>,
    /// Perturbation repetitions to average.
    #[arg(long)]
    repetitions: Option<String>,
    /// Also write each perturbed copy as canonical CSV.
    #[arg(long)]
    emit_perturbed: bool,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[command(flatten)]
    input: InputArgs,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    areas: AreaArgs,
    /// With any noise setting, scores are averaged over perturbed copies.
    #[command(flatten)]
    noise: NoiseArgs,
    /// Also print report.json to stdout.
    #[arg(long)]
    stdout: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    areas: SweepAreaArgs,
    #[command(flatten)]
    noise: NoiseArgs,
}

#[derive(Debug, Args)]
pub struct PerturbArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    noise: NoiseArgs,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    areas: AreaArgs,
    #[command(flatten)]
    noise: NoiseArgs,
    /// Settings for the perturbed side, layered over the main settings.
    #[arg(long)]
    noise_config: Option<PathBuf>,
}

type Res<T> = crate::error::Result<T>;

impl InputArgs {
    fn apply(&self, s: &mut Settings) -> Res<()> {
        s.set_opt("input", self.input.as_ref())?;
        s.set_opt("schema", self.schema.as_ref())?;
        s.set_opt("schema-preset", self.schema_preset.as_ref())?;
        for m in &self.map {
            let (k, v) = m
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--map {m:?} must look like field=column")))?;
            s.set(&format!("map.{}", k.trim()), v.trim())?;
        }
        s.set_flag("strict", self.strict)?;
        s.set_opt("min-duration", self.min_duration.as_ref())?;
        s.set_opt("bbox", self.bbox.as_ref())?;
        s.set_opt("qi-window", self.qi_window.as_ref())?;
        s.set_opt("jobs", self.jobs.as_ref())?;
        s.set_opt("out", self.out.as_ref())
    }
}

impl AreaArgs {
    fn apply(&self, s: &mut Settings) -> Res<()> {
        s.set_opt("grid", self.grid.as_ref())?;
        s.set_opt("twindow", self.twindow.as_ref())?;
        s.set_opt("time-origin", self.time_origin.as_ref())?;
        s.set_opt("time-range", self.time_range.as_ref())?;
        s.set_opt("areas", self.areas.as_ref())?;
        s.set_flag("drop-self-loops", self.drop_self_loops)
    }
}

impl SweepAreaArgs {
    fn apply(&self, s: &mut Settings) -> Res<()> {
        s.set_opt("spatial-sizes", self.spatial_sizes.as_ref())?;
        s.set_opt("temporal-sizes", self.temporal_sizes.as_ref())?;
        s.set_opt("time-origin", self.time_origin.as_ref())?;
        s.set_opt("time-range", self.time_range.as_ref())?;
        s.set_flag("drop-self-loops", self.drop_self_loops)
    }
}

impl NoiseArgs {
    fn apply(&self, s: &mut Settings) -> Res<()> {
        s.set_opt("sigma-space", self.sigma_space.as_ref())?;
        s.set_opt("sigma-time", self.sigma_time.as_ref())?;
        s.set_opt("seed", self.seed.as_ref())?;
        s.set_opt("repetitions", self.repetitions.as_ref())?;
        s.set_flag("emit-perturbed", self.emit_perturbed)
    }
}

fn env_seed() -> Res<Option<u64>> {
    match std::env::var("TRAJRISK_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("TRAJRISK_SEED must be an unsigned integer, got {v:?}"))),
        Err(_) => Ok(None),
    }
}

/// Config file first, command line on top.
fn settings(input: &InputArgs, rest: &[&dyn Fn(&mut Settings) -> Res<()>]) -> Res<RunConfig> {
    let mut s = match &input.config {
        Some(p) => Settings::load(p).map_err(|e| match e {
            Error::Io { .. } => Error::Config(e.to_string()),
            other => other,
        })?,
        None => Settings::default(),
    };
    let mut cli = Settings::default();
    input.apply(&mut cli)?;
    for f in rest {
        f(&mut cli)?;
    }
    s.overlay(&cli);
    RunConfig::resolve(s, env_seed()?)
}

/// Parses `args` (program name first) and runs the command; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("trajrisk: error: {}", f.message);
            f.code
        }
    }
}

pub fn run(cli: Cli) -> Outcome<()> {
    let (rc, noise_config) = match &cli.command {
        Command::Ingest(a) => (settings(&a.input, &[])?, None),
        Command::Score(a) => (settings(&a.input, &[&|s| a.areas.apply(s), &|s| a.noise.apply(s)])?, None),
        Command::Sweep(a) => (settings(&a.input, &[&|s| a.areas.apply(s), &|s| a.noise.apply(s)])?, None),
        Command::Perturb(a) => (settings(&a.input, &[&|s| a.noise.apply(s)])?, None),
        Command::Compare(a) => (
            settings(&a.input, &[&|s| a.areas.apply(s), &|s| a.noise.apply(s)])?,
            a.noise_config.clone(),
        ),
    };
    let go = || match &cli.command {
        Command::Ingest(_) => cmd_ingest(&rc),
        Command::Score(a) => cmd_score(&rc, a.stdout),
        Command::Sweep(_) => cmd_sweep(&rc),
        Command::Perturb(_) => cmd_perturb(&rc),
        Command::Compare(_) => cmd_compare(&rc, noise_config.as_deref()),
    };
    match rc.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Failure {
                code: EXIT_CONFIG,
                message: format!("cannot start {n} worker threads: {e}"),
            })?
            .install(go),
        None => go(),
    }
}

pub fn cmd_ingest(rc: &RunConfig) -> Outcome<()> {
    let loaded = load(rc)?;
    let mut buf = Vec::new();
    write_canonical(&loaded.dataset, &mut buf)?;
    match &rc.out {
        Some(path) => std::fs::write(path, &buf).map_err(|e| Error::io(path, e))?,
        None => std::io::stdout().write_all(&buf).map_err(Error::Stream)?,
    }
    eprintln!(
        "trajrisk: {}",
        json!({ "parse": loaded.parse, "filter": loaded.filter, "input_sha256": loaded.input_sha256 })
    );
    Ok(())
}

fn options(rc: &RunConfig) -> ScoreOptions {
    ScoreOptions {
        drop_self_loops: rc.drop_self_loops,
    }
}

fn manifest_extra(rc: &RunConfig, loaded: &Loaded, areas_sha: Option<&String>, seed: Option<u64>) -> Value {
    let mut v = input_echo(rc, loaded);
    if let Some(sha) = areas_sha {
        v["areas_sha256"] = json!(sha);
    }
    if let Some(seed) = seed {
        v["seed"] = json!(seed);
    }
    v
}

pub fn cmd_score(rc: &RunConfig, to_stdout: bool) -> Outcome<()> {
    let src = rc.area_source()?;
    let root = require_out(rc)?;
    let loaded = load(rc)?;
    let areas = build_areas(&src, rc, &loaded.dataset)?;
    let noisy = rc.settings.has_noise();
    let noise = noisy.then_some(&rc.noise);
    let config = effective_config(rc, Some(&areas.echo), noise);
    let mut out = OutDir::create(&root)?;
    let report = if noisy {
        let copies = perturbed_copies(&loaded.dataset, &rc.noise);
        if rc.emit_perturbed {
            write_perturbed(&mut out, &copies)?;
        }
        anonymized_report(&copies, &areas.set, options(rc), &rc.noise, config.clone(), &loaded)
    } else {
        raw_report(&loaded.dataset, &areas.set, options(rc), config.clone(), &loaded)
    };
    write_score_outputs(&mut out, &report, &areas.set)?;
    let extra = manifest_extra(rc, &loaded, areas.file_sha256.as_ref(), noise.map(|n| n.seed));
    out.write_manifest("score", config, extra)?;
    if to_stdout {
        std::io::stdout()
            .write_all(render_report_json(&report)?.as_bytes())
            .map_err(Error::Stream)?;
    }
    Ok(())
}

pub fn cmd_perturb(rc: &RunConfig) -> Outcome<()> {
    let root = require_out(rc)?;
    let loaded = load(rc)?;
    let copies = perturbed_copies(&loaded.dataset, &rc.noise);
    let mut out = OutDir::create(&root)?;
    write_perturbed(&mut out, &copies)?;
    let reports: Vec<_> = copies.iter().map(|(_, r)| *r).collect();
    let text = serde_json::to_string_pretty(&json!({ "noise": rc.noise, "repetitions": reports })).map_err(Error::from)? + "\n";
    out.write("perturb.json", text.as_bytes())?;
    let config = effective_config(rc, None, Some(&rc.noise));
    out.write_manifest("perturb", config, manifest_extra(rc, &loaded, None, Some(rc.noise.seed)))?;
    Ok(())
}

/// Keys a compare noise config may set: noise settings and a restatement of the area source.
const NOISE_CONFIG_KEYS: &[&str] = &[
    "sigma-space",
    "sigma-time",
    "seed",
    "repetitions",
    "grid",
    "twindow",
    "time-origin",
    "time-range",
    "areas",
];

pub fn cmd_compare(rc: &RunConfig, noise_config: Option<&std::path::Path>) -> Outcome<()> {
    let raw_src = rc.area_source()?;
    let anon_rc = match noise_config {
        Some(path) => {
            let extra = Settings::load(path).map_err(|e| match e {
                Error::Io { .. } => Error::Config(e.to_string()),
                other => other,
            })?;
            if let Some(k) = extra.as_map().keys().find(|k| !NOISE_CONFIG_KEYS.contains(&k.as_str())) {
                return Err(Error::Config(format!("{k} cannot differ between the raw and noise configs")).into());
            }
            let mut s = rc.settings.clone();
            s.overlay(&extra);
            RunConfig::resolve(s, env_seed()?)?
        }
        None => rc.clone(),
    };
    if anon_rc.area_source()? != raw_src {
        return Err(Error::Config("raw and noise configs name different area sources".into()).into());
    }
    let root = require_out(rc)?;
    let noise = anon_rc.noise;
    let loaded = load(rc)?;
    let areas = build_areas(&raw_src, rc, &loaded.dataset)?;
    let config = effective_config(rc, Some(&areas.echo), Some(&noise));
    let mut out = OutDir::create(&root)?;

    let raw = raw_report(&loaded.dataset, &areas.set, options(rc), config.clone(), &loaded);
    let copies = perturbed_copies(&loaded.dataset, &noise);
    let anon = anonymized_report(&copies, &areas.set, options(rc), &noise, config.clone(), &loaded);
    if anon_rc.emit_perturbed || rc.emit_perturbed {
        write_perturbed(&mut out, &copies)?;
    }
    let mut raw_dir = out.sub("raw")?;
    write_score_outputs(&mut raw_dir, &raw, &areas.set)?;
    out.absorb(raw_dir);
    let mut anon_dir = out.sub("anonymized")?;
    write_score_outputs(&mut anon_dir, &anon, &areas.set)?;
    out.absorb(anon_dir);
    write_diff_outputs(&mut out, &raw, &anon, &areas.set)?;
    let extra = manifest_extra(rc, &loaded, areas.file_sha256.as_ref(), Some(noise.seed));
    out.write_manifest("compare", config, extra)?;
    Ok(())
}

struct SweepResult {
    raw: ScoreReport,
    anon: Option<ScoreReport>,
    out: OutDir,
}

pub fn cmd_sweep(rc: &RunConfig) -> Outcome<()> {
    let (spatial, temporal) = rc.sweep_sources()?;
    let root = require_out(rc)?;
    let loaded = load(rc)?;
    let noisy = rc.settings.has_noise();
    let noise = noisy.then_some(&rc.noise);
    let copies = if noisy { perturbed_copies(&loaded.dataset, &rc.noise) } else { Vec::new() };
    let mut out = OutDir::create(&root)?;
    if rc.emit_perturbed && noisy {
        write_perturbed(&mut out, &copies)?;
    }

    let configs: Vec<(usize, usize)> = (0..spatial.len())
        .flat_map(|i| (0..temporal.len()).map(move |j| (i, j)))
        .collect();
    let results: Vec<Outcome<SweepResult>> = configs
        .par_iter()
        .map(|&(i, j)| -> Outcome<SweepResult> {
            let src = rc.sweep_grid(spatial[i], temporal[j])?;
            let areas = build_areas(&src, rc, &loaded.dataset)?;
            let config = effective_config(rc, Some(&areas.echo), noise);
            let mut dir = out.sub(&config_dir_name(spatial[i], temporal[j]))?;
            let raw = raw_report(&loaded.dataset, &areas.set, options(rc), config.clone(), &loaded);
            let anon = if noisy {
                let anon = anonymized_report(&copies, &areas.set, options(rc), &rc.noise, config, &loaded);
                let mut r = dir.sub("raw")?;
                write_score_outputs(&mut r, &raw, &areas.set)?;
                dir.absorb(r);
                let mut a = dir.sub("anonymized")?;
                write_score_outputs(&mut a, &anon, &areas.set)?;
                dir.absorb(a);
                write_diff_outputs(&mut dir, &raw, &anon, &areas.set)?;
                Some(anon)
            } else {
                write_score_outputs(&mut dir, &raw, &areas.set)?;
                None
            };
            Ok(SweepResult { raw, anon, out: dir })
        })
        .collect();

    let mut done = Vec::with_capacity(results.len());
    for r in results {
        done.push(r?);
    }

    let name = |k: usize| {
        let (i, j) = configs[k];
        config_dir_name(spatial[i], temporal[j])
    };
    let title = |k: usize| {
        let (i, j) = configs[k];
        format!(
            "{} deg, {} min",
            crate::numfmt::fmt_score(spatial[i]),
            crate::numfmt::fmt_score(temporal[j].num_milliseconds() as f64 / 60_000.0)
        )
    };
    let sides: [(&str, Box<dyn Fn(&SweepResult) -> Option<&ScoreReport>>); 2] = [
        ("", Box::new(|r: &SweepResult| Some(&r.raw))),
        ("_anonymized", Box::new(|r: &SweepResult| r.anon.as_ref())),
    ];
    for (suffix, pick) in &sides {
        if done.iter().all(|r| pick(r).is_none()) {
            continue;
        }
        for m in Metric::ALL {
            let series: Vec<(String, Option<&Staircase>)> = done
                .iter()
                .enumerate()
                .map(|(k, r)| (name(k), pick(r).and_then(|rep| rep.staircase(m))))
                .collect();
            out.write(
                &format!("sweep_staircase_{}{}.csv", m.name(), suffix),
                render_staircase_table(&series).as_bytes(),
            )?;
            let cells: Vec<PanelCell<'_>> = series
                .iter()
                .enumerate()
                .map(|(k, (_, s))| PanelCell {
                    row: configs[k].0,
                    col: configs[k].1,
                    title: title(k),
                    staircase: *s,
                })
                .collect();
            let heading = format!("{}{}", crate::report::metric_title(m), if suffix.is_empty() { "" } else { " (anonymized)" });
            let svg = render_staircase_panel_svg(&heading, spatial.len(), temporal.len(), &cells, m == Metric::T);
            out.write(&format!("sweep_staircase_{}{}.svg", m.name(), suffix), svg.as_bytes())?;
        }
    }
    for r in done {
        out.absorb(r.out);
    }
    let config = effective_config(rc, None, noise);
    out.write_manifest("sweep", config, manifest_extra(rc, &loaded, None, noise.map(|n| n.seed)))?;
    Ok(())
}
