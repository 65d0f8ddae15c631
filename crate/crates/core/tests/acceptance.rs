//! Acceptance suite. Runs every criterion, prints one line per criterion and
//! exits non-zero if any fails.

mod common;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use chrono::{Duration, TimeZone, Utc};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use trajrisk::anonymize::{perturb, score_averaged, NoiseConfig, METERS_PER_DEGREE};
use trajrisk::areas::{AreaId, AreaSet, EquivalenceArea, GridCell, GridParams, Polygon};
use trajrisk::ingest::write_canonical;
use trajrisk::metrics::{score_area_set, MeanScores, ScoreOptions};
use trajrisk::model::{BBox, Coord, Dataset, TimeInterval, Timestamp};
use trajrisk::report::{diff_reports, render_area_geojson, render_report_json, render_staircase_csv, Metric, ScoreReport};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn day() -> Timestamp {
    Utc.with_ymd_and_hms(2009, 1, 5, 0, 0, 0).unwrap()
}

fn grid(bbox: BBox, size: f64, slot: Duration, origin: Timestamp, days: i64) -> AreaSet {
    AreaSet::build_grid(GridParams {
        bbox,
        spatial_size_deg: size,
        temporal_size: slot,
        time_range: TimeInterval::new(origin, origin + Duration::days(days)).unwrap(),
        time_origin: origin,
    })
    .unwrap()
}

fn canonical(d: &Dataset) -> Vec<u8> {
    let mut buf = Vec::new();
    write_canonical(d, &mut buf).unwrap();
    buf
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let instances = 60;
    let (mut grids, mut polygons) = (0, 0);
    for seed in 0..instances {
        let inst = common::random_instance(seed);
        ensure!(inst.dataset.len() <= 500 && inst.areas.len() <= 100, "seed {seed} exceeds instance limits");
        if inst.areas.grid().is_some() {
            grids += 1;
        } else {
            polygons += 1;
        }
        common::oracle::compare(&inst).map_err(|e| format!("seed {seed}: {e}"))?;
    }
    let elapsed = start.elapsed().as_secs_f64();
    ensure!(elapsed < 5.0, "took {elapsed:.2} s");
    Ok(format!("{instances} instances ({grids} grid, {polygons} polygon) in {elapsed:.2} s"))
}

fn metric_invariants() -> Outcome {
    let instances = 60;
    for seed in 0..instances {
        let inst = common::random_instance(seed);
        let s = common::oracle::engine_scores(&inst);
        let k_sum: usize = s.areas.values().map(|a| a.k).sum();
        ensure!(k_sum + s.unmatched_qi == inst.dataset.len(), "seed {seed}: sum k + unmatched_qi != n");
        for (id, a) in &s.areas {
            ensure!(a.l <= a.k, "seed {seed}: l > k in {id}");
            ensure!(a.t.is_none_or(|t| (0.0..=1.0).contains(&t)), "seed {seed}: t out of range in {id}");
        }
        for (id, t) in &s.trajectories {
            if let (Some(sk), Some(k)) = (t.strict_k, t.k) {
                ensure!(sk < k, "seed {seed}: strict_k {sk} >= k {k} for {id}");
            }
        }
        let opts = ScoreOptions { drop_self_loops: inst.drop_self_loops };
        let render = |d: &Dataset| {
            let s = score_area_set(d, &inst.areas, opts);
            render_report_json(&ScoreReport::new(MeanScores::from(&s), &inst.areas, json!({}))).unwrap()
        };
        ensure!(
            render(&inst.dataset) == render(&common::shuffled(&inst.dataset, seed + 1000)),
            "seed {seed}: report depends on input order"
        );
    }
    Ok(format!("{instances} instances, reports permutation-invariant"))
}

fn nested_monotonicity() -> Outcome {
    let pairs = [
        ((0.002, 5), (0.01, 30)),
        ((0.002, 5), (0.01, 5)),
        ((0.002, 5), (0.002, 30)),
        ((0.005, 10), (0.01, 30)),
        ((0.002, 10), (0.01, 10)),
    ];
    let (mut checked, mut grew) = (0usize, 0usize);
    for seed in 0..20 {
        let d = common::nyc_trips(2000, seed);
        for &((fs, fm), (cs, cm)) in &pairs {
            let fine = grid(BBox::NYC, fs, Duration::minutes(fm), day(), 2);
            let coarse = grid(BBox::NYC, cs, Duration::minutes(cm), day(), 2);
            let a = score_area_set(&d, &fine, ScoreOptions::default());
            let b = score_area_set(&d, &coarse, ScoreOptions::default());
            for (id, t) in &a.trajectories {
                let Some(k) = t.k else { continue };
                let c = b.trajectories[id].k;
                ensure!(c.is_some_and(|c| c >= k), "fixture {seed}, {fs}/{fm}m -> {cs}/{cm}m: {id} k {k} -> {c:?}");
                checked += 1;
                if c.unwrap() > k {
                    grew += 1;
                }
            }
        }
    }
    ensure!(grew > 0, "coarsening never raised k; fixtures are degenerate");
    Ok(format!("20 fixtures, {checked} trajectory checks, {grew} strict increases"))
}

fn fig2a_fixture() -> Outcome {
    let square = |x: f64| Polygon::rectangle(Coord::new(x, 0.0), Coord::new(x + 1.0, 1.0));
    let area = |id: &str, parts: Vec<Polygon>| EquivalenceArea {
        area_id: AreaId::new(id),
        spatial: parts,
        temporal: vec![TimeInterval::ALL],
        label: None,
    };
    let areas = AreaSet::from_areas(vec![
        area("home", vec![square(0.0), square(10.0)]),
        area("shop", vec![square(2.0)]),
        area("bank", vec![square(4.0)]),
        area("hospital", vec![square(6.0)]),
    ])
    .unwrap();
    let t = common::t0();
    let trip = |id: &str, from: f64, to: f64| common::trip(id, (from, 0.5), t, (to, 0.5), t + Duration::minutes(15));
    let d = common::dataset(vec![
        trip("a", 0.5, 2.5),
        trip("b", 0.3, 4.5),
        trip("c", 10.5, 6.5),
        trip("d", 0.7, 6.2),
    ]);
    let s = score_area_set(&d, &areas, ScoreOptions::default());
    let home = &s.areas[&AreaId::new("home")];
    ensure!(home.k == 4 && home.l == 3, "home has k={} l={}", home.k, home.l);
    let report = ScoreReport::new(MeanScores::from(&s), &areas, json!({}));
    let fc: Value = serde_json::from_str(&render_area_geojson(&report, &areas, Metric::L).unwrap()).unwrap();
    let f = fc["features"]
        .as_array()
        .unwrap()
        .iter()
        .find(|f| f["properties"]["area_id"] == "home")
        .ok_or("home missing from GeoJSON")?;
    ensure!(f["properties"]["k"] == 4.0 && f["properties"]["l"] == 3.0, "GeoJSON properties {}", f["properties"]);
    ensure!(f["geometry"]["type"] == "MultiPolygon", "home geometry is {}", f["geometry"]["type"]);
    Ok("k=4, l=3 (multi-part origin area)".into())
}

fn staircase_point() -> Outcome {
    // Ten trips: two alone in their origin area (k=1), three sharing one area,
    // five sharing another, so 20% have k < 3.
    let t = common::t0();
    let groups = [(0.5, 1), (2.5, 1), (4.5, 3), (6.5, 5)];
    let mut trips = Vec::new();
    for (x, n) in groups {
        for i in 0..n {
            trips.push(common::trip(&format!("x{x}_{i}"), (x, 0.5), t, (8.5, 0.5), t + Duration::minutes(10)));
        }
    }
    let areas = AreaSet::from_areas(
        (0..5)
            .map(|i| EquivalenceArea {
                area_id: AreaId::new(format!("a{i}")),
                spatial: vec![Polygon::rectangle(Coord::new(2.0 * i as f64, 0.0), Coord::new(2.0 * i as f64 + 1.0, 1.0))],
                temporal: vec![TimeInterval::ALL],
                label: None,
            })
            .collect(),
    )
    .unwrap();
    let s = score_area_set(&common::dataset(trips), &areas, ScoreOptions::default());
    let stairs = s.staircases.k.as_ref().ok_or("no k staircase")?;
    let csv = render_staircase_csv(stairs);
    ensure!(csv.lines().any(|l| l == "0.2,3"), "CSV has no 0.2,3 row:\n{csv}");
    ensure!(stairs.fraction_below(3.0) == 0.2, "fraction below 3 is {}", stairs.fraction_below(3.0));
    Ok("CDF point (0.2, 3) present".into())
}

/// Simpson's rule on [a, b] with `n` (even) intervals.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 }).sum();
    (f(a) + f(b) + inner) * h / 3.0
}

fn anonymizer() -> Outcome {
    let d = common::nyc_trips(5000, 3);
    let zero = NoiseConfig {
        sigma_space_m: 0.0,
        sigma_time: Duration::zero(),
        seed: 11,
        repetitions: 1,
    };
    let (same, _) = perturb(&d, &zero, 0);
    ensure!(same.trajectories() == d.trajectories(), "sigma 0 changed the data");
    ensure!(canonical(&same) == canonical(&d), "sigma 0 changed the CSV bytes");

    let cfg = NoiseConfig { seed: 11, ..NoiseConfig::default() };
    let (a, _) = perturb(&d, &cfg, 0);
    let (b, _) = perturb(&d, &cfg, 0);
    ensure!(canonical(&a) == canonical(&b), "same seed gave different output");
    let (c, _) = perturb(&d, &NoiseConfig { seed: 12, ..cfg }, 0);
    ensure!(canonical(&a) != canonical(&c), "different seeds gave the same output");

    let sigma = cfg.sigma_space_m;
    let closed = sigma * (PI / 2.0).sqrt();
    let density = |r: f64| r * r / (sigma * sigma) * (-r * r / (2.0 * sigma * sigma)).exp();
    let quad = simpson(density, 0.0, 12.0 * sigma, 20_000);
    ensure!((quad - closed).abs() < 1e-6 * closed, "quadrature {quad} vs closed form {closed}");

    let mut total = 0.0;
    let mut count = 0usize;
    for (o, p) in d.trajectories().iter().zip(a.trajectories()) {
        for (r, q) in o.records().iter().zip(p.records()) {
            let north = (q.s.lat - r.s.lat) * METERS_PER_DEGREE;
            let east = (q.s.lon - r.s.lon) * METERS_PER_DEGREE * r.s.lat.to_radians().cos();
            total += north.hypot(east);
            count += 1;
        }
    }
    ensure!(count == 10_000, "{count} records");
    let mean = total / count as f64;
    let rel = (mean - closed).abs() / closed;
    ensure!(rel < 0.02, "mean displacement {mean:.1} m vs {closed:.1} m");
    Ok(format!("identity and seeding hold; mean displacement {mean:.1} m vs {closed:.1} m ({:.2}%)", rel * 100.0))
}

fn diff_direction() -> Outcome {
    let size = 0.01;
    let areas = grid(BBox::NYC, size, Duration::days(1), day(), 1);
    let g = areas.grid().unwrap();
    let (col, row) = (60u64, 40u64);
    let center = Coord::new(
        BBox::NYC.lon_min + (col as f64 + 0.5) * size,
        BBox::NYC.lat_min + (row as f64 + 0.5) * size,
    );
    let t = common::t0();
    let mut r = common::rng(77);
    let tight = Normal::new(0.0, 0.0015).unwrap();
    let mut trips = Vec::new();
    let dest = |r: &mut rand_chacha::ChaCha8Rng| (center.lon + r.random_range(-0.05..0.05), center.lat + r.random_range(-0.05..0.05));
    for i in 0..300 {
        let o = (center.lon + tight.sample(&mut r), center.lat + tight.sample(&mut r));
        let dt = Duration::minutes(r.random_range(0..60));
        trips.push(common::trip(&format!("c{i}"), o, t + dt, dest(&mut r), t + dt + Duration::minutes(20)));
    }
    for i in 0..200 {
        let o = (center.lon + r.random_range(-0.035..0.035), center.lat + r.random_range(-0.035..0.035));
        let dt = Duration::minutes(r.random_range(0..60));
        trips.push(common::trip(&format!("b{i}"), o, t + dt, dest(&mut r), t + dt + Duration::minutes(20)));
    }
    let d = common::dataset(trips);
    let slot = g.cell_at(t, center).ok_or("center outside grid")?.slot;
    let center_id = g.id(GridCell { col, row, slot });
    let ring: Vec<AreaId> = (-1i64..=1)
        .flat_map(|dc| (-1i64..=1).map(move |dr| (dc, dr)))
        .filter(|&p| p != (0, 0))
        .map(|(dc, dr)| g.id(GridCell { col: (col as i64 + dc) as u64, row: (row as i64 + dr) as u64, slot }))
        .collect();

    let opts = ScoreOptions::default();
    let raw = ScoreReport::new(MeanScores::from(&score_area_set(&d, &areas, opts)), &areas, json!({}));
    let seeds = 10u64;
    let (mut center_sum, mut ring_sum) = (0.0, 0.0);
    let mut per_seed = BTreeMap::new();
    for seed in 0..seeds {
        let cfg = NoiseConfig {
            sigma_space_m: 500.0,
            sigma_time: Duration::zero(),
            seed,
            repetitions: 3,
        };
        let run = score_averaged(&d, &areas, &cfg, opts).map_err(|e| e.to_string())?;
        let anon = ScoreReport::new(run.scores, &areas, json!({}));
        let diff = diff_reports(&raw, &anon).map_err(|e| e.to_string())?;
        let dk = |id: &AreaId| diff.areas.get(id).and_then(|a| a.k).unwrap_or(0.0);
        let c = dk(&center_id);
        let ring_delta: f64 = ring.iter().map(dk).sum();
        per_seed.insert(seed, (c, ring_delta));
        center_sum += c;
        ring_sum += ring_delta;
    }
    let (c, rd) = (center_sum / seeds as f64, ring_sum / seeds as f64);
    ensure!(c < 0.0, "center k-delta {c:.2} is not negative ({per_seed:?})");
    ensure!(rd >= 0.0, "ring k-delta {rd:.2} is negative ({per_seed:?})");
    Ok(format!("mean over {seeds} seeds: center k-delta {c:.2}, ring k-delta {rd:.2}"))
}

fn sha_hex(path: &Path) -> String {
    hex::encode(Sha256::digest(std::fs::read(path).unwrap()))
}

fn protocol_run() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let input = dir.path().join("trips.csv");
    let mut csv = common::nyc_csv(10_000, 2009);
    csv.extend_from_slice(b"bad-1,2009-01-05 07:10:00,not-a-number,40.7,2009-01-05 07:30:00,-73.9,40.7\n");
    csv.extend_from_slice(b"bad-2,yesterday,-73.9,40.7,2009-01-05 07:30:00,-73.9,40.7\n");
    std::fs::write(&input, csv).map_err(|e| e.to_string())?;
    let out = dir.path().join("sweep");
    let args = [
        "trajrisk",
        "sweep",
        "--input",
        input.to_str().unwrap(),
        "--qi-window",
        "07:00..07:30",
        "--drop-self-loops",
        "--sigma-space",
        "500",
        "--sigma-time",
        "10m",
        "--repetitions",
        "3",
        "--seed",
        "2009",
        "--out",
        out.to_str().unwrap(),
    ];
    let start = Instant::now();
    let code = trajrisk::cli::main_with_args(args);
    let elapsed = start.elapsed().as_secs_f64();
    ensure!(code == 0, "sweep exited with {code}");
    ensure!(elapsed < 60.0, "sweep took {elapsed:.1} s");

    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let files = manifest["files"].as_object().ok_or("manifest has no file list")?;
    let mut expected = Vec::new();
    for s in ["0.002", "0.005", "0.01"] {
        for t in ["5", "10", "30"] {
            let sub = format!("s{s}_t{t}");
            for side in ["raw", "anonymized"] {
                for f in ["report.json", "trajectories.csv"] {
                    expected.push(format!("{sub}/{side}/{f}"));
                }
                for m in ["k", "l", "t"] {
                    expected.push(format!("{sub}/{side}/areas_{m}.geojson"));
                }
                for m in ["k", "l", "strict_k", "t"] {
                    expected.push(format!("{sub}/{side}/staircase_{m}.csv"));
                    expected.push(format!("{sub}/{side}/staircase_{m}.svg"));
                }
            }
            for m in ["k", "l", "t"] {
                expected.push(format!("{sub}/diff_{m}.geojson"));
            }
            expected.push(format!("{sub}/diff.json"));
        }
    }
    for m in ["k", "l", "strict_k", "t"] {
        for suffix in ["", "_anonymized"] {
            expected.push(format!("sweep_staircase_{m}{suffix}.csv"));
            expected.push(format!("sweep_staircase_{m}{suffix}.svg"));
        }
    }
    for f in &expected {
        let path = out.join(f);
        ensure!(path.exists(), "{f} missing");
        let listed = files.get(f).and_then(Value::as_str).ok_or_else(|| format!("{f} not in manifest"))?;
        ensure!(listed == sha_hex(&path), "{f} hash mismatch");
    }
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("s0.002_t5/anonymized/report.json")).unwrap()).unwrap();
    ensure!(report["runs"] == 3, "anonymized report averaged {} runs", report["runs"]);
    ensure!(report["parse"]["errors"] == 2, "parse errors {}", report["parse"]["errors"]);
    let kept = report["filter"]["kept_count"].as_u64().unwrap_or(0);
    ensure!(kept > 0 && kept < 10_000, "kept {kept} trips");
    Ok(format!("{} artifacts in {elapsed:.1} s, {kept} trips in the 07:00-07:30 window", expected.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("oracle equivalence", oracle_equivalence),
        ("metric invariants", metric_invariants),
        ("nested-grid monotonicity", nested_monotonicity),
        ("two-part origin fixture", fig2a_fixture),
        ("staircase semantics", staircase_point),
        ("anonymizer", anonymizer),
        ("perturbation diff direction", diff_direction),
        ("desk-scale protocol", protocol_run),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("criterion {} {name} ... PASS ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} {name} ... FAIL ({why})", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
