//! Synthetic data shared by the integration tests.
#![allow(dead_code)]

pub mod oracle;

use chrono::{Duration, TimeZone, Utc};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use trajrisk::areas::{AreaId, AreaSet, EquivalenceArea, GridParams, Polygon};
use trajrisk::model::{BBox, Coord, Dataset, Record, TimeInterval, Timestamp, Trajectory};

pub use oracle::{AreaSpec, Instance};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn t0() -> Timestamp {
    Utc.with_ymd_and_hms(2009, 1, 5, 7, 0, 0).unwrap()
}

pub fn trip(id: &str, a: (f64, f64), ta: Timestamp, b: (f64, f64), tb: Timestamp) -> Trajectory {
    Trajectory::new(
        id,
        vec![
            Record::new(ta, Coord::new(a.0, a.1), id),
            Record::new(tb, Coord::new(b.0, b.1), id),
        ],
    )
    .unwrap()
}

pub fn dataset(trips: Vec<Trajectory>) -> Dataset {
    Dataset::new(trips, "synthetic").unwrap()
}

/// Trips between random points; a share of points sit on lattice lines so that
/// edges and corners get exercised.
fn random_trips(r: &mut ChaCha8Rng, n: usize, lo: (f64, f64), hi: (f64, f64), lattice: f64, minutes: i64) -> Dataset {
    let point = |r: &mut ChaCha8Rng| {
        let mut p = (r.random_range(lo.0..hi.0), r.random_range(lo.1..hi.1));
        if r.random_bool(0.2) {
            p.0 = (p.0 / lattice).round() * lattice;
        }
        if r.random_bool(0.2) {
            p.1 = (p.1 / lattice).round() * lattice;
        }
        p
    };
    let trips = (0..n)
        .map(|i| {
            let ta = t0() + Duration::seconds(r.random_range(0..minutes * 60));
            let tb = ta + Duration::seconds(r.random_range(60..3600));
            let (a, b) = (point(r), point(r));
            trip(&format!("tr{i:04}"), a, ta, b, tb)
        })
        .collect();
    dataset(trips)
}

fn grid_instance(r: &mut ChaCha8Rng, n: usize) -> Instance {
    let size = *[0.25, 0.5, 1.0].choose(r).unwrap();
    let cols = r.random_range(1..=4u64);
    let rows = r.random_range(1..=4u64);
    let slots = r.random_range(1..=4u64);
    let slot_secs = *[300i64, 600, 1800].choose(r).unwrap();
    let lon_min = r.random_range(-8..8) as f64 * 0.25;
    let lat_min = r.random_range(-8..8) as f64 * 0.25;
    // Some widths are not whole multiples of the cell size, so edge cells are clipped.
    let width = cols as f64 * size - if r.random_bool(0.3) { size / 2.0 } else { 0.0 };
    let height = rows as f64 * size;
    let origin = t0() - Duration::seconds(slot_secs * r.random_range(0..3));
    let range = TimeInterval::new(origin, origin + Duration::seconds(slot_secs * slots as i64)).unwrap();
    let bbox = BBox::new(lon_min, lat_min, lon_min + width, lat_min + height).unwrap();
    let params = GridParams {
        bbox,
        spatial_size_deg: size,
        temporal_size: Duration::seconds(slot_secs),
        time_range: range,
        time_origin: origin,
    };
    let minutes = (slot_secs * slots as i64) / 60 + 20;
    let d = random_trips(
        r,
        n,
        (lon_min - size, lat_min - size),
        (lon_min + width + size, lat_min + height + size),
        size,
        minutes,
    );
    Instance {
        dataset: d,
        drop_self_loops: false,
        areas: AreaSet::build_grid(params).unwrap(),
        spec: AreaSpec::Grid {
            lon_min,
            lat_min,
            lon_max: lon_min + width,
            lat_max: lat_min + height,
            size,
            origin,
            slot_secs,
            range: (range.start, range.end),
        },
    }
}

fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Vec<(f64, f64)> {
    vec![(x0, y0), (x1, y0), (x1, y1), (x0, y1), (x0, y0)]
}

fn polygon_instance(r: &mut ChaCha8Rng, n: usize) -> Instance {
    let count = r.random_range(1..=100usize);
    let extent = 10.0;
    let mut specs = Vec::with_capacity(count);
    for i in 0..count {
        let kind = r.random_range(0..10);
        let corner = |r: &mut ChaCha8Rng| (r.random_range(0..36) as f64 * 0.25, r.random_range(0..36) as f64 * 0.25);
        let parts: Vec<Vec<Vec<(f64, f64)>>> = if kind < 6 {
            let (x0, y0) = corner(r);
            let (w, h) = (r.random_range(1..8) as f64 * 0.25, r.random_range(1..8) as f64 * 0.25);
            vec![vec![rect(x0, y0, x0 + w, y0 + h)]]
        } else if kind < 8 {
            loop {
                let p: Vec<(f64, f64)> = (0..3).map(|_| (r.random_range(0.0..extent), r.random_range(0.0..extent))).collect();
                let area = (p[1].0 - p[0].0) * (p[2].1 - p[0].1) - (p[2].0 - p[0].0) * (p[1].1 - p[0].1);
                if area.abs() > 0.5 {
                    break vec![vec![vec![p[0], p[1], p[2], p[0]]]];
                }
            }
        } else if kind < 9 {
            // Two separated rectangles as one area.
            let (x0, y0) = corner(r);
            let w = r.random_range(1..4) as f64 * 0.25;
            vec![
                vec![rect(x0, y0, x0 + w, y0 + w)],
                vec![rect(x0 + 2.0 * w, y0, x0 + 3.0 * w, y0 + w)],
            ]
        } else {
            // Square with a square hole.
            let (x0, y0) = corner(r);
            vec![vec![rect(x0, y0, x0 + 1.0, y0 + 1.0), rect(x0 + 0.25, y0 + 0.25, x0 + 0.75, y0 + 0.75)]]
        };
        let windows = if r.random_bool(0.6) {
            vec![(TimeInterval::ALL.start, TimeInterval::ALL.end)]
        } else {
            let a = r.random_range(0..60i64);
            let b = a + r.random_range(5..60i64);
            let mut w = vec![(t0() + Duration::minutes(a), t0() + Duration::minutes(b))];
            if r.random_bool(0.5) {
                w.push((t0() + Duration::minutes(b + 10), t0() + Duration::minutes(b + 40)));
            }
            w
        };
        specs.push((format!("a{i:03}"), parts, windows));
    }
    let areas = specs
        .iter()
        .map(|(id, parts, windows)| EquivalenceArea {
            area_id: AreaId::new(id.clone()),
            spatial: parts
                .iter()
                .map(|rings| {
                    Polygon::new(
                        rings
                            .iter()
                            .map(|ring| ring.iter().map(|&(x, y)| Coord::new(x, y)).collect())
                            .collect(),
                    )
                    .unwrap()
                })
                .collect(),
            temporal: windows.iter().map(|&(a, b)| TimeInterval { start: a, end: b }).collect(),
            label: None,
        })
        .collect();
    let d = random_trips(r, n, (-0.5, -0.5), (extent + 0.5, extent + 0.5), 0.25, 120);
    Instance {
        dataset: d,
        drop_self_loops: false,
        areas: AreaSet::from_areas(areas).unwrap(),
        spec: AreaSpec::Polygons(specs),
    }
}

/// Randomized instance: up to 500 trajectories against up to 100 grid or polygon areas.
pub fn random_instance(seed: u64) -> Instance {
    let mut r = rng(seed);
    let n = r.random_range(0..=500usize);
    let mut inst = if seed % 2 == 0 {
        grid_instance(&mut r, n)
    } else {
        polygon_instance(&mut r, n)
    };
    inst.drop_self_loops = r.random_bool(0.5);
    inst
}

/// Trips drawn around a few Manhattan-ish hotspots, pickups spread over
/// 05:00–11:00 with a peak near 07:15. A few rows are deliberately bad: too
/// short, or outside the NYC box.
pub fn nyc_trips(n: usize, seed: u64) -> Dataset {
    let mut r = rng(seed);
    let hotspots = [
        (-73.985, 40.758, 0.006),
        (-73.990, 40.730, 0.008),
        (-73.975, 40.780, 0.010),
        (-73.870, 40.770, 0.004),
        (-73.780, 40.645, 0.004),
        (-73.950, 40.700, 0.020),
    ];
    let day = Utc.with_ymd_and_hms(2009, 1, 5, 0, 0, 0).unwrap();
    let peak = Normal::new(7.25 * 3600.0, 1.2 * 3600.0).unwrap();
    let trips = (0..n)
        .map(|i| {
            let place = |r: &mut ChaCha8Rng| {
                let (x, y, s) = hotspots[r.random_range(0..hotspots.len())];
                let g = Normal::new(0.0, s).unwrap();
                (x + g.sample(r), y + g.sample(r))
            };
            let a = place(&mut r);
            let mut b = place(&mut r);
            let secs = f64::clamp(peak.sample(&mut r), 5.0 * 3600.0, 11.0 * 3600.0 - 1.0) as i64;
            let ta = day + Duration::seconds(secs);
            let mut dur = r.random_range(180..2400);
            match i % 97 {
                0 => dur = 30,
                1 => b = (-75.2, 40.1),
                _ => {}
            }
            trip(&format!("{i}"), a, ta, b, ta + Duration::seconds(dur))
        })
        .collect();
    dataset(trips)
}

pub fn nyc_csv(n: usize, seed: u64) -> Vec<u8> {
    let mut buf = Vec::new();
    trajrisk::ingest::write_canonical(&nyc_trips(n, seed), &mut buf).unwrap();
    buf
}

/// Same trajectories in a shuffled order.
pub fn shuffled(d: &Dataset, seed: u64) -> Dataset {
    let mut t = d.trajectories().to_vec();
    t.shuffle(&mut rng(seed));
    Dataset::new(t, d.provenance.clone()).unwrap()
}
