//! Planar lon/lat polygon geometry.

use crate::model::Coord;

/// A polygon with an exterior ring and optional holes. Rings are closed
/// (first position repeated at the end).
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    rings: Vec<Vec<Coord>>,
    envelope: Envelope,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelope {
    pub min: Coord,
    pub max: Coord,
}

impl Envelope {
    pub fn contains(&self, c: Coord) -> bool {
        self.min.lon <= c.lon && c.lon <= self.max.lon && self.min.lat <= c.lat && c.lat <= self.max.lat
    }
}

impl Polygon {
    /// Validates ring closure, vertex counts and ring simplicity.
    pub fn new(rings: Vec<Vec<Coord>>) -> Result<Self, String> {
        if rings.is_empty() {
            return Err("polygon has no rings".into());
        }
        for (i, ring) in rings.iter().enumerate() {
            if ring.len() < 4 {
                return Err(format!("ring {i} has fewer than 4 positions"));
            }
            if ring.first() != ring.last() {
                return Err(format!("ring {i} is not closed"));
            }
            if ring.iter().any(|c| !c.lon.is_finite() || !c.lat.is_finite()) {
                return Err(format!("ring {i} has a non-finite coordinate"));
            }
        }
        let envelope = envelope_of(&rings[0]);
        let p = Self { rings, envelope };
        if let Some(i) = (0..p.rings.len()).find(|&i| !ring_is_simple(&p.rings[i])) {
            return Err(format!("ring {i} self-intersects"));
        }
        Ok(p)
    }

    /// Axis-aligned rectangle `[min, max]`.
    pub fn rectangle(min: Coord, max: Coord) -> Self {
        let ring = vec![
            min,
            Coord::new(max.lon, min.lat),
            max,
            Coord::new(min.lon, max.lat),
            min,
        ];
        Self {
            rings: vec![ring],
            envelope: Envelope { min, max },
        }
    }

    pub fn rings(&self) -> &[Vec<Coord>] {
        &self.rings
    }

    pub fn exterior(&self) -> &[Coord] {
        &self.rings[0]
    }

    pub fn envelope(&self) -> Envelope {
        self.envelope
    }

    /// Even-odd containment over all rings; points on any edge count as inside.
    pub fn contains(&self, c: Coord) -> bool {
        if !self.envelope.contains(c) {
            return false;
        }
        let mut inside = false;
        for ring in &self.rings {
            for w in ring.windows(2) {
                let (a, b) = (w[0], w[1]);
                if on_segment(c, a, b) {
                    return true;
                }
                if (a.lat > c.lat) != (b.lat > c.lat) {
                    let x = a.lon + (c.lat - a.lat) * (b.lon - a.lon) / (b.lat - a.lat);
                    if c.lon < x {
                        inside = !inside;
                    }
                }
            }
        }
        inside
    }
}

fn envelope_of(ring: &[Coord]) -> Envelope {
    let mut min = ring[0];
    let mut max = ring[0];
    for c in ring {
        min.lon = min.lon.min(c.lon);
        min.lat = min.lat.min(c.lat);
        max.lon = max.lon.max(c.lon);
        max.lat = max.lat.max(c.lat);
    }
    Envelope { min, max }
}

fn cross(o: Coord, a: Coord, b: Coord) -> f64 {
    (a.lon - o.lon) * (b.lat - o.lat) - (a.lat - o.lat) * (b.lon - o.lon)
}

fn within_box(c: Coord, a: Coord, b: Coord) -> bool {
    a.lon.min(b.lon) <= c.lon
        && c.lon <= a.lon.max(b.lon)
        && a.lat.min(b.lat) <= c.lat
        && c.lat <= a.lat.max(b.lat)
}

fn on_segment(c: Coord, a: Coord, b: Coord) -> bool {
    within_box(c, a, b) && cross(a, b, c) == 0.0
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// True when the closed segments `pq` and `rs` share at least one point.
pub(crate) fn segments_intersect(p: Coord, q: Coord, r: Coord, s: Coord) -> bool {
    let d1 = sign(cross(r, s, p));
    let d2 = sign(cross(r, s, q));
    let d3 = sign(cross(p, q, r));
    let d4 = sign(cross(p, q, s));
    if d1 * d2 < 0 && d3 * d4 < 0 {
        return true;
    }
    (d1 == 0 && within_box(p, r, s))
        || (d2 == 0 && within_box(q, r, s))
        || (d3 == 0 && within_box(r, p, q))
        || (d4 == 0 && within_box(s, p, q))
}

/// True when the open segments cross at a single interior point.
pub(crate) fn segments_cross(p: Coord, q: Coord, r: Coord, s: Coord) -> bool {
    let d1 = sign(cross(r, s, p));
    let d2 = sign(cross(r, s, q));
    let d3 = sign(cross(p, q, r));
    let d4 = sign(cross(p, q, s));
    d1 * d2 < 0 && d3 * d4 < 0
}

struct Edge {
    a: Coord,
    b: Coord,
    lo: f64,
    hi: f64,
    tag: usize,
    index: usize,
}

/// Candidate edge pairs whose x-extents overlap, found with a sort-and-sweep.
fn overlapping_pairs(edges: &mut [Edge], mut visit: impl FnMut(&Edge, &Edge) -> bool) -> bool {
    edges.sort_by(|x, y| x.lo.total_cmp(&y.lo));
    for i in 0..edges.len() {
        for j in i + 1..edges.len() {
            if edges[j].lo > edges[i].hi {
                break;
            }
            if !visit(&edges[i], &edges[j]) {
                return false;
            }
        }
    }
    true
}

fn edges_of(ring: &[Coord], tag: usize) -> impl Iterator<Item = Edge> + '_ {
    ring.windows(2).enumerate().map(move |(index, w)| Edge {
        a: w[0],
        b: w[1],
        lo: w[0].lon.min(w[1].lon),
        hi: w[0].lon.max(w[1].lon),
        tag,
        index,
    })
}

/// A closed ring is simple when non-adjacent edges never meet and adjacent
/// edges share only their common vertex.
pub(crate) fn ring_is_simple(ring: &[Coord]) -> bool {
    let n = ring.len() - 1;
    if (0..n).any(|i| ring[i] == ring[i + 1]) {
        return false;
    }
    let mut edges: Vec<Edge> = edges_of(ring, 0).collect();
    overlapping_pairs(&mut edges, |e, f| {
        let (i, j) = (e.index.min(f.index), e.index.max(f.index));
        let (first, second) = if e.index == i { (e, f) } else { (f, e) };
        if j == i + 1 {
            // first.b == second.a; the far endpoints must not touch the other edge
            !(on_segment(second.b, first.a, first.b) || on_segment(first.a, second.a, second.b))
        } else if i == 0 && j == n - 1 {
            // second.b == first.a
            !(on_segment(second.a, first.a, first.b) || on_segment(first.b, second.a, second.b))
        } else {
            !segments_intersect(e.a, e.b, f.a, f.b)
        }
    })
}

/// Parts of a multi-part area must have disjoint interiors: no edges crossing
/// between parts and no part nested inside another. Touching is allowed.
pub(crate) fn parts_are_disjoint(parts: &[Polygon]) -> bool {
    if parts.len() < 2 {
        return true;
    }
    let mut edges: Vec<Edge> = parts
        .iter()
        .enumerate()
        .flat_map(|(tag, p)| edges_of(p.exterior(), tag))
        .collect();
    let no_crossing = overlapping_pairs(&mut edges, |e, f| {
        e.tag == f.tag || !segments_cross(e.a, e.b, f.a, f.b)
    });
    if !no_crossing {
        return false;
    }
    for (i, p) in parts.iter().enumerate() {
        for (j, q) in parts.iter().enumerate() {
            if i != j && strictly_inside(q, p) {
                return false;
            }
        }
    }
    true
}

/// Some vertex of `inner` lies strictly inside `outer`'s exterior ring.
fn strictly_inside(inner: &Polygon, outer: &Polygon) -> bool {
    let ext = Polygon {
        rings: vec![outer.exterior().to_vec()],
        envelope: outer.envelope,
    };
    inner.exterior().iter().any(|&c| {
        let on_edge = outer.exterior().windows(2).any(|w| on_segment(c, w[0], w[1]));
        !on_edge && ext.contains(c)
    })
}
