//! Pixel-edge polygon tracing and GeoJSON export of label maps.
//!
//! Every region boundary is traced along pixel edges, with vertices on integer
//! pixel corners (`x` right, `y` down). Rings are walked with the region on the
//! right-hand side, which gives exteriors a positive shoelace area and holes a
//! negative one. Where two pixels of a region touch only at a corner the walk
//! turns toward the region, so 4-connectivity is preserved and rings never cross.

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::raster::LabelMap;

pub type Vertex = [i64; 2];

/// Closed ring: the first vertex is repeated at the end.
pub type Ring = Vec<Vertex>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Polygon {
    pub exterior: Ring,
    pub holes: Vec<Ring>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegionPolygons {
    pub label: u32,
    pub polygons: Vec<Polygon>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Dir {
    E,
    S,
    W,
    N,
}

impl Dir {
    fn delta(self) -> (i64, i64) {
        match self {
            Dir::E => (1, 0),
            Dir::S => (0, 1),
            Dir::W => (-1, 0),
            Dir::N => (0, -1),
        }
    }

    /// Clockwise on screen (y down).
    fn right(self) -> Dir {
        match self {
            Dir::E => Dir::S,
            Dir::S => Dir::W,
            Dir::W => Dir::N,
            Dir::N => Dir::E,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Edge {
    label: u32,
    y: i64,
    x: i64,
    dir: Dir,
}

impl Edge {
    fn end(&self) -> (i64, i64) {
        let (dx, dy) = self.dir.delta();
        (self.x + dx, self.y + dy)
    }

    /// Center of the pixel on the left of the edge (outside the region).
    fn outside_probe(&self) -> (f64, f64) {
        let (dx, dy) = self.dir.delta();
        let (mx, my) = (
            self.x as f64 + dx as f64 * 0.5,
            self.y as f64 + dy as f64 * 0.5,
        );
        (mx + dy as f64 * 0.5, my - dx as f64 * 0.5)
    }
}

fn boundary_edges(labels: &LabelMap) -> Vec<Edge> {
    let (h, w) = (labels.height(), labels.width());
    let mut edges = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let l = labels.get(x, y);
            let (xi, yi) = (x as i64, y as i64);
            if y == 0 || labels.get(x, y - 1) != l {
                edges.push(Edge {
                    label: l,
                    x: xi,
                    y: yi,
                    dir: Dir::E,
                });
            }
            if x + 1 == w || labels.get(x + 1, y) != l {
                edges.push(Edge {
                    label: l,
                    x: xi + 1,
                    y: yi,
                    dir: Dir::S,
                });
            }
            if y + 1 == h || labels.get(x, y + 1) != l {
                edges.push(Edge {
                    label: l,
                    x: xi + 1,
                    y: yi + 1,
                    dir: Dir::W,
                });
            }
            if x == 0 || labels.get(x - 1, y) != l {
                edges.push(Edge {
                    label: l,
                    x: xi,
                    y: yi + 1,
                    dir: Dir::N,
                });
            }
        }
    }
    edges.sort_unstable();
    edges
}

/// Twice the signed shoelace area.
fn area2(ring: &[Vertex]) -> i64 {
    ring.windows(2)
        .map(|p| p[0][0] * p[1][1] - p[1][0] * p[0][1])
        .sum()
}

/// Even-odd point-in-ring test; rings never pass through pixel centers.
fn contains(ring: &[Vertex], px: f64, py: f64) -> bool {
    let mut inside = false;
    for seg in ring.windows(2) {
        let ([x0, y0], [x1, y1]) = (seg[0], seg[1]);
        if x0 != x1 {
            continue;
        }
        let (lo, hi) = (y0.min(y1) as f64, y0.max(y1) as f64);
        if py > lo && py < hi && (x0 as f64) > px {
            inside = !inside;
        }
    }
    inside
}

struct TracedRing {
    label: u32,
    ring: Ring,
    probe: (f64, f64),
}

fn trace_rings(edges: &[Edge]) -> Vec<TracedRing> {
    let starting_at = |label: u32, (x, y): (i64, i64)| {
        let lo = edges.partition_point(|e| (e.label, e.y, e.x) < (label, y, x));
        let hi = edges.partition_point(|e| (e.label, e.y, e.x) <= (label, y, x));
        lo..hi
    };
    let mut used = vec![false; edges.len()];
    let mut rings = Vec::new();
    for first in 0..edges.len() {
        if used[first] {
            continue;
        }
        let mut cycle = Vec::new();
        let mut cur = first;
        loop {
            used[cur] = true;
            cycle.push(cur);
            let e = &edges[cur];
            let range = starting_at(e.label, e.end());
            let next = if range.len() == 1 {
                range.start
            } else {
                range
                    .clone()
                    .find(|&i| edges[i].dir == e.dir.right())
                    .expect("ambiguous corner has a right turn")
            };
            if used[next] {
                debug_assert_eq!(next, first);
                break;
            }
            cur = next;
        }
        let n = cycle.len();
        let mut ring: Ring = (0..n)
            .filter(|&k| edges[cycle[(k + n - 1) % n]].dir != edges[cycle[k]].dir)
            .map(|k| [edges[cycle[k]].x, edges[cycle[k]].y])
            .collect();
        let start = (0..ring.len())
            .min_by_key(|&i| (ring[i][1], ring[i][0]))
            .unwrap();
        ring.rotate_left(start);
        ring.push(ring[0]);
        rings.push(TracedRing {
            label: edges[first].label,
            ring,
            probe: edges[first].outside_probe(),
        });
    }
    rings
}

/// Traces every region of `labels`, sorted by label.
pub fn trace_region_polygons(labels: &LabelMap) -> Vec<RegionPolygons> {
    let edges = boundary_edges(labels);
    let rings = trace_rings(&edges);
    let mut out: Vec<RegionPolygons> = Vec::new();
    let mut start = 0;
    while start < rings.len() {
        let label = rings[start].label;
        let end = start
            + rings[start..]
                .iter()
                .take_while(|r| r.label == label)
                .count();
        let group = &rings[start..end];
        let mut polygons: Vec<Polygon> = group
            .iter()
            .filter(|r| area2(&r.ring) > 0)
            .map(|r| Polygon {
                exterior: r.ring.clone(),
                holes: Vec::new(),
            })
            .collect();
        for hole in group.iter().filter(|r| area2(&r.ring) < 0) {
            let (px, py) = hole.probe;
            let owner = polygons
                .iter()
                .enumerate()
                .filter(|(_, p)| contains(&p.exterior, px, py))
                .min_by_key(|(_, p)| area2(&p.exterior))
                .map(|(i, _)| i)
                .expect("every hole lies inside an exterior of its region");
            polygons[owner].holes.push(hole.ring.clone());
        }
        out.push(RegionPolygons { label, polygons });
        start = end;
    }
    out
}

/// Even-odd rasterization at pixel centers. Fails if regions overlap or leave gaps.
pub fn rasterize(regions: &[RegionPolygons], height: usize, width: usize) -> Result<LabelMap> {
    const UNSET: u32 = u32::MAX;
    let mut out = vec![UNSET; height * width];
    for region in regions {
        // (row, x) for every vertical edge crossing the row's center line
        let mut crossings: Vec<(i64, i64)> = Vec::new();
        for poly in &region.polygons {
            for ring in std::iter::once(&poly.exterior).chain(&poly.holes) {
                for seg in ring.windows(2) {
                    let ([x0, y0], [x1, y1]) = (seg[0], seg[1]);
                    if x0 == x1 {
                        for y in y0.min(y1)..y0.max(y1) {
                            crossings.push((y, x0));
                        }
                    }
                }
            }
        }
        crossings.sort_unstable();
        for row in crossings.chunk_by(|a, b| a.0 == b.0) {
            let y = row[0].0;
            if row.len() % 2 != 0 || y < 0 || y >= height as i64 {
                return Err(Error::InvalidParameter(format!(
                    "region {} has an open or out-of-bounds ring at row {y}",
                    region.label
                )));
            }
            for pair in row.chunks_exact(2) {
                let (x0, x1) = (pair[0].1.max(0), pair[1].1.min(width as i64));
                for x in x0..x1 {
                    let slot = &mut out[y as usize * width + x as usize];
                    if *slot != UNSET {
                        return Err(Error::InvalidParameter(format!(
                            "regions {} and {} overlap at ({x}, {y})",
                            *slot, region.label
                        )));
                    }
                    *slot = region.label;
                }
            }
        }
    }
    if let Some(i) = out.iter().position(|&l| l == UNSET) {
        return Err(Error::InvalidParameter(format!(
            "pixel ({}, {}) is not covered by any polygon",
            i % width,
            i / width
        )));
    }
    LabelMap::new(height, width, out)
}

fn ring_json(ring: &Ring) -> Value {
    Value::Array(ring.iter().map(|v| json!([v[0], v[1]])).collect())
}

fn polygon_json(p: &Polygon) -> Value {
    Value::Array(
        std::iter::once(&p.exterior)
            .chain(&p.holes)
            .map(ring_json)
            .collect(),
    )
}

/// GeoJSON FeatureCollection, one Feature per region with `{label, class}`
/// properties. Coordinates are pixel corners, y down.
pub fn to_geojson(regions: &[RegionPolygons], class_of: impl Fn(u32) -> Option<String>) -> Value {
    let features: Vec<Value> = regions
        .iter()
        .map(|r| {
            let geometry = if r.polygons.len() == 1 {
                json!({"type": "Polygon", "coordinates": polygon_json(&r.polygons[0])})
            } else {
                json!({
                    "type": "MultiPolygon",
                    "coordinates": r.polygons.iter().map(polygon_json).collect::<Vec<_>>(),
                })
            };
            json!({
                "type": "Feature",
                "properties": {"label": r.label, "class": class_of(r.label)},
                "geometry": geometry,
            })
        })
        .collect();
    json!({"type": "FeatureCollection", "features": features})
}

fn bad(msg: &str) -> Error {
    Error::InvalidParameter(format!("malformed GeoJSON: {msg}"))
}

fn parse_ring(v: &Value) -> Result<Ring> {
    v.as_array()
        .ok_or_else(|| bad("ring is not an array"))?
        .iter()
        .map(|p| {
            let xy = p
                .as_array()
                .filter(|a| a.len() == 2)
                .ok_or_else(|| bad("position"))?;
            let coord = |c: &Value| c.as_i64().ok_or_else(|| bad("non-integer coordinate"));
            Ok([coord(&xy[0])?, coord(&xy[1])?])
        })
        .collect()
}

fn parse_polygon(v: &Value) -> Result<Polygon> {
    let rings = v.as_array().ok_or_else(|| bad("polygon is not an array"))?;
    let mut rings = rings.iter().map(parse_ring);
    let exterior = rings.next().ok_or_else(|| bad("polygon without rings"))??;
    Ok(Polygon {
        exterior,
        holes: rings.collect::<Result<_>>()?,
    })
}

/// Reads back a FeatureCollection written by [`to_geojson`].
pub fn from_geojson(doc: &Value) -> Result<Vec<RegionPolygons>> {
    let features = doc["features"]
        .as_array()
        .ok_or_else(|| bad("missing features"))?;
    features
        .iter()
        .map(|f| {
            let label = f["properties"]["label"]
                .as_u64()
                .ok_or_else(|| bad("missing label"))? as u32;
            let coords = &f["geometry"]["coordinates"];
            let polygons = match f["geometry"]["type"].as_str() {
                Some("Polygon") => vec![parse_polygon(coords)?],
                Some("MultiPolygon") => coords
                    .as_array()
                    .ok_or_else(|| bad("coordinates"))?
                    .iter()
                    .map(parse_polygon)
                    .collect::<Result<_>>()?,
                _ => return Err(bad("unsupported geometry")),
            };
            Ok(RegionPolygons { label, polygons })
        })
        .collect()
}
