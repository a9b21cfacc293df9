//! Closed polygons and line intersection queries.

use serde::{Deserialize, Serialize};

use crate::geometry::{Direction2, Point2};

/// Closed polyline (`first == last`). Outer boundaries have positive signed area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub outer: bool,
    pub points: Vec<Point2>,
}

impl Polygon {
    pub fn edges(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        self.points.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn perimeter(&self) -> f64 {
        self.edges().map(|(a, b)| a.distance(b)).sum()
    }

    /// Even-odd point containment.
    pub fn contains(&self, p: Point2) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    fn bbox(&self) -> (Point2, Point2) {
        let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.points {
            lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        (lo, hi)
    }
}

/// Shoelace signed area of a closed polyline.
pub fn signed_area(points: &[Point2]) -> f64 {
    0.5 * points.windows(2).map(|w| w[0].cross(w[1])).sum::<f64>()
}

/// All contour polygons of a segmentation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VesselContour {
    pub polygons: Vec<Polygon>,
}

impl VesselContour {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("contour serializes")
    }

    /// Even-odd containment over all polygons.
    pub fn contains(&self, p: Point2) -> bool {
        self.polygons.iter().filter(|poly| poly.contains(p)).count() % 2 == 1
    }

    pub fn vertex_count(&self) -> usize {
        self.polygons.iter().map(|p| p.points.len()).sum()
    }
}

/// One line/contour intersection, `t` being the signed distance from the origin
/// along the direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub t: f64,
    pub point: Point2,
}

const PERTURB: f64 = 1e-6;
const MAX_RETRIES: usize = 3;

enum Pass {
    Clean(Vec<RayHit>),
    /// Passed exactly through a vertex of, or along, this edge.
    Grazed(Point2, Point2),
}

fn intersect(contour: &VesselContour, origin: Point2, u: Point2, half_open: bool) -> Pass {
    let side = |p: Point2| u.cross(p - origin);
    let mut hits = Vec::new();
    for poly in &contour.polygons {
        let (lo, hi) = poly.bbox();
        let corners = [lo, Point2::new(hi.x, lo.y), hi, Point2::new(lo.x, hi.y)];
        let s: Vec<f64> = corners.iter().map(|&c| side(c)).collect();
        if s.iter().all(|&v| v > 0.0) || s.iter().all(|&v| v < 0.0) {
            continue;
        }
        for (a, b) in poly.edges() {
            let (sa, sb) = (side(a), side(b));
            if sa == 0.0 || sb == 0.0 {
                if !half_open {
                    return Pass::Grazed(a, b);
                }
                if sa == 0.0 && sb == 0.0 {
                    for p in [a, b] {
                        hits.push(RayHit { t: u.dot(p - origin), point: p });
                    }
                    continue;
                }
            }
            // half-open rule: a vertex on the line counts as lying on the positive side
            if (sa >= 0.0) != (sb >= 0.0) {
                let point = a + (b - a) * (sa / (sa - sb));
                hits.push(RayHit { t: u.dot(point - origin), point });
            }
        }
    }
    Pass::Clean(hits)
}

/// Intersections of the full line through `origin` along `dir` with every contour
/// edge, sorted by signed distance.
///
/// A line through a vertex is moved by `1e-6` px along the normal of the offending
/// edge, up to three times; after that vertices on the line count as lying on its
/// positive side and collinear edges contribute both endpoints.
pub fn ray_hits(contour: &VesselContour, origin: Point2, dir: Direction2) -> Vec<RayHit> {
    let u = dir.as_vector();
    let mut o = origin;
    let mut retries = 0;
    let mut hits = loop {
        match intersect(contour, o, u, retries == MAX_RETRIES) {
            Pass::Clean(h) => break h,
            Pass::Grazed(a, b) => {
                let n = Direction2::between(a, b).map_or(dir.normal(), |e| e.normal());
                o = o + n.as_vector() * PERTURB;
                retries += 1;
            }
        }
    };
    for h in &mut hits {
        h.t = u.dot(h.point - origin);
    }
    hits.sort_by(|a, b| a.t.total_cmp(&b.t));
    hits.dedup_by(|a, b| a.point.distance(b.point) < 1e-12);
    hits
}

pub fn ray_contour_intersections(contour: &VesselContour, origin: Point2, dir: Direction2) -> Vec<Point2> {
    ray_hits(contour, origin, dir).into_iter().map(|h| h.point).collect()
}

/// Nearest hit on the negative side and nearest on the positive side of the origin.
pub fn nearest_pair(hits: &[RayHit]) -> Option<(RayHit, RayHit)> {
    let neg = hits.iter().filter(|h| h.t < 0.0).max_by(|a, b| a.t.total_cmp(&b.t))?;
    let pos = hits.iter().filter(|h| h.t > 0.0).min_by(|a, b| a.t.total_cmp(&b.t))?;
    Some((*neg, *pos))
}
