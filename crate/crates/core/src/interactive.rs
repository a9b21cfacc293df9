//! Segment extraction between two clicked points.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::contour::{nearest_pair, ray_hits, VesselContour};
use crate::error::{Error, Result};
use crate::geometry::{Direction2, Point2};
use crate::image::GrayImage;
use crate::quant::{find_stenoses, quantify, StenosisFinding, VesselSegment};
use crate::tracker::{
    adjust_to_centerline, initial_directions, start_point, step_with, RidgeSet, StepResult, TrackDirection, TrackPoint,
    TrackerState,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractiveRequest {
    pub start: Point2,
    pub end: Point2,
    /// Configuration keys applied on top of the context configuration.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub overrides: BTreeMap<String, String>,
}

impl InteractiveRequest {
    pub fn new(start: Point2, end: Point2) -> Self {
        Self {
            start,
            end,
            overrides: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteResult {
    /// Snapped start and end.
    pub start: Point2,
    pub end: Point2,
    pub route: Vec<TrackPoint>,
    pub chosen_direction: TrackDirection,
    pub segment: VesselSegment,
    pub findings: Vec<StenosisFinding>,
    /// Start and end snapped to the same place; the route is that single point.
    pub degenerate: bool,
}

/// Ridge point nearest to `click`, ties broken by `(y, x)`.
pub fn snap_to_ridge(click: Point2, ridges: &RidgeSet) -> Result<Point2> {
    ridges
        .points
        .iter()
        .copied()
        .min_by(|a, b| {
            a.distance_sq(click)
                .total_cmp(&b.distance_sq(click))
                .then(a.y.total_cmp(&b.y))
                .then(a.x.total_cmp(&b.x))
        })
        .ok_or(Error::EmptyRidgeSet)
}

/// `I(p) + lambda / sqrt(|p - p_end|)`; infinite at the endpoint itself.
pub fn energy(img: &GrayImage, p: Point2, p_end: Point2, lambda: f64) -> f64 {
    let d = p.distance(p_end);
    if d == 0.0 {
        return f64::INFINITY;
    }
    img.bilinear(p) + lambda / d.sqrt()
}

/// A candidate whose cross-section is this much wider than the previous point's
/// straddles a fork; it is kept where the search put it instead of being centered
/// between the outer walls of both branches.
const FORK_WIDENING: f64 = 1.5;

fn chord(p: Point2, dir: Direction2, contour: &VesselContour) -> Option<f64> {
    nearest_pair(&ray_hits(contour, p, dir.normal())).map(|(a, b)| a.point.distance(b.point))
}

/// Energy-guided pass from `start`; `Ok` when it came within `stop_tau_d` of `end`.
fn route_pass(
    img: &GrayImage,
    contour: &VesselContour,
    cfg: &Config,
    start: TrackPoint,
    end: Point2,
) -> std::result::Result<Vec<TrackPoint>, Vec<TrackPoint>> {
    let mut state = TrackerState::new(img.width(), img.height());
    state.n_p.mark(start.pos, cfg.neighborhood_radius_p);
    let mut points = vec![start];
    let max_points = img.width() * img.height();
    while points.len() < max_points {
        let prev = *points.last().expect("nonempty");
        let tp = match step_with(img, &prev, &mut state, cfg, |p| energy(img, p, end, cfg.energy_lambda)) {
            StepResult::Stop(_) => return Err(points),
            StepResult::Next(tp) => {
                let spans_fork = match (chord(tp.raw_pos, tp.dir, contour), chord(prev.pos, prev.dir, contour)) {
                    (Some(here), Some(before)) => here > FORK_WIDENING * before,
                    _ => false,
                };
                if spans_fork {
                    tp
                } else {
                    adjust_to_centerline(&tp, &prev, contour, cfg)
                }
            }
        };
        points.push(tp);
        if tp.pos.distance(end) < cfg.stop_tau_d {
            return Ok(points);
        }
    }
    Err(points)
}

fn analyze(route: Vec<TrackPoint>, contour: &VesselContour, cfg: &Config) -> (VesselSegment, Vec<StenosisFinding>) {
    let n = route.len();
    let segment = quantify(VesselSegment::from_points(0, route, 0, [0, n - 1]), contour, cfg);
    let findings = if n > 1 { find_stenoses(&segment, cfg) } else { Vec::new() };
    (segment, findings)
}

/// Tracks from the snapped start toward the snapped end in both initial directions
/// and keeps the route with fewer points among those that arrive.
pub fn track_segment(
    img: &GrayImage,
    ridges: &RidgeSet,
    contour: &VesselContour,
    req: &InteractiveRequest,
    cfg: &Config,
) -> Result<RouteResult> {
    let cfg = &cfg.with_overrides(req.overrides.iter().map(|(k, v)| (k.as_str(), v.as_str())))?;
    for p in [req.start, req.end] {
        let inside = p.x >= 0.0 && p.y >= 0.0 && p.x <= (img.width() - 1) as f64 && p.y <= (img.height() - 1) as f64;
        if !inside {
            return Err(Error::OutsideImage { x: p.x, y: p.y });
        }
    }
    let start = snap_to_ridge(req.start, ridges)?;
    let end = snap_to_ridge(req.end, ridges)?;
    if start == end {
        let (segment, findings) = analyze(vec![TrackPoint::new(start, Direction2::from_angle(0.0), 0)], contour, cfg);
        return Ok(RouteResult {
            start,
            end,
            route: segment.points.clone(),
            chosen_direction: TrackDirection::Forward,
            segment,
            findings,
            degenerate: true,
        });
    }
    let init = initial_directions(img, start, cfg)?;
    let forward = route_pass(img, contour, cfg, start_point(start, init.forward, contour, cfg), end);
    let backward = route_pass(img, contour, cfg, start_point(start, init.backward, contour, cfg), end);
    let (route, chosen_direction) = match (forward, backward) {
        (Ok(f), Ok(b)) if b.len() < f.len() => (b, TrackDirection::Backward),
        (Ok(f), _) => (f, TrackDirection::Forward),
        (Err(_), Ok(b)) => (b, TrackDirection::Backward),
        (Err(f), Err(b)) => return Err(Error::Unreachable { partial: vec![f, b] }),
    };
    let (segment, findings) = analyze(route, contour, cfg);
    Ok(RouteResult {
        start,
        end,
        route: segment.points.clone(),
        chosen_direction,
        segment,
        findings,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ridges(points: &[(usize, usize)]) -> RidgeSet {
        RidgeSet::from_points(20, 20, points.iter().copied())
    }

    #[test]
    fn snap_nearest_and_ties() {
        let r = ridges(&[(0, 0), (10, 10)]);
        assert_eq!(snap_to_ridge(Point2::new(1.0, 1.0), &r).unwrap(), Point2::new(0.0, 0.0));
        assert_eq!(snap_to_ridge(Point2::new(10.0, 10.0), &r).unwrap(), Point2::new(10.0, 10.0));
        let r = ridges(&[(0, 2), (2, 0)]);
        assert_eq!(snap_to_ridge(Point2::new(1.0, 1.0), &r).unwrap(), Point2::new(2.0, 0.0));
        assert!(matches!(snap_to_ridge(Point2::new(1.0, 1.0), &ridges(&[])), Err(Error::EmptyRidgeSet)));
    }

    #[test]
    fn energy_examples() {
        let img = GrayImage::from_fn(10, 10, |_, _| 100.0);
        let p = Point2::new(1.0, 1.0);
        assert_eq!(energy(&img, p, Point2::new(5.0, 1.0), 10000.0), 5100.0);
        assert_eq!(energy(&img, p, Point2::new(5.0, 1.0), 0.0), 100.0);
        assert_eq!(energy(&img, p, p, 10000.0), f64::INFINITY);
        let end = Point2::new(8.0, 1.0);
        assert!(energy(&img, Point2::new(4.0, 1.0), end, 1.0) > energy(&img, Point2::new(3.0, 1.0), end, 1.0));
    }
}
