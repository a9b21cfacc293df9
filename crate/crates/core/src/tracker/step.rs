use std::f64::consts::TAU;

use super::{StepResult, Termination, TrackPoint, TrackerState};
use crate::config::Config;
use crate::contour::{nearest_pair, ray_hits, VesselContour};
use crate::error::{Error, Result};
use crate::geometry::{Direction2, Point2};
use crate::image::GrayImage;

/// Angular resolution of every search arc.
const ARC_STEP: f64 = std::f64::consts::PI / 180.0;

/// Best-scoring sample on the arc of `radius` around `center`, spanning
/// `theta0 +- half_width` at 1 degree steps. Ties go to the smaller deviation from
/// `theta0`, then to the negative side. Returns the point and its angle.
pub fn arc_argmax(
    center: Point2,
    radius: f64,
    theta0: f64,
    half_width: f64,
    mut score: impl FnMut(Point2) -> f64,
) -> (Point2, f64) {
    let n = (half_width / ARC_STEP).round() as i64;
    let mut best = (f64::NEG_INFINITY, center.polar_offset(radius, theta0), theta0);
    let order = std::iter::once(0).chain((1..=n).flat_map(|k| [-k, k]));
    for k in order {
        let theta = theta0 + k as f64 * ARC_STEP;
        let p = center.polar_offset(radius, theta);
        let s = score(p);
        if s > best.0 {
            best = (s, p, theta);
        }
    }
    (best.1, best.2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialDirections {
    pub forward: Direction2,
    pub backward: Direction2,
    pub p_plus: Point2,
    pub p_minus: Point2,
}

/// Brightest point on the full circle of radius `d` (ties to the smallest angle in
/// `[0, 2 pi)`), then the brightest point on the arc of half-width `delta_theta`
/// around the opposite direction.
pub fn initial_directions(img: &GrayImage, seed: Point2, cfg: &Config) -> Result<InitialDirections> {
    let d = cfg.search_radius_d;
    if !img.has_margin(seed, d) {
        return Err(Error::NearBorder {
            x: seed.x,
            y: seed.y,
            margin: d,
        });
    }
    let steps = (TAU / ARC_STEP).round() as usize;
    let mut best = (f64::NEG_INFINITY, seed, 0.0);
    for k in 0..steps {
        let theta = k as f64 * ARC_STEP;
        let p = seed.polar_offset(d, theta);
        let v = img.bilinear(p);
        if v > best.0 {
            best = (v, p, theta);
        }
    }
    let (_, p_plus, theta_plus) = best;
    let (p_minus, _) = arc_argmax(seed, d, theta_plus + std::f64::consts::PI, cfg.delta_theta, |p| img.bilinear(p));
    Ok(InitialDirections {
        forward: Direction2::between(seed, p_plus).expect("d > 0"),
        backward: Direction2::between(seed, p_minus).expect("d > 0"),
        p_plus,
        p_minus,
    })
}

/// Border, intensity-floor and crowding checks on a candidate point.
pub(crate) fn guard(img: &GrayImage, p: Point2, state: &TrackerState, cfg: &Config) -> Option<Termination> {
    if !img.has_margin(p, 1.0) {
        Some(Termination::Border)
    } else if img.bilinear(p) <= cfg.gray_floor_i0 {
        Some(Termination::LowIntensity)
    } else if state.n_p.at(p) >= cfg.crowd_tau_p {
        Some(Termination::Crowded)
    } else {
        None
    }
}

/// Searches the arc ahead of `prev` for the next point, maximizing `score`.
pub(crate) fn step_with(
    img: &GrayImage,
    prev: &TrackPoint,
    state: &mut TrackerState,
    cfg: &Config,
    score: impl FnMut(Point2) -> f64,
) -> StepResult {
    let d = cfg.search_radius_d;
    if !img.has_margin(prev.pos, d + 1.0) {
        return StepResult::Stop(Termination::Border);
    }
    let (cand, _) = arc_argmax(prev.pos, d, prev.dir.theta, cfg.delta_theta, score);
    if let Some(t) = guard(img, cand, state, cfg) {
        return StepResult::Stop(t);
    }
    state.n_p.mark(cand, cfg.neighborhood_radius_p);
    let dir = Direction2::between(prev.pos, cand).expect("d > 0");
    StepResult::Next(TrackPoint {
        pos: cand,
        raw_pos: cand,
        dir,
        index: prev.index + 1,
        adjusted: false,
    })
}

/// One intensity-guided tracking step. An accepted point is counted in `N_P`.
pub fn track_step(img: &GrayImage, prev: &TrackPoint, state: &mut TrackerState, cfg: &Config) -> StepResult {
    step_with(img, prev, state, cfg, |p| img.bilinear(p))
}

/// Midpoint of the nearest contour crossings on either side of `p` along the normal
/// of `dir`, if both exist and the midpoint is within `max_move` of `p`.
pub(crate) fn centered(p: Point2, dir: Direction2, contour: &VesselContour, max_move: f64) -> Option<Point2> {
    let hits = ray_hits(contour, p, dir.normal());
    let (g1, g2) = nearest_pair(&hits)?;
    let mid = g1.point.midpoint(g2.point);
    (mid.distance(p) <= max_move).then_some(mid)
}

/// Moves `tp` to the midpoint of the nearest contour crossings on either side along
/// its normal and re-aims its direction from `prev`. The point is left as found when
/// a side has no crossing, when the move exceeds `d`, or when the spacing to `prev`
/// would leave `[d / 2, 3 d / 2]`.
pub fn adjust_to_centerline(tp: &TrackPoint, prev: &TrackPoint, contour: &VesselContour, cfg: &Config) -> TrackPoint {
    let d = cfg.search_radius_d;
    let unadjusted = TrackPoint {
        pos: tp.raw_pos,
        adjusted: false,
        ..*tp
    };
    let Some(pos) = centered(tp.raw_pos, tp.dir, contour, d) else {
        return unadjusted;
    };
    let spacing = pos.distance(prev.pos);
    if spacing < 0.5 * d || spacing > 1.5 * d {
        return unadjusted;
    }
    TrackPoint {
        pos,
        raw_pos: tp.raw_pos,
        dir: Direction2::between(prev.pos, pos).unwrap_or(tp.dir),
        index: tp.index,
        adjusted: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contour::{Polygon, VesselContour};

    fn horizontal_tube(y0: f64, half: f64) -> GrayImage {
        GrayImage::from_fn(80, 60, |_, y| if (y as f64 - y0).abs() <= half { 200.0 } else { 0.0 })
    }

    #[test]
    fn arc_tie_breaks_toward_center_then_negative() {
        let (_, theta) = arc_argmax(Point2::new(0.0, 0.0), 5.0, 1.0, 0.1, |_| 1.0);
        assert_eq!(theta, 1.0);
        let (_, theta) = arc_argmax(Point2::new(0.0, 0.0), 5.0, 0.0, 0.2, |p| if p.y.abs() > 0.01 { 1.0 } else { 0.0 });
        assert!(theta < 0.0);
    }

    #[test]
    fn tube_initial_directions_are_axial() {
        let img = GrayImage::from_fn(80, 60, |x, y| {
            let v = 200.0 * (-((y as f64 - 30.0).powi(2)) / 8.0).exp();
            v + 0.01 * x as f64
        });
        let cfg = Config::default();
        let init = initial_directions(&img, Point2::new(40.0, 30.0), &cfg).unwrap();
        assert!(init.forward.theta.abs() < 5f64.to_radians());
        assert!((init.backward.theta.abs() - std::f64::consts::PI).abs() < 5f64.to_radians());
    }

    #[test]
    fn blob_tie_goes_to_smallest_angle() {
        let img = GrayImage::from_fn(40, 40, |x, y| {
            let r = (x as f64 - 20.0).hypot(y as f64 - 20.0);
            200.0 * (-r * r / 200.0).exp()
        });
        let init = initial_directions(&img, Point2::new(20.0, 20.0), &Config::default()).unwrap();
        assert!((init.forward.ux.hypot(init.forward.uy) - 1.0).abs() < 1e-12);
        assert!((init.backward.ux.hypot(init.backward.uy) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn near_border_seed_rejected() {
        let img = horizontal_tube(30.0, 2.0);
        assert!(matches!(
            initial_directions(&img, Point2::new(2.0, 30.0), &Config::default()),
            Err(Error::NearBorder { .. })
        ));
    }

    #[test]
    fn step_stays_on_axis() {
        let img = GrayImage::from_fn(80, 60, |_, y| 200.0 * (-((y as f64 - 30.0).powi(2)) / 8.0).exp());
        let cfg = Config::default();
        let mut state = TrackerState::new(80, 60);
        let prev = TrackPoint::new(Point2::new(30.0, 30.0), Direction2::from_angle(0.0), 0);
        let StepResult::Next(next) = track_step(&img, &prev, &mut state, &cfg) else {
            panic!("stopped");
        };
        assert!((next.pos.y - 30.0).abs() < 1e-9);
        assert!((next.pos.distance(prev.pos) - 5.0).abs() < 0.5);
        assert_eq!(state.n_p.at(next.pos), 1);
    }

    #[test]
    fn dark_arc_stops_low_intensity() {
        let img = GrayImage::from_fn(80, 60, |x, y| if x < 32 && (y as i64 - 30).abs() <= 2 { 200.0 } else { 5.0 });
        let prev = TrackPoint::new(Point2::new(30.0, 30.0), Direction2::from_angle(0.0), 0);
        let mut state = TrackerState::new(80, 60);
        assert_eq!(
            track_step(&img, &prev, &mut state, &Config::default()),
            StepResult::Stop(Termination::LowIntensity)
        );
    }

    #[test]
    fn crowded_region_stops() {
        let img = horizontal_tube(30.0, 2.0);
        let cfg = Config::default();
        let mut state = TrackerState::new(80, 60);
        for _ in 0..4 {
            state.n_p.mark(Point2::new(35.0, 30.0), cfg.neighborhood_radius_p);
        }
        let prev = TrackPoint::new(Point2::new(30.0, 30.0), Direction2::from_angle(0.0), 0);
        assert_eq!(track_step(&img, &prev, &mut state, &cfg), StepResult::Stop(Termination::Crowded));
    }

    fn band_contour(y_top: f64, y_bottom: f64) -> VesselContour {
        let points = vec![
            Point2::new(0.0, y_top),
            Point2::new(0.0, y_bottom),
            Point2::new(80.0, y_bottom),
            Point2::new(80.0, y_top),
            Point2::new(0.0, y_top),
        ];
        VesselContour {
            polygons: vec![Polygon { outer: true, points }],
        }
    }

    #[test]
    fn adjustment_recenters() {
        let contour = band_contour(27.0, 33.0);
        let prev = TrackPoint::new(Point2::new(25.0, 30.0), Direction2::from_angle(0.0), 0);
        let raw = Point2::new(30.0, 32.0);
        let tp = TrackPoint::new(raw, Direction2::between(prev.pos, raw).unwrap(), 1);
        let out = adjust_to_centerline(&tp, &prev, &contour, &Config::default());
        assert!(out.adjusted);
        assert!((out.pos.y - 30.0).abs() < 0.5);
        assert_eq!(out.raw_pos, raw);
        let expect = Direction2::between(prev.pos, out.pos).unwrap();
        assert!((out.dir.theta - expect.theta).abs() < 1e-12);
    }

    #[test]
    fn adjustment_skips_without_hits() {
        let contour = band_contour(27.0, 33.0);
        let prev = TrackPoint::new(Point2::new(25.0, 50.0), Direction2::from_angle(0.0), 0);
        let tp = TrackPoint::new(Point2::new(30.0, 50.0), Direction2::from_angle(0.0), 1);
        let out = adjust_to_centerline(&tp, &prev, &contour, &Config::default());
        assert!(!out.adjusted);
        assert_eq!(out.pos, tp.raw_pos);
    }
}
