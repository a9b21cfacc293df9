use super::{BranchSeed, RidgeSet, TrackPoint, TrackerState};
use crate::config::Config;
use crate::geometry::{angle_distance, Direction2, Point2};
use crate::image::GrayImage;

/// Searches the fan ring ahead of `current` for a ridge point that starts a side
/// branch. Among qualifying ridge points the brightest wins, then the nearest, then
/// the smaller `(y, x)`. A found branch is counted in `N_B` and queued.
pub fn detect_bifurcation(
    img: &GrayImage,
    ridges: &RidgeSet,
    current: &TrackPoint,
    prev: &TrackPoint,
    state: &mut TrackerState,
    cfg: &Config,
) -> Option<(Point2, Direction2)> {
    let pk = current.pos;
    let theta_k = current.dir.theta;
    let theta_prev = prev.dir.theta;
    let mut best: Option<(f64, f64, Point2)> = None;
    for p in ridges.within(pk, cfg.bif_r2) {
        let r = p.distance(pk);
        if r < cfg.bif_r1 || r <= cfg.min_branch_dist_d {
            continue;
        }
        let theta_b = (p.y - pk.y).atan2(p.x - pk.x);
        if angle_distance(theta_b, theta_k) > cfg.bif_delta_theta
            || angle_distance(theta_b, theta_k) <= cfg.tau_1
            || angle_distance(theta_b, theta_prev) <= cfg.tau_2
            || state.n_b.at(p) >= cfg.bif_crowd_tau_b
        {
            continue;
        }
        let v = img.bilinear(p);
        if v <= cfg.gray_floor_i0 {
            continue;
        }
        let better = match best {
            None => true,
            Some((bv, br, bp)) => v > bv || (v == bv && (r < br || (r == br && (p.y, p.x) < (bp.y, bp.x)))),
        };
        if better {
            best = Some((v, r, p));
        }
    }
    let (_, _, pb) = best?;
    let u = Direction2::between(pk, pb).expect("r > 0");
    state.n_b.mark(pb, cfg.neighborhood_radius_b);
    state.queue.push_back(BranchSeed {
        pos: pb,
        dir: u,
        parent: None,
    });
    Some((pb, u))
}
