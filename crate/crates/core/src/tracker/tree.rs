use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::step::{centered, guard};
use super::{
    detect_bifurcation, initial_directions, track_step, adjust_to_centerline, BranchSeed, CenterlineTrack, Cutoff,
    CutoffKind, Provenance, RidgeSet, StepResult, Termination, TrackDirection, TrackPoint, TrackerState,
};
use crate::config::Config;
use crate::contour::VesselContour;
use crate::error::{Error, Result};
use crate::geometry::{tls_direction, Direction2, Point2};
use crate::image::GrayImage;
use crate::quant::VesselSegment;

/// Bifurcation cutoffs closer than this many ordinals to the previous one in the same
/// pass are not recorded again; the branch is still queued.
const CUTOFF_MERGE: usize = 2;
/// Parent ordinals searched for the junction: this many back from the detection
/// point and one ahead.
const JUNCTION_WINDOW: usize = 6;
/// Branch points spanning the line extended back to the junction.
const JUNCTION_FIT: (usize, usize) = (3, 10);

/// Result of whole-tree tracking with its bookkeeping.
#[derive(Debug, Clone)]
pub struct TreeOutcome {
    pub tracks: Vec<CenterlineTrack>,
    pub state: TrackerState,
    pub seeds_used: usize,
    /// Ridge points eligible as seeds.
    pub candidates: usize,
    /// Eligible ridge points never reached by a track.
    pub unvisited: usize,
}

struct Pass {
    points: Vec<TrackPoint>,
    /// Local ordinals of recorded bifurcation cutoffs, and of every queued branch.
    cutoffs: Vec<usize>,
    branches: Vec<usize>,
    end: Option<Termination>,
    /// Track and ordinal where the pass joined an earlier track.
    joined: Option<(usize, usize)>,
}

fn run_pass(
    img: &GrayImage,
    ridges: &RidgeSet,
    contour: &VesselContour,
    cfg: &Config,
    state: &mut TrackerState,
    earlier: &[CenterlineTrack],
    start: TrackPoint,
) -> Pass {
    let mut pass = Pass {
        points: vec![start],
        cutoffs: Vec::new(),
        branches: Vec::new(),
        end: None,
        joined: None,
    };
    let max_points = img.width() * img.height();
    while pass.points.len() < max_points {
        let prev = *pass.points.last().expect("nonempty");
        let tp = match track_step(img, &prev, state, cfg) {
            StepResult::Stop(t) => {
                pass.end = Some(t);
                break;
            }
            StepResult::Next(tp) => adjust_to_centerline(&tp, &prev, contour, cfg),
        };
        pass.points.push(tp);
        let k = pass.points.len() - 1;
        if let Some((dist, t, j)) = nearest_on_tracks(tp.pos, earlier) {
            if dist <= 0.5 * cfg.search_radius_d {
                pass.end = Some(Termination::Joined);
                pass.joined = Some((t, j));
                break;
            }
        }
        if detect_bifurcation(img, ridges, &tp, &prev, state, cfg).is_some() {
            pass.branches.push(k);
            if pass.cutoffs.last().is_none_or(|&c| k - c > CUTOFF_MERGE) {
                pass.cutoffs.push(k);
            }
        }
    }
    pass
}

/// Starting point of a pass: the pixel moved onto the local centerline when the
/// contour allows it.
pub(crate) fn start_point(p: Point2, dir: Direction2, contour: &VesselContour, cfg: &Config) -> TrackPoint {
    let mut tp = TrackPoint::new(p, dir, 0);
    if let Some(c) = centered(p, dir, contour, cfg.search_radius_d) {
        tp.pos = c;
        tp.adjusted = true;
    }
    tp
}

/// Renumbers points, re-aims directions along the track order and builds cutoffs.
fn finish(mut points: Vec<TrackPoint>, bif: impl IntoIterator<Item = usize>, provenance: Provenance) -> CenterlineTrack {
    let n = points.len();
    for k in 0..n {
        points[k].index = k;
        if k > 0 {
            if let Some(d) = Direction2::between(points[k - 1].pos, points[k].pos) {
                points[k].dir = d;
            }
        }
    }
    if n > 1 {
        if let Some(d) = Direction2::between(points[0].pos, points[1].pos) {
            points[0].dir = d;
        }
    }
    let mut cutoffs = vec![Cutoff {
        ordinal: 0,
        kind: CutoffKind::Termination,
    }];
    let mut bif: Vec<usize> = bif.into_iter().filter(|&o| o > 0 && o + 1 < n).collect();
    bif.sort_unstable();
    bif.dedup();
    cutoffs.extend(bif.into_iter().map(|ordinal| Cutoff {
        ordinal,
        kind: CutoffKind::Bifurcation,
    }));
    if n > 1 {
        cutoffs.push(Cutoff {
            ordinal: n - 1,
            kind: CutoffKind::Termination,
        });
    }
    CenterlineTrack {
        points,
        cutoffs,
        provenance,
    }
}

/// Sets the parent reference of the branches queued since `queued_before`.
fn tag_branches(state: &mut TrackerState, queued_before: usize, track: usize, ordinals: &[usize]) {
    for (entry, &o) in state.queue.iter_mut().skip(queued_before).zip(ordinals) {
        entry.parent = Some((track, o));
    }
}

fn track_seed(
    img: &GrayImage,
    ridges: &RidgeSet,
    contour: &VesselContour,
    cfg: &Config,
    state: &mut TrackerState,
    earlier: &[CenterlineTrack],
    seed: Point2,
) -> Result<(CenterlineTrack, Vec<(usize, usize)>)> {
    let track_id = earlier.len();
    let init = initial_directions(img, seed, cfg)?;
    state.n_p.mark(seed, cfg.neighborhood_radius_p);
    let queued_before = state.queue.len();
    let start = start_point(seed, init.forward, contour, cfg);

    let fwd = run_pass(img, ridges, contour, cfg, state, earlier, start);
    let mut back_start = start;
    back_start.dir = init.backward;
    let bwd = run_pass(img, ridges, contour, cfg, state, earlier, back_start);
    let joins = fwd.joined.into_iter().chain(bwd.joined).collect();

    let nb = bwd.points.len() - 1;
    let mut points: Vec<TrackPoint> = bwd.points[1..].iter().rev().copied().collect();
    points.extend_from_slice(&fwd.points);
    let map_f = |k: usize| nb + k;
    let map_b = |k: usize| nb - k;
    let bif = fwd.cutoffs.iter().map(|&k| map_f(k)).chain(bwd.cutoffs.iter().map(|&k| map_b(k)));
    let ordinals: Vec<usize> = fwd
        .branches
        .iter()
        .map(|&k| map_f(k))
        .chain(bwd.branches.iter().map(|&k| map_b(k)))
        .collect();
    tag_branches(state, queued_before, track_id, &ordinals);
    let provenance = Provenance {
        seed,
        direction: TrackDirection::Both,
        parent: None,
    };
    Ok((finish(points, bif.collect::<Vec<_>>(), provenance), joins))
}

fn track_branch(
    img: &GrayImage,
    ridges: &RidgeSet,
    contour: &VesselContour,
    cfg: &Config,
    state: &mut TrackerState,
    earlier: &[CenterlineTrack],
    branch: BranchSeed,
) -> (CenterlineTrack, Option<(usize, usize)>) {
    let track_id = earlier.len();
    state.n_p.mark(branch.pos, cfg.neighborhood_radius_p);
    let queued_before = state.queue.len();
    let start = start_point(branch.pos, branch.dir, contour, cfg);
    let pass = run_pass(img, ridges, contour, cfg, state, earlier, start);
    tag_branches(state, queued_before, track_id, &pass.branches);
    let provenance = Provenance {
        seed: branch.pos,
        direction: TrackDirection::Forward,
        parent: branch.parent,
    };
    (finish(pass.points, pass.cutoffs, provenance), pass.joined)
}

/// Distance from `p` to the nearest polyline of `tracks`, with that track and the
/// ordinal of its point closest to `p`.
fn nearest_on_tracks(p: Point2, tracks: &[CenterlineTrack]) -> Option<(f64, usize, usize)> {
    let mut best: Option<(f64, usize, usize)> = None;
    for (ti, t) in tracks.iter().enumerate() {
        for (k, tp) in t.points.iter().enumerate() {
            let mut d = p.distance(tp.pos);
            let mut j = k;
            if let Some(next) = t.points.get(k + 1) {
                let (a, b) = (tp.pos, next.pos);
                let ab = b - a;
                let len2 = ab.dot(ab);
                if len2 > 0.0 {
                    let s = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
                    d = p.distance(a + ab * s);
                    j = if s > 0.5 { k + 1 } else { k };
                }
            }
            if best.is_none_or(|(bd, _, _)| d < bd) {
                best = Some((d, ti, j));
            }
        }
    }
    best
}

/// Bifurcation cutoffs backed by a tracked branch or a joining track, by track and
/// ordinal. Only unconfirmed cutoffs are ever removed.
type Confirmed = Vec<(usize, usize)>;

/// Adds a confirmed bifurcation cutoff at `ordinal` of track `t`, or confirms one
/// already within `CUTOFF_MERGE`. End points are never cut.
fn cut_at(tracks: &mut [CenterlineTrack], confirmed: &mut Confirmed, t: usize, ordinal: usize) {
    let track = &mut tracks[t];
    let n = track.points.len();
    if ordinal == 0 || ordinal + 1 >= n {
        return;
    }
    let near = track
        .cutoffs
        .iter()
        .filter(|c| c.kind == CutoffKind::Bifurcation && c.ordinal.abs_diff(ordinal) <= CUTOFF_MERGE)
        .min_by_key(|c| c.ordinal.abs_diff(ordinal));
    let at = match near {
        Some(c) => c.ordinal,
        None => {
            track.cutoffs.push(Cutoff {
                ordinal,
                kind: CutoffKind::Bifurcation,
            });
            track.cutoffs.sort_by_key(|c| c.ordinal);
            ordinal
        }
    };
    confirmed.push((t, at));
}

/// Moves the parent cutoff of a freshly tracked branch back to the junction and links
/// the branch to it. The junction is the parent point, near the detection ordinal and
/// behind the branch, closest to the line through the branch points
/// `JUNCTION_FIT.0..=JUNCTION_FIT.1`; the first few branch points can still lie where
/// the two vessels overlap.
fn attach_branch(tracks: &mut [CenterlineTrack], confirmed: &mut Confirmed, branch: &mut CenterlineTrack) -> bool {
    let Some((ti, o)) = branch.provenance.parent else {
        return false;
    };
    let last = branch.points.len() - 1;
    let (a, b) = (JUNCTION_FIT.0.min(last), JUNCTION_FIT.1.min(last));
    let (a, b) = if b - a < 2 { (0, last) } else { (a, b) };
    let fit: Vec<Point2> = branch.points[a..=b].iter().map(|p| p.pos).collect();
    let Some(mut u) = tls_direction(&fit) else {
        return false;
    };
    let start = fit[0];
    if (fit[fit.len() - 1] - start).dot(u.as_vector()) < 0.0 {
        u = u.reversed();
    }
    let parent = &mut tracks[ti];
    let n = parent.points.len();
    let lo = o.saturating_sub(JUNCTION_WINDOW).max(1);
    let hi = (o + 1).min(n.saturating_sub(2));
    let mut best: Option<(f64, usize)> = None;
    for j in lo..=hi {
        let v = parent.points[j].pos - start;
        let along = v.x * u.ux + v.y * u.uy;
        if along >= 0.0 {
            continue;
        }
        let off = (v.x * u.uy - v.y * u.ux).abs();
        if best.is_none_or(|(b, _)| off < b) {
            best = Some((off, j));
        }
    }
    let Some((_, j)) = best else {
        return false;
    };
    let detected = parent
        .cutoffs
        .iter()
        .filter(|c| c.kind == CutoffKind::Bifurcation && c.ordinal.abs_diff(o) <= CUTOFF_MERGE)
        .map(|c| c.ordinal)
        .find(|&c| !confirmed.contains(&(ti, c)));
    if let Some(c) = detected {
        parent.cutoffs.retain(|d| d.ordinal != c);
    }
    if parent.cutoffs.iter().all(|c| c.ordinal != j) {
        parent.cutoffs.push(Cutoff {
            ordinal: j,
            kind: CutoffKind::Bifurcation,
        });
        parent.cutoffs.sort_by_key(|c| c.ordinal);
    }
    confirmed.push((ti, j));
    let mut junction = parent.points[j];
    junction.adjusted = false;
    junction.raw_pos = junction.pos;
    let mut points = vec![junction];
    points.extend(branch.points.iter().copied());
    let bif: Vec<usize> = branch
        .cutoffs
        .iter()
        .filter(|c| c.kind == CutoffKind::Bifurcation)
        .map(|c| c.ordinal + 1)
        .collect();
    let provenance = Provenance {
        parent: Some((ti, j)),
        ..branch.provenance
    };
    *branch = finish(points, bif, provenance);
    true
}

/// Removes the cutoff of a queued branch that found no separate vessel: its point lies
/// on the track that detected it, or, near the start of a branch track, on that
/// track's parent.
fn drop_spurious_cutoff(tracks: &mut [CenterlineTrack], confirmed: &Confirmed, branch: BranchSeed, tol: f64) {
    let Some((tb, o)) = branch.parent else {
        return;
    };
    let on = |t: &CenterlineTrack| nearest_on_tracks(branch.pos, std::slice::from_ref(t)).is_some_and(|(d, _, _)| d <= tol);
    let own = on(&tracks[tb]);
    let sibling = o <= JUNCTION_WINDOW && tracks[tb].provenance.parent.is_some_and(|(tp, _)| on(&tracks[tp]));
    if own || sibling {
        tracks[tb].cutoffs.retain(|c| {
            c.kind != CutoffKind::Bifurcation || c.ordinal.abs_diff(o) > CUTOFF_MERGE || confirmed.contains(&(tb, c.ordinal))
        });
    }
}

/// Whole-tree tracking. Seeds are the ridge points bright enough to track, visited in
/// an order shuffled by `rng_seed`; each unvisited seed is tracked both ways and the
/// branches it queues are tracked forward, breadth first, unless they start on an
/// existing track. A branch starts from the junction on its parent. Stops when fewer than
/// `coverage_stop_fraction` of the seed candidates are unvisited or after
/// `seed_budget` seeds.
pub fn track_tree(img: &GrayImage, ridges: &RidgeSet, contour: &VesselContour, cfg: &Config) -> Result<Vec<CenterlineTrack>> {
    track_tree_with_state(img, ridges, contour, cfg).map(|o| o.tracks)
}

pub fn track_tree_with_state(
    img: &GrayImage,
    ridges: &RidgeSet,
    contour: &VesselContour,
    cfg: &Config,
) -> Result<TreeOutcome> {
    if ridges.is_empty() {
        return Err(Error::EmptyRidgeSet);
    }
    let mut state = TrackerState::new(img.width(), img.height());
    let mut candidates: Vec<Point2> = ridges
        .points
        .iter()
        .copied()
        .filter(|&p| img.has_margin(p, cfg.search_radius_d + 1.0) && guard(img, p, &state, cfg).is_none())
        .collect();
    if candidates.is_empty() {
        return Err(Error::EmptyRidgeSet);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    candidates.shuffle(&mut rng);
    let unvisited = |state: &TrackerState| candidates.iter().filter(|&&p| state.n_p.at(p) == 0).count();

    let mut tracks = Vec::new();
    let mut confirmed = Confirmed::new();
    let mut seeds_used = 0;
    for &seed in &candidates {
        if seeds_used >= cfg.seed_budget
            || (unvisited(&state) as f64) < cfg.coverage_stop_fraction * candidates.len() as f64
        {
            break;
        }
        if state.n_p.at(seed) > 0 {
            continue;
        }
        seeds_used += 1;
        let (track, joins) = track_seed(img, ridges, contour, cfg, &mut state, &tracks, seed)?;
        for (t, j) in joins {
            cut_at(&mut tracks, &mut confirmed, t, j);
        }
        if track.points.len() > 1 {
            tracks.push(track);
        }
        while let Some(branch) = state.queue.pop_front() {
            if !img.has_margin(branch.pos, cfg.search_radius_d + 1.0) {
                continue;
            }
            let tol = 0.5 * cfg.search_radius_d;
            if nearest_on_tracks(branch.pos, &tracks).is_some_and(|(d, _, _)| d <= tol) {
                drop_spurious_cutoff(&mut tracks, &confirmed, branch, tol);
                continue;
            }
            let (mut track, joined) = track_branch(img, ridges, contour, cfg, &mut state, &tracks, branch);
            if let Some((t, j)) = joined {
                cut_at(&mut tracks, &mut confirmed, t, j);
            }
            if track.points.len() > 1 {
                if attach_branch(&mut tracks, &mut confirmed, &mut track) {
                    let id = tracks.len();
                    for queued in state.queue.iter_mut() {
                        if let Some((t, o)) = queued.parent.as_mut() {
                            if *t == id {
                                *o += 1;
                            }
                        }
                    }
                }
                tracks.push(track);
            }
        }
    }
    let left = unvisited(&state);
    Ok(TreeOutcome {
        tracks,
        state,
        seeds_used,
        candidates: candidates.len(),
        unvisited: left,
    })
}

/// Splits every track at its cutoffs. Adjacent segments share their boundary point;
/// segments with fewer than `min_points` points are dropped.
pub fn split_segments(tracks: &[CenterlineTrack], min_points: usize) -> Vec<VesselSegment> {
    let mut out = Vec::new();
    for (ti, track) in tracks.iter().enumerate() {
        let n = track.points.len();
        if n == 0 {
            continue;
        }
        let mut bounds: Vec<usize> = track.cutoffs.iter().map(|c| c.ordinal).filter(|&o| o < n).collect();
        bounds.push(0);
        bounds.push(n - 1);
        bounds.sort_unstable();
        bounds.dedup();
        for w in bounds.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b + 1 - a >= min_points {
                out.push(VesselSegment::from_points(out.len(), track.points[a..=b].to_vec(), ti, [a, b]));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn straight(n: usize) -> Vec<TrackPoint> {
        (0..n)
            .map(|k| TrackPoint::new(Point2::new(5.0 * k as f64, 0.0), Direction2::from_angle(0.0), k))
            .collect()
    }

    fn prov() -> Provenance {
        Provenance {
            seed: Point2::new(0.0, 0.0),
            direction: TrackDirection::Both,
            parent: None,
        }
    }

    #[test]
    fn split_at_bifurcation() {
        let t = finish(straight(20), [8], prov());
        let segs = split_segments(&[t], 5);
        assert_eq!(segs.len(), 2);
        assert_eq!(segs[0].source_range, [0, 8]);
        assert_eq!(segs[1].source_range, [8, 19]);
    }

    #[test]
    fn no_cutoffs_gives_whole_track() {
        let t = finish(straight(12), [], prov());
        let segs = split_segments(&[t], 5);
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].points.len(), 12);
    }

    #[test]
    fn short_pieces_dropped() {
        let t = finish(straight(10), [2], prov());
        let segs = split_segments(&[t], 5);
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].source_range, [2, 9]);
    }

    #[test]
    fn finish_keeps_cutoffs_ordered() {
        let t = finish(straight(10), [0, 4, 4, 9, 6], prov());
        let ords: Vec<usize> = t.cutoffs.iter().map(|c| c.ordinal).collect();
        assert_eq!(ords, vec![0, 4, 6, 9]);
        assert!(t.points.iter().enumerate().all(|(k, p)| p.index == k));
    }

    #[test]
    fn blank_image_is_an_error() {
        let img = GrayImage::filled(50, 50, 0.0);
        let ridges = RidgeSet::from_points(50, 50, []);
        let r = track_tree(&img, &ridges, &VesselContour::default(), &Config::default());
        assert!(matches!(r, Err(Error::EmptyRidgeSet)));
    }
}
