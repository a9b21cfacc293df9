//! Ridge detection and adaptive geometrical vessel tracking.

mod bifurcation;
mod ridges;
mod step;
mod tree;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

pub use bifurcation::detect_bifurcation;
pub use ridges::{detect_ridges, RidgeSet};
pub use step::{adjust_to_centerline, arc_argmax, initial_directions, track_step, InitialDirections};
pub use tree::{split_segments, track_tree, track_tree_with_state};
pub(crate) use step::step_with;
pub(crate) use tree::start_point;

use crate::geometry::{Direction2, Point2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    /// Position after centerline adjustment.
    pub pos: Point2,
    /// Position found by the arc search.
    pub raw_pos: Point2,
    pub dir: Direction2,
    pub index: usize,
    /// Whether the contour adjustment moved this point.
    pub adjusted: bool,
}

impl TrackPoint {
    pub fn new(pos: Point2, dir: Direction2, index: usize) -> Self {
        Self {
            pos,
            raw_pos: pos,
            dir,
            index,
            adjusted: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutoffKind {
    Bifurcation,
    Termination,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cutoff {
    pub ordinal: usize,
    pub kind: CutoffKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackDirection {
    Forward,
    Backward,
    /// Backward pass reversed and joined to the forward pass.
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: Point2,
    pub direction: TrackDirection,
    /// Track and ordinal at which this branch was detected.
    pub parent: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterlineTrack {
    pub points: Vec<TrackPoint>,
    pub cutoffs: Vec<Cutoff>,
    pub provenance: Provenance,
}

impl CenterlineTrack {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("track serializes")
    }

    pub fn arc_length(&self) -> f64 {
        self.points.windows(2).map(|w| w[0].pos.distance(w[1].pos)).sum()
    }
}

/// Why a tracking pass stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    LowIntensity,
    Crowded,
    Border,
    /// Reached an earlier track.
    Joined,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepResult {
    Next(TrackPoint),
    Stop(Termination),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchSeed {
    pub pos: Point2,
    pub dir: Direction2,
    pub parent: Option<(usize, usize)>,
}

/// Pixel counter incremented over a disc around each recorded point.
#[derive(Debug, Clone, PartialEq)]
pub struct CounterField {
    pub width: usize,
    pub height: usize,
    pub counts: Vec<u32>,
}

impl CounterField {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            counts: vec![0; width * height],
        }
    }

    /// Count at the pixel nearest to `p`; zero outside the image.
    pub fn at(&self, p: Point2) -> u32 {
        let (x, y) = p.round();
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            return 0;
        }
        self.counts[y as usize * self.width + x as usize]
    }

    /// Increments every pixel center within `radius` of `p`.
    pub fn mark(&mut self, p: Point2, radius: f64) {
        let x0 = (p.x - radius).ceil().max(0.0) as usize;
        let y0 = (p.y - radius).ceil().max(0.0) as usize;
        let x1 = ((p.x + radius).floor().max(-1.0) + 1.0).min(self.width as f64) as usize;
        let y1 = ((p.y + radius).floor().max(-1.0) + 1.0).min(self.height as f64) as usize;
        let r2 = radius * radius;
        for y in y0..y1 {
            for x in x0..x1 {
                if Point2::new(x as f64, y as f64).distance_sq(p) <= r2 {
                    self.counts[y * self.width + x] += 1;
                }
            }
        }
    }
}

/// Mutable bookkeeping of one whole-image tracking session.
#[derive(Debug, Clone)]
pub struct TrackerState {
    /// Tracked points around each pixel.
    pub n_p: CounterField,
    /// Detected bifurcations around each pixel.
    pub n_b: CounterField,
    pub queue: VecDeque<BranchSeed>,
}

impl TrackerState {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            n_p: CounterField::new(width, height),
            n_b: CounterField::new(width, height),
            queue: VecDeque::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mark_covers_a_disc() {
        let mut f = CounterField::new(20, 20);
        f.mark(Point2::new(10.0, 10.0), 2.0);
        assert_eq!(f.counts.iter().filter(|&&c| c == 1).count(), 13);
        assert_eq!(f.at(Point2::new(12.0, 10.0)), 1);
        assert_eq!(f.at(Point2::new(12.0, 12.0)), 0);
        f.mark(Point2::new(0.0, 0.0), 3.0);
        assert_eq!(f.at(Point2::new(0.4, 0.4)), 1);
        assert_eq!(f.at(Point2::new(-5.0, 0.0)), 0);
    }
}
