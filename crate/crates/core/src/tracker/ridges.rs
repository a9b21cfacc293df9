use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::image::GrayImage;
use crate::preprocess::{eigen_sym2, GradientField, HessianField};

/// Gradient magnitude below which a sample counts as a stationary point.
pub(crate) const FLAT_GRADIENT: f64 = 1e-8;
/// `lambda2` must be below `-CURVATURE`; `lambda1` must not exceed `+CURVATURE`.
pub(crate) const CURVATURE: f64 = 1e-6;

/// Integer ridge pixels with an occupancy grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeSet {
    pub width: usize,
    pub height: usize,
    /// Row-major order.
    pub points: Vec<Point2>,
    #[serde(skip)]
    occupancy: Vec<bool>,
}

impl RidgeSet {
    pub fn from_points(width: usize, height: usize, pixels: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut occupancy = vec![false; width * height];
        for (x, y) in pixels {
            occupancy[y * width + x] = true;
        }
        let points = (0..width * height)
            .filter(|&i| occupancy[i])
            .map(|i| Point2::new((i % width) as f64, (i / width) as f64))
            .collect();
        Self {
            width,
            height,
            points,
            occupancy,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn contains(&self, x: isize, y: isize) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.occupancy[y as usize * self.width + x as usize]
    }

    /// Ridge points within `radius` of `p`, row-major.
    pub fn within(&self, p: Point2, radius: f64) -> Vec<Point2> {
        let x0 = (p.x - radius).floor() as isize;
        let x1 = (p.x + radius).ceil() as isize;
        let y0 = (p.y - radius).floor() as isize;
        let y1 = (p.y + radius).ceil() as isize;
        let mut out = Vec::new();
        for y in y0..=y1 {
            for x in x0..=x1 {
                if self.contains(x, y) {
                    let q = Point2::new(x as f64, y as f64);
                    if q.distance(p) <= radius {
                        out.push(q);
                    }
                }
            }
        }
        out
    }

    /// Nearest ridge point to `p`; ties go to the smaller `(y, x)`.
    pub fn nearest(&self, p: Point2) -> Result<Point2> {
        self.points
            .iter()
            .copied()
            .min_by(|a, b| {
                a.distance_sq(p)
                    .total_cmp(&b.distance_sq(p))
                    .then(a.y.total_cmp(&b.y))
                    .then(a.x.total_cmp(&b.x))
            })
            .ok_or(Error::EmptyRidgeSet)
    }
}

/// Pixels where the gradient changes sign across one of the two diagonals of the
/// 2x2 cell anchored at the pixel and the Hessian is negative definite at all four
/// cell corners. Derivatives are Gaussian derivatives at scale `sigma`.
pub fn detect_ridges(img: &GrayImage, sigma: f64) -> RidgeSet {
    let (w, h) = (img.width(), img.height());
    let grad = GradientField::compute(img, sigma);
    let hess = HessianField::compute(img, sigma);
    let negative: Vec<bool> = (0..w * h)
        .map(|i| {
            let e = eigen_sym2(hess.xx[i], hess.xy[i], hess.yy[i]);
            e.lambda2 < -CURVATURE && e.lambda1 < CURVATURE
        })
        .collect();
    let flat = |g: (f64, f64)| g.0.hypot(g.1) < FLAT_GRADIENT;
    let opposed = |a: (f64, f64), b: (f64, f64)| flat(a) || flat(b) || a.0 * b.0 + a.1 * b.1 < 0.0;

    let mut pixels = Vec::new();
    for y in 0..h.saturating_sub(1) {
        for x in 0..w.saturating_sub(1) {
            let i = y * w + x;
            if !(negative[i] && negative[i + 1] && negative[i + w] && negative[i + w + 1]) {
                continue;
            }
            if opposed(grad.at(x, y), grad.at(x + 1, y + 1)) || opposed(grad.at(x + 1, y), grad.at(x, y + 1)) {
                pixels.push((x, y));
            }
        }
    }
    RidgeSet::from_points(w, h, pixels)
}
