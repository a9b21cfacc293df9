//! Planar points, unit directions and angle helpers.

use std::f64::consts::{PI, TAU};
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

/// Image-plane position: `x` is the column, `y` the row.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn distance(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    #[inline]
    pub fn distance_sq(self, other: Point2) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    #[inline]
    pub fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn midpoint(self, other: Point2) -> Point2 {
        Point2::new(0.5 * (self.x + other.x), 0.5 * (self.y + other.y))
    }

    /// Nearest pixel center.
    pub fn round(self) -> (isize, isize) {
        (self.x.round() as isize, self.y.round() as isize)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Point at `radius` along angle `theta` from `self`.
    #[inline]
    pub fn polar_offset(self, radius: f64, theta: f64) -> Point2 {
        Point2::new(self.x + radius * theta.cos(), self.y + radius * theta.sin())
    }
}

impl From<[f64; 2]> for Point2 {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, k: f64) -> Point2 {
        Point2::new(self.x * k, self.y * k)
    }
}

/// Unit vector with its cached angle `theta = atan2(uy, ux)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction2 {
    pub ux: f64,
    pub uy: f64,
    pub theta: f64,
}

impl Direction2 {
    pub fn from_angle(theta: f64) -> Self {
        let theta = wrap_pi(theta);
        Self {
            ux: theta.cos(),
            uy: theta.sin(),
            theta,
        }
    }

    /// Normalizes `v`; `None` for a (near) zero vector.
    pub fn from_vector(v: Point2) -> Option<Self> {
        let n = v.norm();
        if !(n > 1e-12) || !n.is_finite() {
            return None;
        }
        let (ux, uy) = (v.x / n, v.y / n);
        Some(Self {
            ux,
            uy,
            theta: uy.atan2(ux),
        })
    }

    /// Direction of `to - from`.
    pub fn between(from: Point2, to: Point2) -> Option<Self> {
        Self::from_vector(to - from)
    }

    pub fn as_vector(self) -> Point2 {
        Point2::new(self.ux, self.uy)
    }

    /// Rotated by +90 degrees.
    pub fn normal(self) -> Self {
        Self::from_angle(self.theta + PI / 2.0)
    }

    pub fn reversed(self) -> Self {
        Self::from_angle(self.theta + PI)
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_pi(theta: f64) -> f64 {
    let mut t = theta.rem_euclid(TAU);
    if t > PI {
        t -= TAU;
    }
    t
}

/// Circular distance between two angles, in `[0, pi]`.
pub fn angle_distance(a: f64, b: f64) -> f64 {
    wrap_pi(a - b).abs()
}

/// Orthogonal least-squares direction of a point set, unoriented.
pub fn tls_direction(points: &[Point2]) -> Option<Direction2> {
    let n = points.len() as f64;
    let cx = points.iter().map(|p| p.x).sum::<f64>() / n;
    let cy = points.iter().map(|p| p.y).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in points {
        let (dx, dy) = (p.x - cx, p.y - cy);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx + syy <= 0.0 {
        return None;
    }
    Some(Direction2::from_angle(0.5 * (2.0 * sxy).atan2(sxx - syy)))
}
