//! Marching squares over a binary mask.
//!
//! Topology always comes from the mask, with diagonal (saddle) cells joining their
//! inside corners. Vertices sit on the grid edges between an inside and an outside
//! pixel center. For a bare mask they start at the edge midpoints and the staircase
//! is relaxed by a few low-pass (Taubin) passes; otherwise their position along the
//! edge comes from linear interpolation of a scalar field at a given level, falling
//! back to the midpoint where the field does not bracket the level.

use super::polygon::{signed_area, Polygon, VesselContour};
use super::VesselMask;
use crate::geometry::Point2;
use crate::image::GrayImage;

const T_MIN: f64 = 1e-3;
const TAUBIN_PASSES: usize = 4;
const TAUBIN_SHRINK: f64 = 0.5;
const TAUBIN_INFLATE: f64 = -0.53;

// Edges: 0 = top, 1 = right, 2 = bottom, 3 = left. Cell corners: a = top-left (bit 8),
// b = top-right (4), c = bottom-right (2), d = bottom-left (1). Segments keep the inside
// on their left in (x, y) coordinates, so outer boundaries have positive signed area.
const CASES: [&[(u8, u8)]; 16] = [
    &[],
    &[(3, 2)],
    &[(2, 1)],
    &[(3, 1)],
    &[(1, 0)],
    &[(3, 0), (1, 2)],
    &[(2, 0)],
    &[(3, 0)],
    &[(0, 3)],
    &[(0, 2)],
    &[(0, 1), (2, 3)],
    &[(0, 1)],
    &[(1, 3)],
    &[(1, 2)],
    &[(2, 3)],
    &[],
];

/// Contours of the mask at the 0.5 level of its indicator, with the staircase
/// smoothed out.
pub fn extract_contours(mask: &VesselMask) -> VesselContour {
    let mut contour = trace(mask, None);
    for poly in &mut contour.polygons {
        taubin(&mut poly.points);
    }
    contour
}

/// Taubin smoothing of a closed polyline: alternating shrink and inflate steps
/// toward the neighbor average, which removes pixel steps without shrinking
/// the shape.
fn taubin(points: &mut Vec<Point2>) {
    let n = points.len() - 1;
    if n < 3 {
        return;
    }
    let mut p = points[..n].to_vec();
    for _ in 0..TAUBIN_PASSES {
        for k in [TAUBIN_SHRINK, TAUBIN_INFLATE] {
            p = (0..n)
                .map(|i| {
                    let avg = (p[(i + n - 1) % n] + p[(i + 1) % n]) * 0.5;
                    p[i] + (avg - p[i]) * k
                })
                .collect();
        }
    }
    p.push(p[0]);
    *points = p;
}

/// Contours of the mask with vertices placed where `field` crosses `level`.
pub fn extract_contours_on_field(mask: &VesselMask, field: &GrayImage, level: f64) -> VesselContour {
    trace(mask, Some((field, level)))
}

fn trace(mask: &VesselMask, field: Option<(&GrayImage, f64)>) -> VesselContour {
    // padded grid: pixel (px, py) is original (px - 1, py - 1)
    let (pw, ph) = (mask.width + 2, mask.height + 2);
    let inside = |px: usize, py: usize| mask.get_signed(px as isize - 1, py as isize - 1);
    // edge key: horizontal edge starting at (px, py) -> 2 * idx, vertical -> 2 * idx + 1
    let key = |px: usize, py: usize, vertical: bool| 2 * (py * pw + px) + vertical as usize;
    let mut next = vec![usize::MAX; 2 * pw * ph];
    let mut starts = Vec::new();

    for py in 0..ph - 1 {
        for px in 0..pw - 1 {
            let case = (inside(px, py) as usize) << 3
                | (inside(px + 1, py) as usize) << 2
                | (inside(px + 1, py + 1) as usize) << 1
                | inside(px, py + 1) as usize;
            for &(from, to) in CASES[case] {
                let edge = |e: u8| match e {
                    0 => key(px, py, false),
                    1 => key(px + 1, py, true),
                    2 => key(px, py + 1, false),
                    _ => key(px, py, true),
                };
                let (a, b) = (edge(from), edge(to));
                next[a] = b;
                starts.push(a);
            }
        }
    }

    let field_at = |px: usize, py: usize| -> Option<f64> {
        let (field, _) = field?;
        let (x, y) = (px as isize - 1, py as isize - 1);
        (x >= 0 && y >= 0 && (x as usize) < field.width() && (y as usize) < field.height())
            .then(|| field.get(x as usize, y as usize))
    };
    let level = field.map_or(0.5, |f| f.1);
    let vertex = |k: usize| -> Point2 {
        let idx = k / 2;
        let (px, py) = (idx % pw, idx / pw);
        let (qx, qy) = if k % 2 == 1 { (px, py + 1) } else { (px + 1, py) };
        // fraction of the way from p to q
        let t = match (field_at(px, py), field_at(qx, qy)) {
            (Some(fp), Some(fq)) if (fp - level) * (fq - level) < 0.0 => (level - fp) / (fq - fp),
            _ => 0.5,
        }
        .clamp(T_MIN, 1.0 - T_MIN);
        let (x0, y0) = (px as f64 - 1.0, py as f64 - 1.0);
        if k % 2 == 1 {
            Point2::new(x0, y0 + t)
        } else {
            Point2::new(x0 + t, y0)
        }
    };

    let mut seen = vec![false; next.len()];
    let mut polygons = Vec::new();
    for &s in &starts {
        if seen[s] {
            continue;
        }
        let mut points = Vec::new();
        let mut k = s;
        while !seen[k] {
            seen[k] = true;
            points.push(vertex(k));
            k = next[k];
        }
        points.push(points[0]);
        let outer = signed_area(&points) > 0.0;
        polygons.push(Polygon { outer, points });
    }
    VesselContour { polygons }
}
