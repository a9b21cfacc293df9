//! Diameter measurement along centerline segments and stenosis grading.

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::contour::{nearest_pair, ray_hits, VesselContour};
use crate::error::{Error, Result};
use crate::geometry::{tls_direction, Point2};
use crate::tracker::TrackPoint;

/// Points used for the local axis fit.
const FIT_POINTS: usize = 4;
/// Half-width (in points) of the running-median window of the outlier guard.
const MEDIAN_HALF_WINDOW: usize = 4;

/// Branch-free run of centerline points with its measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VesselSegment {
    pub id: usize,
    pub points: Vec<TrackPoint>,
    /// `None` where the point could not be measured.
    pub diameters: Vec<Option<f64>>,
    pub mean_diameter: Option<f64>,
    pub degrees: Vec<Option<f64>>,
    pub source_track: usize,
    /// Ordinals of the first and last point in the source track.
    pub source_range: [usize; 2],
}

impl VesselSegment {
    /// Geometry-only segment; measurements are filled by [`quantify`].
    pub fn from_points(id: usize, points: Vec<TrackPoint>, source_track: usize, source_range: [usize; 2]) -> Self {
        let n = points.len();
        Self {
            id,
            points,
            diameters: vec![None; n],
            mean_diameter: None,
            degrees: vec![None; n],
            source_track,
            source_range,
        }
    }

    pub fn arc_length(&self) -> f64 {
        self.points.windows(2).map(|w| w[0].pos.distance(w[1].pos)).sum()
    }

    /// Diameter profile as CSV: `ordinal,x,y,diameter,degree`, blanks where unmeasured.
    pub fn profile_csv(&self) -> String {
        let mut out = String::from("ordinal,x,y,diameter,degree\n");
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.4}"));
        for (k, p) in self.points.iter().enumerate() {
            out.push_str(&format!(
                "{k},{:.4},{:.4},{},{}\n",
                p.pos.x,
                p.pos.y,
                opt(self.diameters[k]),
                opt(self.degrees[k])
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StenosisFinding {
    #[serde(rename = "segment")]
    pub segment_id: usize,
    /// Inclusive ordinal interval within the segment.
    #[serde(rename = "range")]
    pub point_range: [usize; 2],
    pub location: Point2,
    pub min_degree: f64,
    pub mean_degree: f64,
}

/// Width of the contour across the local axis at point `k`, without the outlier
/// guard. The axis is the orthogonal regression line through the four points nearest
/// to `P_k` (ties by ordinal), `P_k` included.
pub fn measure_diameter(points: &[TrackPoint], k: usize, contour: &VesselContour) -> Result<Option<f64>> {
    if k >= points.len() {
        return Err(Error::OutOfRange {
            index: k,
            len: points.len(),
        });
    }
    if points.len() < 2 {
        return Ok(None);
    }
    let pk = points[k].pos;
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[a].pos.distance_sq(pk).total_cmp(&points[b].pos.distance_sq(pk)).then(a.cmp(&b)));
    let near: Vec<Point2> = order.iter().take(FIT_POINTS).map(|&i| points[i].pos).collect();
    let Some(axis) = tls_direction(&near) else {
        return Ok(None);
    };
    let hits = ray_hits(contour, pk, axis.normal());
    Ok(nearest_pair(&hits).map(|(a, b)| a.point.distance(b.point)))
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Drops diameters above `factor` times the median of the raw measurements within
/// `MEDIAN_HALF_WINDOW` ordinals.
fn reject_outliers(raw: &[Option<f64>], factor: f64) -> Vec<Option<f64>> {
    (0..raw.len())
        .map(|k| {
            let d = raw[k]?;
            let lo = k.saturating_sub(MEDIAN_HALF_WINDOW);
            let hi = (k + MEDIAN_HALF_WINDOW + 1).min(raw.len());
            let m = median(raw[lo..hi].iter().flatten().copied().collect())?;
            (d <= factor * m).then_some(d)
        })
        .collect()
}

/// `S_i = D_i / mean`.
pub fn stenotic_degree(diameters: &[Option<f64>], mean_diameter: f64) -> Result<Vec<Option<f64>>> {
    if !(mean_diameter > 0.0) {
        return Err(Error::NonPositiveMean(mean_diameter));
    }
    Ok(diameters.iter().map(|d| d.map(|d| d / mean_diameter)).collect())
}

/// `1` where `S_i < tau_3` (narrowed), else `0`; unmeasured points give `0`.
pub fn discriminate(degrees: &[Option<f64>], tau_3: f64) -> Vec<u8> {
    degrees.iter().map(|s| s.is_some_and(|s| s < tau_3) as u8).collect()
}

/// Measures every point of the segment and fills its mean diameter and degrees.
pub fn quantify(mut segment: VesselSegment, contour: &VesselContour, cfg: &Config) -> VesselSegment {
    let raw: Vec<Option<f64>> = (0..segment.points.len())
        .map(|k| measure_diameter(&segment.points, k, contour).expect("k in range"))
        .collect();
    segment.diameters = reject_outliers(&raw, cfg.diameter_outlier_factor);
    let measured: Vec<f64> = segment.diameters.iter().flatten().copied().collect();
    segment.mean_diameter = (!measured.is_empty()).then(|| measured.iter().sum::<f64>() / measured.len() as f64);
    segment.degrees = match segment.mean_diameter {
        Some(m) => stenotic_degree(&segment.diameters, m).expect("positive mean"),
        None => vec![None; segment.points.len()],
    };
    segment
}

/// Maximal runs of narrowed points with at least `min_finding_points` points.
pub fn find_stenoses(segment: &VesselSegment, cfg: &Config) -> Vec<StenosisFinding> {
    let delta = discriminate(&segment.degrees, cfg.stenosis_tau_3);
    let mut out = Vec::new();
    let mut k = 0;
    while k < delta.len() {
        if delta[k] == 0 {
            k += 1;
            continue;
        }
        let a = k;
        while k < delta.len() && delta[k] == 1 {
            k += 1;
        }
        let b = k - 1;
        if b + 1 - a < cfg.min_finding_points.max(1) {
            continue;
        }
        let run: Vec<(usize, f64)> = (a..=b).map(|i| (i, segment.degrees[i].expect("narrowed points are measured"))).collect();
        let (imin, smin) = run.iter().copied().min_by(|x, y| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0))).expect("nonempty");
        out.push(StenosisFinding {
            segment_id: segment.id,
            point_range: [a, b],
            location: segment.points[imin].pos,
            min_degree: smin,
            mean_degree: run.iter().map(|r| r.1).sum::<f64>() / run.len() as f64,
        });
    }
    out
}
