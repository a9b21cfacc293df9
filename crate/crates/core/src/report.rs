//! Analysis report and overlay rendering.

use serde::{Deserialize, Serialize};

use crate::config::{Config, Rgb};
use crate::contour::VesselContour;
use crate::error::ImageError;
use crate::geometry::Point2;
use crate::image::GrayImage;
use crate::pipeline::AutoAnalysis;
use crate::quant::{StenosisFinding, VesselSegment};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub x: f64,
    pub y: f64,
    pub diameter: Option<f64>,
    pub degree: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentReport {
    pub id: usize,
    pub source_track: usize,
    pub source_range: [usize; 2],
    pub arc_length: f64,
    pub mean_diameter: Option<f64>,
    pub profile: Vec<ProfilePoint>,
}

impl From<&VesselSegment> for SegmentReport {
    fn from(s: &VesselSegment) -> Self {
        Self {
            id: s.id,
            source_track: s.source_track,
            source_range: s.source_range,
            arc_length: s.arc_length(),
            mean_diameter: s.mean_diameter,
            profile: s
                .points
                .iter()
                .zip(s.diameters.iter().zip(&s.degrees))
                .map(|(p, (d, g))| ProfilePoint {
                    x: p.pos.x,
                    y: p.pos.y,
                    diameter: *d,
                    degree: *g,
                })
                .collect(),
        }
    }
}

/// Result of the automatic analysis of one image. Holds no timings, so identical
/// inputs give identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub context: String,
    pub width: usize,
    pub height: usize,
    pub tracks: usize,
    pub segments: Vec<SegmentReport>,
    pub findings: Vec<StenosisFinding>,
}

impl AnalysisReport {
    pub fn new(context: impl Into<String>, width: usize, height: usize, auto: &AutoAnalysis) -> Self {
        Self {
            context: context.into(),
            width,
            height,
            tracks: auto.tracks.len(),
            segments: auto.segments.iter().map(SegmentReport::from).collect(),
            findings: auto.findings.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

struct Canvas {
    width: usize,
    height: usize,
    rgb: Vec<u8>,
}

impl Canvas {
    fn from_gray(img: &GrayImage) -> Self {
        Self {
            width: img.width(),
            height: img.height(),
            rgb: img.to_u8().into_iter().flat_map(|v| [v, v, v]).collect(),
        }
    }

    fn put(&mut self, x: isize, y: isize, c: Rgb) {
        if x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height {
            let i = 3 * (y as usize * self.width + x as usize);
            self.rgb[i..i + 3].copy_from_slice(&c);
        }
    }

    fn line(&mut self, a: Point2, b: Point2, c: Rgb) {
        let n = a.distance(b).ceil().max(1.0) as usize;
        for k in 0..=n {
            let (x, y) = (a + (b - a) * (k as f64 / n as f64)).round();
            self.put(x, y, c);
        }
    }

    fn disc(&mut self, center: Point2, r: f64, c: Rgb) {
        let (cx, cy) = center.round();
        let ri = r.ceil() as isize;
        for dy in -ri..=ri {
            for dx in -ri..=ri {
                if ((dx * dx + dy * dy) as f64) <= r * r {
                    self.put(cx + dx, cy + dy, c);
                }
            }
        }
    }

    fn encode_png(self) -> Result<Vec<u8>, ImageError> {
        let buf = image::RgbImage::from_raw(self.width as u32, self.height as u32, self.rgb)
            .ok_or_else(|| ImageError::Invalid("overlay buffer size".into()))?;
        let mut out = std::io::Cursor::new(Vec::new());
        buf.write_to(&mut out, image::ImageFormat::Png)
            .map_err(|e| ImageError::Malformed(e.to_string()))?;
        Ok(out.into_inner())
    }
}

/// Finding marker radius: larger for more severe narrowing.
pub fn marker_radius(min_degree: f64) -> f64 {
    3.0 + 12.0 * (1.0 - min_degree).clamp(0.0, 1.0)
}

/// PNG of `img` with the contour, centerlines, segment end points and findings drawn
/// in the configured colors.
pub fn render_overlay(
    img: &GrayImage,
    contour: &VesselContour,
    segments: &[VesselSegment],
    findings: &[StenosisFinding],
    cfg: &Config,
) -> Result<Vec<u8>, ImageError> {
    let style = &cfg.overlay;
    let mut canvas = Canvas::from_gray(img);
    for poly in &contour.polygons {
        for (a, b) in poly.edges() {
            canvas.line(a, b, style.boundary);
        }
    }
    for s in segments {
        for w in s.points.windows(2) {
            canvas.line(w[0].pos, w[1].pos, style.centerline);
        }
        for end in [s.points.first(), s.points.last()].into_iter().flatten() {
            canvas.disc(end.pos, 1.5, style.boundary);
        }
    }
    for f in findings {
        canvas.disc(f.location, marker_radius(f.min_degree), style.finding);
    }
    canvas.encode_png()
}
