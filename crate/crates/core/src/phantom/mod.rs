//! Synthetic angiogram phantoms with analytic ground truth.
//!
//! Vessels are bright tubes swept along parametric centerlines. The width along each
//! path is a baseline with optional stenoses: a plateau at `residual * width` over
//! `extent` px of arc length, joined to the baseline by cosine tapers.

mod suite;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use suite::standard_suite;

use crate::contour::VesselMask;
use crate::error::{Error, Result};
use crate::geometry::{Direction2, Point2};
use crate::image::GrayImage;
use crate::preprocess::gaussian_blur;

/// Spacing of the dense truth centerline samples (px of arc length).
pub const SAMPLE_STEP: f64 = 0.25;
/// Supersampling factor per axis of the truth mask.
pub const SUPERSAMPLE: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PathShape {
    Line { from: Point2, to: Point2 },
    /// Counter-clockwise in (x, y) from `start_deg` to `end_deg`.
    Arc {
        center: Point2,
        radius: f64,
        start_deg: f64,
        end_deg: f64,
    },
    /// Catmull-Rom spline through the control points.
    Spline { control: Vec<Point2> },
}

impl PathShape {
    /// Dense `(s, point)` samples at [`SAMPLE_STEP`] spacing, ending exactly at the
    /// path end.
    fn samples(&self) -> Vec<(f64, Point2)> {
        match self {
            PathShape::Line { from, to } => {
                let len = from.distance(*to);
                resample(len, |s| *from + (*to - *from) * (s / len.max(1e-12)))
            }
            PathShape::Arc {
                center,
                radius,
                start_deg,
                end_deg,
            } => {
                let (a0, a1) = (start_deg.to_radians(), end_deg.to_radians());
                let len = radius * (a1 - a0).abs();
                resample(len, |s| {
                    let a = a0 + (a1 - a0) * s / len.max(1e-12);
                    center.polar_offset(*radius, a)
                })
            }
            PathShape::Spline { control } => spline_samples(control),
        }
    }
}

fn resample(len: f64, mut at: impl FnMut(f64) -> Point2) -> Vec<(f64, Point2)> {
    let n = (len / SAMPLE_STEP).floor() as usize;
    let mut out: Vec<(f64, Point2)> = (0..=n).map(|k| k as f64 * SAMPLE_STEP).map(|s| (s, at(s))).collect();
    if len - n as f64 * SAMPLE_STEP > 1e-9 {
        out.push((len, at(len)));
    }
    out
}

fn catmull_rom(p0: Point2, p1: Point2, p2: Point2, p3: Point2, t: f64) -> Point2 {
    let t2 = t * t;
    let t3 = t2 * t;
    (p1 * 2.0 + (p2 - p0) * t + (p0 * 2.0 - p1 * 5.0 + p2 * 4.0 - p3) * t2 + (p1 * 3.0 - p0 - p2 * 3.0 + p3) * t3)
        * 0.5
}

fn spline_samples(control: &[Point2]) -> Vec<(f64, Point2)> {
    const FINE: usize = 256;
    let n = control.len();
    let get = |i: isize| control[i.clamp(0, n as isize - 1) as usize];
    let mut fine = vec![control[0]];
    for i in 0..n as isize - 1 {
        for k in 1..=FINE {
            let t = k as f64 / FINE as f64;
            fine.push(catmull_rom(get(i - 1), get(i), get(i + 1), get(i + 2), t));
        }
    }
    let mut cum = vec![0.0];
    for w in fine.windows(2) {
        cum.push(cum.last().unwrap() + w[0].distance(w[1]));
    }
    let len = *cum.last().unwrap();
    let mut j = 0;
    resample(len, |s| {
        while j + 1 < cum.len() - 1 && cum[j + 1] < s {
            j += 1;
        }
        let seg = (cum[j + 1] - cum[j]).max(1e-12);
        let t = ((s - cum[j]) / seg).clamp(0.0, 1.0);
        fine[j] + (fine[j + 1] - fine[j]) * t
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StenosisSpec {
    /// Arc length of the plateau center.
    pub center: f64,
    /// Length of the full-depth plateau.
    pub extent: f64,
    /// Residual width fraction on the plateau, in `(0, 1)`.
    pub residual: f64,
    /// Length of each cosine taper.
    pub taper: f64,
}

impl StenosisSpec {
    /// Depth weight in `[0, 1]` at arc length `s`.
    fn weight(&self, s: f64) -> f64 {
        let off = (s - self.center).abs() - 0.5 * self.extent;
        if off <= 0.0 {
            1.0
        } else if off < self.taper {
            0.5 * (1.0 + (std::f64::consts::PI * off / self.taper).cos())
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VesselPath {
    pub shape: PathShape,
    /// Baseline width (px).
    pub width: f64,
    #[serde(default)]
    pub stenoses: Vec<StenosisSpec>,
}

impl VesselPath {
    pub fn width_at(&self, s: f64) -> f64 {
        let factor = self
            .stenoses
            .iter()
            .map(|st| 1.0 - (1.0 - st.residual) * st.weight(s))
            .fold(1.0, f64::min);
        self.width * factor
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// Flat top with a 1 px linear shoulder centered on the nominal edge.
    #[default]
    FlatTop,
    /// Gaussian cross-section whose full width at half maximum is the nominal width.
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub name: String,
    pub width: usize,
    pub height: usize,
    pub paths: Vec<VesselPath>,
    pub vessel_level: f64,
    pub background_level: f64,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub blur_sigma: f64,
    #[serde(default)]
    pub profile: Profile,
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Phantom(format!("{}: {m}", self.name)));
        if self.width == 0 || self.height == 0 {
            return bad("empty canvas".into());
        }
        if self.paths.is_empty() {
            return bad("no paths".into());
        }
        for (i, p) in self.paths.iter().enumerate() {
            if !(p.width > 0.0) {
                return bad(format!("path {i} has non-positive width"));
            }
            if let PathShape::Spline { control } = &p.shape {
                if control.len() < 2 {
                    return bad(format!("path {i} spline needs at least 2 control points"));
                }
            }
            for st in &p.stenoses {
                if !(st.residual > 0.0 && st.residual < 1.0) || st.extent < 0.0 || st.taper <= 0.0 {
                    return bad(format!("path {i} has an invalid stenosis"));
                }
            }
        }
        let max_w = self.paths.iter().map(|p| p.width).fold(0.0, f64::max);
        let margin = 2.0 * max_w;
        for (i, p) in self.paths.iter().enumerate() {
            for (_, q) in p.shape.samples() {
                if q.x < margin
                    || q.y < margin
                    || q.x > self.width as f64 - 1.0 - margin
                    || q.y > self.height as f64 - 1.0 - margin
                {
                    return bad(format!("path {i} leaves the canvas margin of {margin} px"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CenterlineSample {
    pub s: f64,
    pub pos: Point2,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathTruth {
    pub length: f64,
    pub samples: Vec<CenterlineSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthStenosis {
    pub id: usize,
    pub path: usize,
    /// Plateau interval in arc length.
    pub s_range: [f64; 2],
    pub location: Point2,
    pub degree: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhantomTruth {
    pub paths: Vec<PathTruth>,
    pub stenoses: Vec<TruthStenosis>,
    pub bifurcations: Vec<Point2>,
    #[serde(skip)]
    pub mask: Option<VesselMask>,
}

/// Nearest truth sample to a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NearestSample {
    pub path: usize,
    pub index: usize,
    pub distance: f64,
    pub sample: CenterlineSample,
}

impl PhantomTruth {
    pub fn total_length(&self) -> f64 {
        self.paths.iter().map(|p| p.length).sum()
    }

    pub fn nearest(&self, p: Point2) -> Option<NearestSample> {
        self.nearest_in(p, 0..self.paths.len())
    }

    pub fn nearest_on_path(&self, path: usize, p: Point2) -> Option<NearestSample> {
        self.nearest_in(p, path..path + 1)
    }

    fn nearest_in(&self, p: Point2, paths: std::ops::Range<usize>) -> Option<NearestSample> {
        let mut best: Option<NearestSample> = None;
        for pi in paths {
            for (i, s) in self.paths[pi].samples.iter().enumerate() {
                let d = s.pos.distance_sq(p);
                if best.is_none_or(|b| d < b.distance) {
                    best = Some(NearestSample {
                        path: pi,
                        index: i,
                        distance: d,
                        sample: *s,
                    });
                }
            }
        }
        best.map(|mut b| {
            b.distance = b.distance.sqrt();
            b
        })
    }

    /// Analytic membership: within half the local width of some centerline sample.
    pub fn contains(&self, p: Point2) -> bool {
        self.paths
            .iter()
            .flat_map(|pt| &pt.samples)
            .any(|s| s.pos.distance(p) <= 0.5 * s.width)
    }

    /// Width of the analytic vessel through `p`, across the tangent of the nearest
    /// path. Inside a straight run this is the local width; in an end cap it is the
    /// chord of the cap. `None` outside the vessel.
    pub fn cross_section(&self, p: Point2) -> Option<f64> {
        if !self.contains(p) {
            return None;
        }
        let near = self.nearest(p)?;
        let samples = &self.paths[near.path].samples;
        let a = samples[near.index.saturating_sub(1)].pos;
        let b = samples[(near.index + 1).min(samples.len() - 1)].pos;
        let normal = Direction2::between(a, b)?.normal().as_vector();
        let reach = |sign: f64| {
            let step = 0.25 * near.sample.width.max(1.0);
            let mut inside = 0.0;
            while self.contains(p + normal * (sign * (inside + step))) {
                inside += step;
            }
            let mut outside = inside + step;
            for _ in 0..40 {
                let mid = 0.5 * (inside + outside);
                if self.contains(p + normal * (sign * mid)) {
                    inside = mid;
                } else {
                    outside = mid;
                }
            }
            inside
        };
        Some(reach(1.0) + reach(-1.0))
    }

    /// Analytic membership in one path's tube.
    pub fn path_contains(&self, path: usize, p: Point2) -> bool {
        self.paths[path].samples.iter().any(|s| s.pos.distance(p) <= 0.5 * s.width)
    }

    /// Membership in the rasterized truth mask at the nearest pixel.
    pub fn mask_contains(&self, p: Point2) -> bool {
        let Some(mask) = &self.mask else {
            return self.contains(p);
        };
        let (x, y) = p.round();
        mask.get_signed(x, y)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("truth serializes")
    }
}

struct Segment {
    a: Point2,
    b: Point2,
    wa: f64,
    wb: f64,
}

impl Segment {
    /// Distance from `p` to the segment and the interpolated width at the foot point.
    fn query(&self, p: Point2) -> (f64, f64) {
        let ab = self.b - self.a;
        let len2 = ab.dot(ab);
        let t = if len2 > 0.0 { ((p - self.a).dot(ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
        let foot = self.a + ab * t;
        (p.distance(foot), self.wa + (self.wb - self.wa) * t)
    }
}

fn segments(truth: &PhantomTruth) -> Vec<Segment> {
    let mut out = Vec::new();
    for path in &truth.paths {
        let s = &path.samples;
        if s.len() == 1 {
            out.push(Segment {
                a: s[0].pos,
                b: s[0].pos,
                wa: s[0].width,
                wb: s[0].width,
            });
        }
        for w in s.windows(2) {
            out.push(Segment {
                a: w[0].pos,
                b: w[1].pos,
                wa: w[0].width,
                wb: w[1].width,
            });
        }
    }
    out
}

/// Cross-section value in `[0, 1]` at distance `r` from the axis of a tube of width `w`.
fn profile_value(profile: Profile, r: f64, w: f64) -> f64 {
    match profile {
        Profile::FlatTop => (0.5 * w + 0.5 - r).clamp(0.0, 1.0),
        Profile::Gaussian => {
            let sigma = w / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt());
            (-(r * r) / (2.0 * sigma * sigma)).exp()
        }
    }
}

fn profile_reach(profile: Profile, w: f64) -> f64 {
    match profile {
        Profile::FlatTop => 0.5 * w + 1.0,
        Profile::Gaussian => 3.0 * w / 2.355 + 1.0,
    }
}

fn truth_of(spec: &PhantomSpec) -> PhantomTruth {
    let paths: Vec<PathTruth> = spec
        .paths
        .iter()
        .map(|p| {
            let samples: Vec<CenterlineSample> = p
                .shape
                .samples()
                .into_iter()
                .map(|(s, pos)| CenterlineSample {
                    s,
                    pos,
                    width: p.width_at(s),
                })
                .collect();
            PathTruth {
                length: samples.last().map_or(0.0, |s| s.s),
                samples,
            }
        })
        .collect();

    let mut stenoses = Vec::new();
    for (pi, p) in spec.paths.iter().enumerate() {
        for st in &p.stenoses {
            let samples = &paths[pi].samples;
            let at = samples
                .iter()
                .min_by(|a, b| (a.s - st.center).abs().total_cmp(&(b.s - st.center).abs()))
                .expect("nonempty path");
            stenoses.push(TruthStenosis {
                id: stenoses.len(),
                path: pi,
                s_range: [st.center - 0.5 * st.extent, st.center + 0.5 * st.extent],
                location: at.pos,
                degree: st.residual,
            });
        }
    }

    let mut bifurcations: Vec<Point2> = Vec::new();
    for (i, p) in paths.iter().enumerate() {
        let ends = [p.samples[0].pos, p.samples[p.samples.len() - 1].pos];
        for e in ends {
            let touches = paths
                .iter()
                .enumerate()
                .any(|(j, q)| j != i && q.samples.iter().any(|s| s.pos.distance(e) <= 0.5));
            if touches && !bifurcations.iter().any(|b| b.distance(e) < 2.0) {
                bifurcations.push(e);
            }
        }
    }

    PhantomTruth {
        paths,
        stenoses,
        bifurcations,
        mask: None,
    }
}

/// Truth mask: a pixel is inside when at least half of its `4 x 4` subsamples lie
/// within half the local width of the centerline.
fn rasterize_mask(spec: &PhantomSpec, segs: &[Segment]) -> VesselMask {
    let (w, h) = (spec.width, spec.height);
    let n = SUPERSAMPLE;
    let mut hits = vec![0u8; w * h];
    let mut inside = vec![false; w * h * n * n];
    let sub = |k: usize| (k as f64 + 0.5) / n as f64 - 0.5;
    for seg in segs {
        let reach = 0.5 * seg.wa.max(seg.wb) + 1.0;
        let x0 = (seg.a.x.min(seg.b.x) - reach).floor().max(0.0) as usize;
        let x1 = ((seg.a.x.max(seg.b.x) + reach).ceil() as usize).min(w - 1);
        let y0 = (seg.a.y.min(seg.b.y) - reach).floor().max(0.0) as usize;
        let y1 = ((seg.a.y.max(seg.b.y) + reach).ceil() as usize).min(h - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                for j in 0..n {
                    for i in 0..n {
                        let idx = ((y * n + j) * w + x) * n + i;
                        if inside[idx] {
                            continue;
                        }
                        let p = Point2::new(x as f64 + sub(i), y as f64 + sub(j));
                        let (d, wid) = seg.query(p);
                        if d <= 0.5 * wid {
                            inside[idx] = true;
                            hits[y * w + x] += 1;
                        }
                    }
                }
            }
        }
    }
    let half = (n * n / 2) as u8;
    VesselMask {
        width: w,
        height: h,
        inside: hits.into_iter().map(|c| c >= half).collect(),
    }
}

/// Renders the phantom image and its ground truth. Noise is drawn from `seed`.
pub fn render_phantom(spec: &PhantomSpec, seed: u64) -> Result<(GrayImage, PhantomTruth)> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let mut truth = truth_of(spec);
    let segs = segments(&truth);

    let mut cover = vec![0.0f64; w * h];
    for seg in &segs {
        let reach = profile_reach(spec.profile, seg.wa.max(seg.wb));
        let x0 = (seg.a.x.min(seg.b.x) - reach).floor().max(0.0) as usize;
        let x1 = ((seg.a.x.max(seg.b.x) + reach).ceil() as usize).min(w - 1);
        let y0 = (seg.a.y.min(seg.b.y) - reach).floor().max(0.0) as usize;
        let y1 = ((seg.a.y.max(seg.b.y) + reach).ceil() as usize).min(h - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let (d, wid) = seg.query(Point2::new(x as f64, y as f64));
                let v = profile_value(spec.profile, d, wid);
                let c = &mut cover[y * w + x];
                if v > *c {
                    *c = v;
                }
            }
        }
    }
    let (bg, fg) = (spec.background_level, spec.vessel_level);
    let mut img = GrayImage::from_clamped(w, h, cover.iter().map(|c| bg + (fg - bg) * c).collect());
    if spec.blur_sigma > 0.0 {
        img = gaussian_blur(&img, spec.blur_sigma);
    }
    if spec.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::Phantom(e.to_string()))?;
        let data = img.data().iter().map(|v| v + normal.sample(&mut rng)).collect();
        img = GrayImage::from_clamped(w, h, data);
    }
    truth.mask = Some(rasterize_mask(spec, &segs));
    Ok((img, truth))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tube(width: f64, y: f64) -> PhantomSpec {
        PhantomSpec {
            name: "tube".into(),
            width: 200,
            height: 120,
            paths: vec![VesselPath {
                shape: PathShape::Line {
                    from: Point2::new(40.0, y),
                    to: Point2::new(160.0, y),
                },
                width,
                stenoses: vec![],
            }],
            vessel_level: 200.0,
            background_level: 50.0,
            noise_sigma: 0.0,
            blur_sigma: 0.0,
            profile: Profile::FlatTop,
        }
    }

    #[test]
    fn straight_tube_mask_thickness() {
        let (_, truth) = render_phantom(&tube(9.0, 60.0), 0).unwrap();
        let mask = truth.mask.as_ref().unwrap();
        for x in 50..150 {
            let rows = (0..120).filter(|&y| mask.get(x, y)).count();
            assert_eq!(rows, 9, "column {x}");
        }
    }

    #[test]
    fn flat_top_levels() {
        let (img, _) = render_phantom(&tube(9.0, 60.0), 0).unwrap();
        assert_eq!(img.get(100, 60), 200.0);
        assert_eq!(img.get(100, 30), 50.0);
        // on the nominal edge: half way between the levels
        let (img, _) = render_phantom(&tube(8.0, 60.0), 0).unwrap();
        assert_eq!(img.get(100, 64), 50.0 + 150.0 * 0.5);
    }

    #[test]
    fn stenosis_degree_by_construction() {
        let mut spec = tube(10.0, 60.0);
        spec.paths[0].stenoses.push(StenosisSpec {
            center: 60.0,
            extent: 20.0,
            residual: 0.6,
            taper: 8.0,
        });
        let (_, truth) = render_phantom(&spec, 0).unwrap();
        assert_eq!(truth.stenoses.len(), 1);
        let st = &truth.stenoses[0];
        assert_eq!(st.degree, 0.6);
        for s in &truth.paths[0].samples {
            if s.s >= st.s_range[0] && s.s <= st.s_range[1] {
                assert!((s.width - 6.0).abs() < 1e-12);
            }
        }
        let w: Vec<f64> = truth.paths[0].samples.iter().map(|s| s.width).collect();
        assert!(w.windows(2).all(|p| (p[1] - p[0]).abs() < 0.25));
    }

    #[test]
    fn y_has_one_bifurcation() {
        let j = Point2::new(100.0, 80.0);
        let spec = PhantomSpec {
            name: "y".into(),
            width: 200,
            height: 200,
            paths: vec![
                VesselPath {
                    shape: PathShape::Line { from: Point2::new(100.0, 170.0), to: j },
                    width: 6.0,
                    stenoses: vec![],
                },
                VesselPath {
                    shape: PathShape::Line { from: j, to: j.polar_offset(60.0, (-120f64).to_radians()) },
                    width: 6.0,
                    stenoses: vec![],
                },
                VesselPath {
                    shape: PathShape::Line { from: j, to: j.polar_offset(60.0, (-60f64).to_radians()) },
                    width: 6.0,
                    stenoses: vec![],
                },
            ],
            vessel_level: 200.0,
            background_level: 50.0,
            noise_sigma: 0.0,
            blur_sigma: 0.0,
            profile: Profile::FlatTop,
        };
        let (_, truth) = render_phantom(&spec, 0).unwrap();
        assert_eq!(truth.bifurcations.len(), 1);
        assert!(truth.bifurcations[0].distance(j) < 1e-9);
    }

    #[test]
    fn escaping_path_rejected() {
        let spec = tube(9.0, 5.0);
        assert!(matches!(render_phantom(&spec, 0), Err(Error::Phantom(_))));
    }

    #[test]
    fn noise_is_seeded() {
        let mut spec = tube(6.0, 60.0);
        spec.noise_sigma = 8.0;
        let (a, _) = render_phantom(&spec, 7).unwrap();
        let (b, _) = render_phantom(&spec, 7).unwrap();
        let (c, _) = render_phantom(&spec, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn spline_is_arc_length_sampled() {
        let shape = PathShape::Spline {
            control: vec![Point2::new(0.0, 0.0), Point2::new(10.0, 5.0), Point2::new(20.0, 0.0)],
        };
        let s = shape.samples();
        for w in s.windows(2).take(s.len() - 2) {
            assert!((w[0].1.distance(w[1].1) - SAMPLE_STEP).abs() < 1e-3);
        }
    }
}
