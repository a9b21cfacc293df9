//! The fixed phantom catalog used by the acceptance tests.

use super::{PathShape, PhantomSpec, Profile, StenosisSpec, VesselPath};
use crate::geometry::Point2;

const SIZE: usize = 400;
const VESSEL: f64 = 200.0;
const BACKGROUND: f64 = 50.0;

fn base(name: String, paths: Vec<VesselPath>) -> PhantomSpec {
    PhantomSpec {
        name,
        width: SIZE,
        height: SIZE,
        paths,
        vessel_level: VESSEL,
        background_level: BACKGROUND,
        noise_sigma: 0.0,
        blur_sigma: 0.0,
        profile: Profile::FlatTop,
    }
}

fn plain(shape: PathShape, width: f64) -> VesselPath {
    VesselPath {
        shape,
        width,
        stenoses: vec![],
    }
}

/// Line of `length` through `center` at `deg` from the +x axis.
fn line(center: Point2, deg: f64, length: f64) -> PathShape {
    let a = deg.to_radians();
    PathShape::Line {
        from: center.polar_offset(-0.5 * length, a),
        to: center.polar_offset(0.5 * length, a),
    }
}

fn center() -> Point2 {
    // off the pixel grid so that edges do not all fall on pixel centers
    Point2::new(200.3, 200.4)
}

/// Y with a stem rising from the bottom and two arms separated by `sep_deg`.
pub(crate) fn y_paths(sep_deg: f64) -> Vec<VesselPath> {
    let junction = Point2::new(200.3, 230.4);
    let up = -90f64;
    let arm = |off: f64| {
        let a = (up + off).to_radians();
        plain(
            PathShape::Line {
                from: junction,
                to: junction.polar_offset(160.0, a),
            },
            6.0,
        )
    };
    vec![
        plain(
            PathShape::Line {
                from: Point2::new(200.3, 370.4),
                to: junction,
            },
            8.0,
        ),
        arm(-0.5 * sep_deg),
        arm(0.5 * sep_deg),
    ]
}

fn stenosed(residuals: &[(f64, f64)]) -> Vec<VesselPath> {
    vec![VesselPath {
        shape: line(center(), 10.0, 300.0),
        width: 10.0,
        stenoses: residuals
            .iter()
            .map(|&(s, r)| StenosisSpec {
                center: s,
                extent: 20.0,
                residual: r,
                taper: 8.0,
            })
            .collect(),
    }]
}

/// Straight tubes, inclinations, arcs, Y bifurcations, a ring, stenoses, and
/// low-contrast, noisy and Gaussian-profile variants, all on 400 x 400 canvases.
///
/// Names are prefixed by family: `tube_`, `incline_`, `arc_`, `y_`, `ring`,
/// `stenosis_`, `double_stenosis`, `low_contrast`, `noisy_`, `gaussian_`.
pub fn standard_suite() -> Vec<PhantomSpec> {
    let mut out = Vec::new();
    for w in [4.0, 6.0, 8.0, 10.0, 12.0] {
        out.push(base(format!("tube_w{w}"), vec![plain(line(center(), 0.0, 300.0), w)]));
    }
    for deg in [0.0, 15.0, 30.0, 45.0, 60.0, 75.0, 90.0] {
        out.push(base(format!("incline_{deg}"), vec![plain(line(center(), deg, 300.0), 6.0)]));
    }
    for (r, sweep) in [(40.0, 270.0), (80.0, 200.0), (150.0, 120.0)] {
        let c = Point2::new(200.3, 200.4 + 0.4 * r);
        let start = -90.0 - 0.5 * sweep;
        out.push(base(
            format!("arc_r{r}"),
            vec![plain(
                PathShape::Arc {
                    center: c,
                    radius: r,
                    start_deg: start,
                    end_deg: start + sweep,
                },
                6.0,
            )],
        ));
    }
    for sep in [30.0, 60.0, 90.0, 120.0] {
        out.push(base(format!("y_{sep}"), y_paths(sep)));
    }
    out.push(base(
        "ring".into(),
        vec![plain(
            PathShape::Arc {
                center: center(),
                radius: 100.0,
                start_deg: 0.0,
                end_deg: 360.0,
            },
            6.0,
        )],
    ));
    for r in [0.4, 0.5, 0.6, 0.75, 0.9] {
        out.push(base(format!("stenosis_{r}"), stenosed(&[(150.0, r)])));
    }
    out.push(base("double_stenosis".into(), stenosed(&[(95.0, 0.5), (205.0, 0.5)])));
    out.push(base(
        "spline".into(),
        vec![plain(
            PathShape::Spline {
                control: vec![
                    Point2::new(60.0, 300.0),
                    Point2::new(140.0, 180.0),
                    Point2::new(250.0, 240.0),
                    Point2::new(340.0, 100.0),
                ],
            },
            7.0,
        )],
    ));
    let mut low = base("low_contrast".into(), vec![plain(line(center(), 20.0, 300.0), 8.0)]);
    low.vessel_level = 90.0;
    low.background_level = 60.0;
    out.push(low);
    for w in [4.0, 8.0, 12.0] {
        let mut s = base(format!("noisy_w{w}"), vec![plain(line(center(), 25.0, 300.0), w)]);
        s.noise_sigma = 8.0;
        out.push(s);
    }
    let mut g = base("gaussian_w8".into(), vec![plain(line(center(), 0.0, 300.0), 8.0)]);
    g.profile = Profile::Gaussian;
    out.push(g);
    out
}
