use angio_core::interactive::{track_segment, InteractiveRequest};
use angio_core::phantom::{render_phantom, standard_suite};
use angio_core::pipeline::{prepare, Prepared};
use angio_core::{Config, Error, Point2};

fn prepared(name: &str) -> Prepared {
    let spec = standard_suite().into_iter().find(|s| s.name == name).unwrap();
    let (img, _) = render_phantom(&spec, 1).unwrap();
    prepare(&img, &Config::default()).unwrap()
}

fn route(prep: &Prepared, a: Point2, b: Point2) -> angio_core::Result<angio_core::interactive::RouteResult> {
    track_segment(prep.tracking(), &prep.ridges, &prep.contour, &InteractiveRequest::new(a, b), &Config::default())
}

#[test]
fn tube_routes_agree_in_both_directions() {
    let prep = prepared("tube_w8");
    let (a, b) = (Point2::new(110.0, 200.0), Point2::new(290.0, 201.0));
    let ab = route(&prep, a, b).unwrap();
    let ba = route(&prep, b, a).unwrap();
    assert!((ab.route.len() as i64 - ba.route.len() as i64).abs() <= 1);
    assert!(ab.route.last().unwrap().pos.distance(ab.end) < 5.0);
    assert!(ab.route.iter().all(|p| (p.pos.y - 200.4).abs() < 2.0));
    let d = ab.segment.mean_diameter.unwrap();
    assert!((d - 8.0).abs() < 1.0, "{d}");
    assert!(ab.findings.is_empty());
}

#[test]
fn stenosed_tube_route_reports_the_lesion() {
    let prep = prepared("stenosis_0.5");
    let c = Point2::new(200.3, 200.4);
    let dir = 10f64.to_radians();
    let r = route(&prep, c.polar_offset(-120.0, dir), c.polar_offset(120.0, dir)).unwrap();
    assert_eq!(r.findings.len(), 1);
    assert!((r.findings[0].min_degree - 0.5).abs() <= 0.07);
}

#[test]
fn same_snapped_point_is_degenerate() {
    let prep = prepared("tube_w6");
    let p = Point2::new(200.0, 200.4);
    let r = route(&prep, p, Point2::new(200.2, 200.5)).unwrap();
    assert!(r.degenerate);
    assert_eq!(r.route.len(), 1);
}

#[test]
fn clicks_outside_the_image_are_rejected() {
    let prep = prepared("tube_w6");
    let err = route(&prep, Point2::new(-3.0, 10.0), Point2::new(200.0, 200.0)).unwrap_err();
    assert!(matches!(err, Error::OutsideImage { .. }));
}

#[test]
fn overrides_are_validated() {
    let prep = prepared("tube_w6");
    let mut req = InteractiveRequest::new(Point2::new(100.0, 200.0), Point2::new(200.0, 200.0));
    req.overrides.insert("no_such_key".into(), "1".into());
    let err = track_segment(prep.tracking(), &prep.ridges, &prep.contour, &req, &Config::default());
    assert!(err.is_err());
}
