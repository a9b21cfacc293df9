use std::fs;
use std::path::Path;
use std::process::Command;

use angio_cli::commands::{cli_analyze_segment, cli_auto, load_config, parse_point};
use angio_core::phantom::{render_phantom, standard_suite};
use angio_core::{Config, GrayImage, Point2};

fn write_phantom(dir: &Path, name: &str) -> std::path::PathBuf {
    let spec = standard_suite().into_iter().find(|s| s.name == name).unwrap();
    let (img, _) = render_phantom(&spec, 1).unwrap();
    let path = dir.join(format!("{name}.pgm"));
    fs::write(&path, img.encode_pgm()).unwrap();
    path
}

fn angio() -> Command {
    Command::new(env!("CARGO_BIN_EXE_angio"))
}

#[test]
fn auto_on_stenosed_tube_reports_one_finding() {
    let dir = tempfile::tempdir().unwrap();
    let img = write_phantom(dir.path(), "stenosis_0.6");
    let out = dir.path().join("out");
    let report = cli_auto(&img, &Config::default(), &out).unwrap();
    assert_eq!(report.findings.len(), 1);
    for f in ["report.json", "overlay.png", "timings.json", "segment_000.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let json = fs::read_to_string(out.join("report.json")).unwrap();
    assert!(!json.contains("_ms"));
}

#[test]
fn report_matches_schema() {
    let dir = tempfile::tempdir().unwrap();
    let img = write_phantom(dir.path(), "double_stenosis");
    let out = dir.path().join("out");
    cli_auto(&img, &Config::default(), &out).unwrap();
    let schema: serde_json::Value =
        serde_json::from_str(include_str!("../../../docs/report.schema.json")).unwrap();
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(&report).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");
    let segments = report["segments"].as_array().unwrap().len() as u64;
    for f in report["findings"].as_array().unwrap() {
        assert!(f["segment"].as_u64().unwrap() < segments);
    }
    assert!(validator.validate(&serde_json::json!({ "context": 1 })).is_err());
}

#[test]
fn binary_auto_is_deterministic_and_defaults_without_config() {
    let dir = tempfile::tempdir().unwrap();
    let img = write_phantom(dir.path(), "y_90");
    let run = |out: &str, extra: &[&str]| {
        let status = angio()
            .args(["auto", img.to_str().unwrap(), "--seed", "7", "--out"])
            .arg(dir.path().join(out))
            .args(extra)
            .status()
            .unwrap();
        assert!(status.success());
        fs::read(dir.path().join(out).join("report.json")).unwrap()
    };
    let missing = dir.path().join("missing.cfg");
    let a = run("a", &[]);
    let b = run("b", &["--config", missing.to_str().unwrap()]);
    assert_eq!(a, b);
}

#[test]
fn binary_blank_image_fails() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("blank.pgm");
    fs::write(&img, GrayImage::filled(64, 64, 0.0).encode_pgm()).unwrap();
    let out = angio()
        .args(["auto", img.to_str().unwrap(), "--out"])
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no ridge points"));
}

#[test]
fn binary_missing_image_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = angio()
        .args(["auto", "/nonexistent/x.pgm", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn config_file_and_seed_are_applied() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.cfg");
    fs::write(&path, "stenosis_tau_3 = 0.5\nrng_seed = 3\n").unwrap();
    let cfg = load_config(Some(&path), None).unwrap();
    assert_eq!((cfg.stenosis_tau_3, cfg.rng_seed), (0.5, 3));
    assert_eq!(load_config(Some(&path), Some(9)).unwrap().rng_seed, 9);
    fs::write(&path, "nonsense_key = 1\n").unwrap();
    assert!(load_config(Some(&path), None).is_err());
}

#[test]
fn analyze_segment_writes_route() {
    let dir = tempfile::tempdir().unwrap();
    let img = write_phantom(dir.path(), "ring");
    let out = dir.path().join("out");
    let c = Point2::new(200.3, 200.4);
    let route = cli_analyze_segment(
        &img,
        c.polar_offset(100.0, 0.0),
        c.polar_offset(100.0, std::f64::consts::FRAC_PI_2),
        &Config::default(),
        &out,
    )
    .unwrap();
    assert!(route.route.len() < 40);
    assert!(out.join("route.json").exists() && out.join("profile.csv").exists());
}

#[test]
fn point_argument_parsing() {
    assert_eq!(parse_point("3,4.5").unwrap(), Point2::new(3.0, 4.5));
    assert_eq!(parse_point(" 1 , 2 ").unwrap(), Point2::new(1.0, 2.0));
    assert!(parse_point("3").is_err());
    assert!(parse_point("a,1").is_err());
}

#[test]
fn binary_help_lists_subcommands() {
    let out = angio().arg("--help").output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    for cmd in ["prepare", "auto", "analyze-segment", "eval-phantoms", "serve"] {
        assert!(text.contains(cmd), "{cmd}");
    }
}
