//! File-based subcommands.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;

use angio_core::evalmetrics::{evaluate_suite, SuiteEval};
use angio_core::interactive::{track_segment, InteractiveRequest, RouteResult};
use angio_core::phantom::{render_phantom, standard_suite};
use angio_core::pipeline::{analyze_auto, prepare};
use angio_core::report::{render_overlay, AnalysisReport};
use angio_core::{Config, Error, GrayImage, Point2};

/// Config from `path`, falling back to the defaults when no path is given or the
/// file does not exist. `seed` overrides `rng_seed`.
pub fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<Config> {
    let mut cfg = match path {
        Some(p) if p.exists() => Config::load(p).with_context(|| format!("reading config {}", p.display()))?,
        Some(p) => {
            eprintln!("config {} not found, using defaults", p.display());
            Config::default()
        }
        None => Config::default(),
    };
    if let Some(s) = seed {
        cfg.rng_seed = s;
    }
    Ok(cfg)
}

fn write(path: PathBuf, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn load_image(path: &Path) -> Result<GrayImage> {
    GrayImage::load(path).with_context(|| format!("reading image {}", path.display()))
}

#[derive(Debug, Serialize)]
struct Timings {
    prepare_ms: f64,
    analyze_ms: f64,
    total_ms: f64,
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Writes the stage images, the contour polygons and the ridge points.
pub fn cli_prepare(image: &Path, cfg: &Config, out: &Path) -> Result<()> {
    let img = load_image(image)?;
    let prep = prepare(&img, cfg)?;
    fs::create_dir_all(out)?;
    for (name, stage) in prep.stages.stages() {
        stage.save(out.join(format!("stage_{name}.png")))?;
    }
    prep.segmentation.mask.to_image().save(out.join("mask.png"))?;
    write(out.join("contour.json"), prep.contour.to_json())?;
    write(out.join("ridges.json"), serde_json::to_string(&prep.ridges.points)?)?;
    eprintln!(
        "{} ridge points, {} contour polygons",
        prep.ridges.len(),
        prep.contour.polygons.len()
    );
    Ok(())
}

/// Automatic analysis: `report.json`, one profile CSV per segment, `overlay.png` and
/// `timings.json` in `out`.
pub fn cli_auto(image: &Path, cfg: &Config, out: &Path) -> Result<AnalysisReport> {
    let t0 = Instant::now();
    let img = load_image(image)?;
    let prep = prepare(&img, cfg)?;
    let prepare_ms = ms(t0);
    let t1 = Instant::now();
    let auto = analyze_auto(&prep, cfg)?;
    let analyze_ms = ms(t1);
    let name = image.file_stem().map_or("image".into(), |s| s.to_string_lossy().into_owned());
    let report = AnalysisReport::new(name, img.width(), img.height(), &auto);
    fs::create_dir_all(out)?;
    write(out.join("report.json"), report.to_json())?;
    for s in &auto.segments {
        write(out.join(format!("segment_{:03}.csv", s.id)), s.profile_csv())?;
    }
    write(
        out.join("overlay.png"),
        render_overlay(&img, &prep.contour, &auto.segments, &auto.findings, cfg)?,
    )?;
    let timings = Timings {
        prepare_ms,
        analyze_ms,
        total_ms: ms(t0),
    };
    write(out.join("timings.json"), serde_json::to_string_pretty(&timings)?)?;
    Ok(report)
}

/// Parses `x,y`.
pub fn parse_point(s: &str) -> Result<Point2, String> {
    let (x, y) = s.split_once(',').ok_or_else(|| format!("expected x,y, got `{s}`"))?;
    let x: f64 = x.trim().parse().map_err(|_| format!("bad x in `{s}`"))?;
    let y: f64 = y.trim().parse().map_err(|_| format!("bad y in `{s}`"))?;
    Ok(Point2::new(x, y))
}

/// Route between two clicks: `route.json`, `profile.csv` and `overlay.png`. When the
/// endpoint is unreachable the partial routes go to `partial_routes.json`.
pub fn cli_analyze_segment(image: &Path, start: Point2, end: Point2, cfg: &Config, out: &Path) -> Result<RouteResult> {
    let img = load_image(image)?;
    let prep = prepare(&img, cfg)?;
    fs::create_dir_all(out)?;
    let req = InteractiveRequest::new(start, end);
    let route = match track_segment(prep.tracking(), &prep.ridges, &prep.contour, &req, cfg) {
        Ok(r) => r,
        Err(Error::Unreachable { partial }) => {
            write(out.join("partial_routes.json"), serde_json::to_string_pretty(&partial)?)?;
            anyhow::bail!("endpoint unreachable from either direction");
        }
        Err(e) => return Err(e.into()),
    };
    write(out.join("route.json"), serde_json::to_string_pretty(&route)?)?;
    write(out.join("profile.csv"), route.segment.profile_csv())?;
    write(
        out.join("overlay.png"),
        render_overlay(&img, &prep.contour, std::slice::from_ref(&route.segment), &route.findings, cfg)?,
    )?;
    Ok(route)
}

/// Runs the standard phantom suite and writes `eval.json` and `eval.txt`. With
/// `save_phantoms` every phantom is also written as PGM plus truth JSON.
pub fn cli_eval_phantoms(cfg: &Config, seed: u64, radius: f64, out: &Path, save_phantoms: bool) -> Result<SuiteEval> {
    let specs = standard_suite();
    fs::create_dir_all(out)?;
    if save_phantoms {
        let dir = out.join("phantoms");
        fs::create_dir_all(&dir)?;
        for spec in &specs {
            let (img, truth) = render_phantom(spec, seed)?;
            write(dir.join(format!("{}.pgm", spec.name)), img.encode_pgm())?;
            write(dir.join(format!("{}.truth.json", spec.name)), truth.to_json())?;
            write(dir.join(format!("{}.spec.json", spec.name)), serde_json::to_string_pretty(spec)?)?;
        }
    }
    let eval = evaluate_suite(&specs, seed, cfg, radius)?;
    write(out.join("eval.json"), eval.to_json())?;
    write(out.join("eval.txt"), eval.to_text())?;
    Ok(eval)
}
