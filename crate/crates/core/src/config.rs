//! Run configuration and its flat `key = value` file format.
//!
//! Angles are held in radians; the file format takes degrees for every angle key.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::contour::{CvInput, CvParams};
use crate::error::ConfigError;
use crate::preprocess::{PreprocessParams, TrackingBlend};

/// RGB triple used by overlay rendering.
pub type Rgb = [u8; 3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlayStyle {
    pub centerline: Rgb,
    pub boundary: Rgb,
    pub finding: Rgb,
}

impl Default for OverlayStyle {
    fn default() -> Self {
        Self {
            centerline: [255, 64, 64],
            boundary: [64, 160, 255],
            finding: [255, 220, 0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    /// Tracking step / search radius `d` (px).
    pub search_radius_d: f64,
    /// Half-width of the tracking search arc (rad).
    pub delta_theta: f64,
    /// Inner radius of the bifurcation fan ring (px).
    pub bif_r1: f64,
    /// Outer radius of the bifurcation fan ring (px).
    pub bif_r2: f64,
    /// Half-width of the bifurcation fan ring (rad).
    pub bif_delta_theta: f64,
    /// Minimum tracking-image intensity `I_0` of an accepted point.
    pub gray_floor_i0: f64,
    /// Crowding threshold `tau_P` on nearby tracked points.
    pub crowd_tau_p: u32,
    /// Minimum angular offset of a branch point from the current direction (rad).
    pub tau_1: f64,
    /// Minimum angular offset of a branch point from the previous direction (rad).
    pub tau_2: f64,
    /// Minimum distance between a branch point and the current point (px).
    pub min_branch_dist_d: f64,
    /// Crowding threshold `tau_B` on nearby detected bifurcations.
    pub bif_crowd_tau_b: u32,
    /// Stenotic-degree threshold `tau_3`.
    pub stenosis_tau_3: f64,
    /// Weight of the endpoint attraction term in interactive tracking.
    pub energy_lambda: f64,
    /// Interactive tracking stops once this close to the endpoint (px).
    pub stop_tau_d: f64,
    /// Radius over which tracked points are counted for `N_P` (px).
    pub neighborhood_radius_p: f64,
    /// Radius over which bifurcations are counted for `N_B` (px).
    pub neighborhood_radius_b: f64,
    /// Gaussian scale of the derivatives used by ridge detection (px).
    pub ridge_sigma: f64,
    pub rng_seed: u64,
    /// Maximum number of seeds drawn by whole-tree tracking.
    pub seed_budget: usize,
    /// Whole-tree tracking stops once fewer than this fraction of ridge points are unvisited.
    pub coverage_stop_fraction: f64,
    /// Segments with fewer points are dropped before quantification.
    pub min_segment_points: usize,
    /// Stenotic runs with fewer points are not reported.
    pub min_finding_points: usize,
    /// Diameters above this multiple of the running median are rejected.
    pub diameter_outlier_factor: f64,
    pub preprocess: PreprocessParams,
    pub cv: CvParams,
    pub overlay: OverlayStyle,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            search_radius_d: 5.0,
            delta_theta: 45f64.to_radians(),
            bif_r1: 7.0,
            bif_r2: 12.0,
            bif_delta_theta: 135f64.to_radians(),
            gray_floor_i0: 10.0,
            crowd_tau_p: 4,
            tau_1: 45f64.to_radians(),
            tau_2: 30f64.to_radians(),
            min_branch_dist_d: 5.0,
            bif_crowd_tau_b: 2,
            stenosis_tau_3: 0.8,
            energy_lambda: 10000.0,
            stop_tau_d: 5.0,
            neighborhood_radius_p: 5.0,
            neighborhood_radius_b: 5.0,
            ridge_sigma: 1.5,
            rng_seed: 0,
            seed_budget: 200,
            coverage_stop_fraction: 0.01,
            min_segment_points: 5,
            min_finding_points: 2,
            diameter_outlier_factor: 4.0,
            preprocess: PreprocessParams::default(),
            cv: CvParams::default(),
            overlay: OverlayStyle::default(),
        }
    }
}

/// Default configuration.
pub fn config_default() -> Config {
    Config::default()
}

impl Config {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("search_radius_d", self.search_radius_d),
            ("delta_theta", self.delta_theta),
            ("bif_r1", self.bif_r1),
            ("bif_r2", self.bif_r2),
            ("bif_delta_theta", self.bif_delta_theta),
            ("gray_floor_i0", self.gray_floor_i0),
            ("tau_1", self.tau_1),
            ("tau_2", self.tau_2),
            ("min_branch_dist_d", self.min_branch_dist_d),
            ("energy_lambda", self.energy_lambda),
            ("stop_tau_d", self.stop_tau_d),
            ("neighborhood_radius_p", self.neighborhood_radius_p),
            ("neighborhood_radius_b", self.neighborhood_radius_b),
            ("ridge_sigma", self.ridge_sigma),
            ("diameter_outlier_factor", self.diameter_outlier_factor),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ConfigError::Invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.crowd_tau_p == 0 || self.bif_crowd_tau_b == 0 {
            return Err(ConfigError::Invalid("crowding thresholds must be positive".into()));
        }
        if !(self.stenosis_tau_3 > 0.0 && self.stenosis_tau_3 < 1.0) {
            return Err(ConfigError::Invalid(format!(
                "stenosis_tau_3 must lie in (0, 1), got {}",
                self.stenosis_tau_3
            )));
        }
        if self.bif_r1 >= self.bif_r2 {
            return Err(ConfigError::Invalid("bif_r1 must be smaller than bif_r2".into()));
        }
        if !(0.0..1.0).contains(&self.coverage_stop_fraction) {
            return Err(ConfigError::Invalid("coverage_stop_fraction must lie in [0, 1)".into()));
        }
        if self.min_segment_points < 2 || self.min_finding_points == 0 {
            return Err(ConfigError::Invalid("minimum point counts too small".into()));
        }
        self.preprocess.validate().map_err(ConfigError::Invalid)?;
        self.cv.validate().map_err(ConfigError::Invalid)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Parses `key = value` lines on top of the defaults. Blank lines and comments (`#`
    /// followed by whitespace or end of line) are skipped; unknown keys are rejected.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Config::default();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or(ConfigError::Syntax { line: line_no })?;
            if key.is_empty() || value.is_empty() {
                return Err(ConfigError::Syntax { line: line_no });
            }
            cfg.set(line_no, key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Copy with `key = value` overrides applied, validated.
    pub fn with_overrides<'a>(&self, pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self, ConfigError> {
        let mut cfg = self.clone();
        for (key, value) in pairs {
            cfg.set(0, key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, line: usize, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = || ConfigError::BadValue {
            line,
            key: key.to_string(),
            value: value.to_string(),
        };
        let real = || value.parse::<f64>().map_err(|_| bad());
        let deg = || real().map(f64::to_radians);
        let count = || value.parse::<u32>().map_err(|_| bad());
        let size = || value.parse::<usize>().map_err(|_| bad());
        let color = || parse_color(value).ok_or_else(bad);

        let pp = &mut self.preprocess;
        let cv = &mut self.cv;
        match key {
            "search_radius_d" => self.search_radius_d = real()?,
            "delta_theta" => self.delta_theta = deg()?,
            "bif_r1" => self.bif_r1 = real()?,
            "bif_r2" => self.bif_r2 = real()?,
            "bif_delta_theta" => self.bif_delta_theta = deg()?,
            "gray_floor_i0" => self.gray_floor_i0 = real()?,
            "crowd_tau_p" => self.crowd_tau_p = count()?,
            "tau_1" => self.tau_1 = deg()?,
            "tau_2" => self.tau_2 = deg()?,
            "min_branch_dist_d" => self.min_branch_dist_d = real()?,
            "bif_crowd_tau_b" => self.bif_crowd_tau_b = count()?,
            "stenosis_tau_3" => self.stenosis_tau_3 = real()?,
            "energy_lambda" => self.energy_lambda = real()?,
            "stop_tau_d" => self.stop_tau_d = real()?,
            "neighborhood_radius_p" => self.neighborhood_radius_p = real()?,
            "neighborhood_radius_b" => self.neighborhood_radius_b = real()?,
            "ridge_sigma" => self.ridge_sigma = real()?,
            "rng_seed" => self.rng_seed = value.parse().map_err(|_| bad())?,
            "seed_budget" => self.seed_budget = size()?,
            "coverage_stop_fraction" => self.coverage_stop_fraction = real()?,
            "min_segment_points" => self.min_segment_points = size()?,
            "min_finding_points" => self.min_finding_points = size()?,
            "diameter_outlier_factor" => self.diameter_outlier_factor = real()?,
            "rof_lambda" => pp.rof_lambda = real()?,
            "rof_iters" => pp.rof_iters = size()?,
            "um_amount" => pp.um_amount = real()?,
            "um_sigma" => pp.um_sigma = real()?,
            "clahe_tiles" => pp.clahe_tiles = size()?,
            "clahe_clip" => pp.clahe_clip = real()?,
            "frangi_scales" => {
                pp.frangi_scales = value
                    .split(',')
                    .map(|s| s.trim().parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| bad())?
            }
            "frangi_beta" => pp.frangi_beta = real()?,
            "frangi_c" => {
                pp.frangi_c = if value.eq_ignore_ascii_case("auto") {
                    None
                } else {
                    Some(real()?)
                }
            }
            "cv_mu" => cv.mu = real()?,
            "cv_nu" => cv.nu = real()?,
            "cv_lambda_in" => cv.lambda_in = real()?,
            "cv_lambda_out" => cv.lambda_out = real()?,
            "cv_dt" => cv.dt = real()?,
            "cv_eps" => cv.eps = real()?,
            "cv_max_iters" => cv.max_iters = size()?,
            "cv_tol" => cv.tol = real()?,
            "cv_init_percentile" => cv.init_percentile = real()?,
            "cv_input" => {
                cv.input = match value {
                    "denoised" => CvInput::Denoised,
                    "equalized" => CvInput::Equalized,
                    "blend" => CvInput::Blend,
                    _ => return Err(bad()),
                }
            }
            "tracking_sigma" => pp.tracking_sigma = real()?,
            "tracking_blend" => {
                pp.blend = match value {
                    "gated" => TrackingBlend::Gated,
                    "average" => TrackingBlend::Average,
                    _ => return Err(bad()),
                }
            }
            "overlay_centerline_color" => self.overlay.centerline = color()?,
            "overlay_boundary_color" => self.overlay.boundary = color()?,
            "overlay_finding_color" => self.overlay.finding = color()?,
            _ => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }
}

fn strip_comment(line: &str) -> &str {
    let bytes = line.as_bytes();
    for (i, &b) in bytes.iter().enumerate() {
        if b == b'#' && bytes.get(i + 1).is_none_or(u8::is_ascii_whitespace) {
            return &line[..i];
        }
    }
    line
}

/// `#rrggbb` or `r,g,b`.
fn parse_color(s: &str) -> Option<Rgb> {
    if let Some(hex) = s.strip_prefix('#') {
        if hex.len() != 6 {
            return None;
        }
        let v = u32::from_str_radix(hex, 16).ok()?;
        return Some([(v >> 16) as u8, (v >> 8) as u8, v as u8]);
    }
    let parts: Vec<u8> = s
        .split(',')
        .map(|p| p.trim().parse().ok())
        .collect::<Option<_>>()?;
    <[u8; 3]>::try_from(parts).ok()
}
