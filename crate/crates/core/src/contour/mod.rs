//! Two-phase Chan-Vese segmentation and sub-pixel vessel contours.

mod chan_vese;
mod marching;
mod polygon;

use serde::{Deserialize, Serialize};

pub use chan_vese::{chan_vese, cv_energy, percentile_mask, CvOutcome};
pub use marching::{extract_contours, extract_contours_on_field};
pub use polygon::{
    nearest_pair, ray_contour_intersections, ray_hits, signed_area, Polygon, RayHit,
    VesselContour,
};

use crate::image::GrayImage;

/// Chan-Vese parameters. `mu` and `nu` are expressed for 8-bit intensities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvParams {
    /// Length penalty.
    pub mu: f64,
    /// Area penalty.
    pub nu: f64,
    pub lambda_in: f64,
    pub lambda_out: f64,
    pub dt: f64,
    /// Width of the regularized Heaviside.
    pub eps: f64,
    pub max_iters: usize,
    /// Stop once, for several consecutive sweeps, neither phase mean moves by more
    /// than this fraction of the intensity range, no pixel changes phase and `phi`
    /// moves by less than `tol * eps` everywhere.
    pub tol: f64,
    /// Pixels above this intensity percentile form the initial inside phase.
    pub init_percentile: f64,
    /// Preprocessing stage the segmentation runs on.
    pub input: CvInput,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CvInput {
    Denoised,
    Equalized,
    #[default]
    Blend,
}

impl Default for CvParams {
    fn default() -> Self {
        Self {
            mu: 0.2 * 255.0 * 255.0,
            nu: 0.0,
            lambda_in: 1.0,
            lambda_out: 1.0,
            dt: 0.5,
            eps: 1.0,
            max_iters: 300,
            tol: 1e-3,
            init_percentile: 85.0,
            input: CvInput::Blend,
        }
    }
}

impl CvParams {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(self.mu > 0.0 && self.dt > 0.0 && self.eps > 0.0 && self.tol > 0.0) || self.max_iters == 0 {
            return Err("cv_mu, cv_dt, cv_eps, cv_tol and cv_max_iters must be positive".into());
        }
        if !(self.nu >= 0.0 && self.lambda_in > 0.0 && self.lambda_out > 0.0) {
            return Err("cv_nu must be non-negative and the region weights positive".into());
        }
        if !(0.0..100.0).contains(&self.init_percentile) {
            return Err("cv_init_percentile must lie in [0, 100)".into());
        }
        Ok(())
    }
}

/// Binary vessel/background partition, `true` = vessel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VesselMask {
    pub width: usize,
    pub height: usize,
    pub inside: Vec<bool>,
}

impl VesselMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            inside: vec![false; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut inside = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                inside.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            inside,
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.inside[y * self.width + x]
    }

    /// Out-of-bounds coordinates read as background.
    #[inline]
    pub fn get_signed(&self, x: isize, y: isize) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.inside[y as usize * self.width + x as usize]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.inside[y * self.width + x] = v;
    }

    pub fn area(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.inside.iter().any(|&b| b)
    }

    pub fn is_full(&self) -> bool {
        self.inside.iter().all(|&b| b)
    }

    /// Intersection over union; two empty masks give 1.
    pub fn iou(&self, other: &VesselMask) -> f64 {
        let (mut inter, mut union) = (0usize, 0usize);
        for (&a, &b) in self.inside.iter().zip(&other.inside) {
            inter += (a && b) as usize;
            union += (a || b) as usize;
        }
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    }

    /// Mean of `img` over each phase, `(inside, outside)`; `None` for an empty phase.
    pub fn phase_means(&self, img: &GrayImage) -> (Option<f64>, Option<f64>) {
        let (mut si, mut ni, mut so, mut no) = (0.0, 0usize, 0.0, 0usize);
        for (&m, &v) in self.inside.iter().zip(img.data()) {
            if m {
                si += v;
                ni += 1;
            } else {
                so += v;
                no += 1;
            }
        }
        let mean = |s: f64, n: usize| (n > 0).then(|| s / n as f64);
        (mean(si, ni), mean(so, no))
    }

    /// Reclassifies the pixels within `band` (chessboard distance) of the phase
    /// boundary by thresholding `field` at `level`. Pixels farther away keep their
    /// phase.
    pub fn refine_boundary(&self, field: &GrayImage, level: f64, band: usize) -> VesselMask {
        let (w, h) = (self.width, self.height);
        let b = band as isize;
        let near_boundary = |x: usize, y: usize| {
            let v = self.get(x, y);
            (-b..=b).any(|dy| {
                (-b..=b).any(|dx| {
                    let (xx, yy) = (x as isize + dx, y as isize + dy);
                    xx >= 0 && yy >= 0 && (xx as usize) < w && (yy as usize) < h && self.get(xx as usize, yy as usize) != v
                })
            })
        };
        VesselMask::from_fn(w, h, |x, y| {
            if band > 0 && near_boundary(x, y) {
                field.get(x, y) > level
            } else {
                self.get(x, y)
            }
        })
    }

    /// Black/white raster for debugging output.
    pub fn to_image(&self) -> GrayImage {
        let data = self.inside.iter().map(|&b| if b { 255.0 } else { 0.0 }).collect();
        GrayImage::from_clamped(self.width, self.height, data)
    }
}
