//! Enhancement chain: TV denoising, unsharp masking, CLAHE and multiscale vesselness,
//! combined into the tracking image used by ridge detection and tracking.

mod clahe;
pub mod filters;
mod hessian;
mod rof;

use serde::{Deserialize, Serialize};

pub use clahe::{clahe, tile_map, TileMap};
pub use filters::gaussian_blur;
pub use hessian::{
    eigen_sym2, hessian_at, tubular_response, vesselness, GradientField, HessianEigen,
    HessianField,
};
pub use rof::{rof_denoise, total_variation, ROF_STEP};

use crate::error::Result;
use crate::image::GrayImage;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessParams {
    /// Fidelity weight of the TV model.
    pub rof_lambda: f64,
    pub rof_iters: usize,
    /// Unsharp-mask gain.
    pub um_amount: f64,
    /// Unsharp-mask blur scale (px).
    pub um_sigma: f64,
    /// Tiles per axis.
    pub clahe_tiles: usize,
    /// Clip limit as a fraction of the tile pixel count.
    pub clahe_clip: f64,
    /// Ascending Gaussian scales (px).
    pub frangi_scales: Vec<f64>,
    pub frangi_beta: f64,
    /// Structureness sensitivity; `None` picks half the largest Hessian norm at the
    /// smallest scale.
    pub frangi_c: Option<f64>,
    /// How the equalized image and the vesselness are combined for tracking.
    pub blend: TrackingBlend,
    /// Gaussian scale (px) applied to the blend to form the tracking image; 0 keeps
    /// the blend as is.
    pub tracking_sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TrackingBlend {
    /// `E * V / 255`: luminance gated by vesselness.
    #[default]
    Gated,
    /// `(E + V) / 2`.
    Average,
}

impl Default for PreprocessParams {
    fn default() -> Self {
        Self {
            rof_lambda: 0.125,
            rof_iters: 100,
            um_amount: 1.0,
            um_sigma: 2.0,
            clahe_tiles: 8,
            clahe_clip: 0.01,
            frangi_scales: vec![1.0, 2.0, 3.0, 4.0],
            frangi_beta: 0.5,
            frangi_c: None,
            blend: TrackingBlend::Gated,
            tracking_sigma: 3.0,
        }
    }
}

impl PreprocessParams {
    pub fn validate(&self) -> std::result::Result<(), String> {
        let ok = self.rof_lambda > 0.0
            && self.rof_iters > 0
            && self.um_amount > 0.0
            && self.um_sigma > 0.0
            && self.clahe_tiles > 0
            && self.clahe_clip > 0.0
            && self.frangi_beta > 0.0
            && self.frangi_c.is_none_or(|c| c > 0.0)
            && self.tracking_sigma >= 0.0;
        if !ok {
            return Err("preprocessing parameters must be positive".into());
        }
        if self.frangi_scales.is_empty()
            || self.frangi_scales.iter().any(|s| !(*s > 0.0))
            || self.frangi_scales.windows(2).any(|w| w[1] <= w[0])
        {
            return Err("frangi_scales must be a nonempty ascending list of positive scales".into());
        }
        Ok(())
    }
}

/// `clamp(img + amount * (img - blur(img)))`.
pub fn unsharp_mask(img: &GrayImage, params: &PreprocessParams) -> GrayImage {
    let blurred = gaussian_blur(img, params.um_sigma);
    let k = params.um_amount;
    let out = img
        .data()
        .iter()
        .zip(blurred.data())
        .map(|(v, b)| v + k * (v - b))
        .collect();
    GrayImage::from_clamped(img.width(), img.height(), out)
}

/// Every intermediate stage of [`preprocess`].
#[derive(Debug, Clone)]
pub struct Preprocessed {
    pub denoised: GrayImage,
    pub sharpened: GrayImage,
    pub equalized: GrayImage,
    pub vesselness: GrayImage,
    /// Equalized image combined with the vesselness.
    pub blend: GrayImage,
    /// Smoothed blend, on which ridges are detected and tracking runs.
    pub tracking: GrayImage,
}

impl Preprocessed {
    pub fn stages(&self) -> [(&'static str, &GrayImage); 6] {
        [
            ("denoised", &self.denoised),
            ("sharpened", &self.sharpened),
            ("equalized", &self.equalized),
            ("vesselness", &self.vesselness),
            ("blend", &self.blend),
            ("tracking", &self.tracking),
        ]
    }
}

/// Tracking image combining the equalized luminance and the vesselness.
pub fn tracking_blend(equalized: &GrayImage, vessel: &GrayImage, blend: TrackingBlend) -> GrayImage {
    let out = equalized
        .data()
        .iter()
        .zip(vessel.data())
        .map(|(e, v)| match blend {
            TrackingBlend::Gated => e * v / 255.0,
            TrackingBlend::Average => 0.5 * (e + v),
        })
        .collect();
    GrayImage::from_clamped(equalized.width(), equalized.height(), out)
}

/// ROF, then unsharp masking, then CLAHE, then vesselness, then the blend and its
/// smoothed tracking image.
pub fn preprocess(img: &GrayImage, params: &PreprocessParams) -> Result<Preprocessed> {
    let denoised = rof_denoise(img, params);
    let sharpened = unsharp_mask(&denoised, params);
    let equalized = clahe(&sharpened, params)?;
    let vessel = vesselness(&equalized, params);
    let blend = tracking_blend(&equalized, &vessel, params.blend);
    let tracking = if params.tracking_sigma > 0.0 {
        gaussian_blur(&blend, params.tracking_sigma)
    } else {
        blend.clone()
    };
    Ok(Preprocessed {
        denoised,
        sharpened,
        equalized,
        vesselness: vessel,
        blend,
        tracking,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unsharp_constant_and_ramp() {
        let p = PreprocessParams::default();
        let flat = GrayImage::filled(40, 40, 90.0);
        assert!(unsharp_mask(&flat, &p).data().iter().all(|v| (v - 90.0).abs() < 1e-9));
        let ramp = GrayImage::from_fn(60, 20, |x, _| 3.0 * x as f64 + 5.0);
        let out = unsharp_mask(&ramp, &p);
        for x in 10..50 {
            assert!((out.get(x, 10) - ramp.get(x, 10)).abs() < 1e-9);
        }
    }

    #[test]
    fn unsharp_brightens_thin_line_center() {
        let img = GrayImage::from_fn(40, 40, |_, y| if y == 20 || y == 21 { 150.0 } else { 50.0 });
        let out = unsharp_mask(&img, &PreprocessParams::default());
        assert!(out.get(20, 20) > img.get(20, 20));
        assert!(out.get(20, 21) > img.get(20, 21));
    }

    #[test]
    fn default_params_validate() {
        PreprocessParams::default().validate().unwrap();
        let bad = PreprocessParams {
            frangi_scales: vec![2.0, 1.0],
            ..PreprocessParams::default()
        };
        assert!(bad.validate().is_err());
    }
}
