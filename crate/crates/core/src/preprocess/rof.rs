//! Total-variation denoising by fixed-point projection on the dual field.
//!
//! Minimizes `TV(u) + (lambda / 2) * ||u - f||^2` with the dual iteration
//! `p <- (p + tau * grad(div p - lambda f)) / (1 + tau * |grad(div p - lambda f)|)`
//! and recovers `u = f - div(p) / lambda`.

use super::PreprocessParams;
use crate::image::GrayImage;

/// Dual step size.
pub const ROF_STEP: f64 = 0.248;

pub fn rof_denoise(img: &GrayImage, params: &PreprocessParams) -> GrayImage {
    let (w, h) = (img.width(), img.height());
    let f = img.data();
    let lambda = params.rof_lambda;
    let n = w * h;
    let mut px = vec![0.0; n];
    let mut py = vec![0.0; n];
    let mut div = vec![0.0; n];
    let mut v = vec![0.0; n];

    for _ in 0..params.rof_iters {
        divergence(&px, &py, w, h, &mut div);
        for i in 0..n {
            v[i] = div[i] - lambda * f[i];
        }
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                let gx = if x + 1 < w { v[i + 1] - v[i] } else { 0.0 };
                let gy = if y + 1 < h { v[i + w] - v[i] } else { 0.0 };
                let denom = 1.0 + ROF_STEP * gx.hypot(gy);
                px[i] = (px[i] + ROF_STEP * gx) / denom;
                py[i] = (py[i] + ROF_STEP * gy) / denom;
            }
        }
    }
    divergence(&px, &py, w, h, &mut div);
    let out = f.iter().zip(&div).map(|(fi, d)| fi - d / lambda).collect();
    GrayImage::from_clamped(w, h, out)
}

/// Negative adjoint of the forward-difference gradient.
fn divergence(px: &[f64], py: &[f64], w: usize, h: usize, out: &mut [f64]) {
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let dx = match x {
                0 => px[i],
                _ if x + 1 == w => -px[i - 1],
                _ => px[i] - px[i - 1],
            };
            let dy = match y {
                0 => py[i],
                _ if y + 1 == h => -py[i - w],
                _ => py[i] - py[i - w],
            };
            out[i] = dx + dy;
        }
    }
}

/// Isotropic discrete total variation with forward differences.
pub fn total_variation(img: &GrayImage) -> f64 {
    let (w, h) = (img.width(), img.height());
    let f = img.data();
    let mut tv = 0.0;
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let gx = if x + 1 < w { f[i + 1] - f[i] } else { 0.0 };
            let gy = if y + 1 < h { f[i + w] - f[i] } else { 0.0 };
            tv += gx.hypot(gy);
        }
    }
    tv
}
