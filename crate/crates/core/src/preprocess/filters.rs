//! Sampled Gaussian derivative kernels and separable correlation with mirror padding.
//!
//! Kernels are indexed by offset `i` in `[-r, r]` and applied as a correlation,
//! `out(x) = sum_i f(x + i) * k(i)`. Derivative kernels are moment-normalized so that
//! the first-derivative kernel is exact on linear ramps and the second-derivative
//! kernel is exact on quadratics.

use crate::image::{mirror_index, GrayImage};

/// Odd-length kernel with `radius` taps on each side of the center.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel1D {
    pub radius: usize,
    pub taps: Vec<f64>,
}

impl Kernel1D {
    #[inline]
    pub fn tap(&self, offset: isize) -> f64 {
        self.taps[(offset + self.radius as isize) as usize]
    }

    pub fn offsets(&self) -> impl Iterator<Item = (isize, f64)> + '_ {
        let r = self.radius as isize;
        self.taps.iter().enumerate().map(move |(i, &k)| (i as isize - r, k))
    }
}

/// Truncation radius `ceil(3 sigma)`, at least one tap.
pub fn kernel_radius(sigma: f64) -> usize {
    ((3.0 * sigma).ceil() as usize).max(1)
}

fn gaussian_weights(sigma: f64, radius: usize) -> Vec<f64> {
    let r = radius as isize;
    (-r..=r)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect()
}

/// Smoothing kernel, normalized to unit sum.
pub fn gaussian_kernel(sigma: f64) -> Kernel1D {
    let radius = kernel_radius(sigma);
    let mut taps = gaussian_weights(sigma, radius);
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    Kernel1D { radius, taps }
}

/// First-derivative kernel: zero sum, first moment 1.
pub fn gaussian_d1_kernel(sigma: f64) -> Kernel1D {
    let radius = kernel_radius(sigma);
    let g = gaussian_weights(sigma, radius);
    let r = radius as isize;
    let mut taps: Vec<f64> = (-r..=r).zip(&g).map(|(i, w)| i as f64 * w).collect();
    let moment: f64 = (-r..=r).zip(&taps).map(|(i, k)| i as f64 * k).sum();
    taps.iter_mut().for_each(|t| *t /= moment);
    Kernel1D { radius, taps }
}

/// Second-derivative kernel: zero sum, zero first moment, second moment 2.
pub fn gaussian_d2_kernel(sigma: f64) -> Kernel1D {
    let radius = kernel_radius(sigma);
    let g = gaussian_weights(sigma, radius);
    let r = radius as isize;
    let g_sum: f64 = g.iter().sum();
    let var: f64 = (-r..=r).zip(&g).map(|(i, w)| (i * i) as f64 * w).sum::<f64>() / g_sum;
    let mut taps: Vec<f64> = (-r..=r)
        .zip(&g)
        .map(|(i, w)| ((i * i) as f64 - var) * w)
        .collect();
    let m2: f64 = (-r..=r).zip(&taps).map(|(i, k)| (i * i) as f64 * k).sum();
    taps.iter_mut().for_each(|t| *t *= 2.0 / m2);
    Kernel1D { radius, taps }
}

/// Separable correlation: `kx` along rows, then `ky` along columns. Mirror padding.
pub fn correlate_separable(
    data: &[f64],
    width: usize,
    height: usize,
    kx: &Kernel1D,
    ky: &Kernel1D,
) -> Vec<f64> {
    let mut tmp = vec![0.0; width * height];
    let rx = kx.radius as isize;
    let x_index: Vec<Vec<usize>> = (0..width as isize)
        .map(|x| (-rx..=rx).map(|i| mirror_index(x + i, width)).collect())
        .collect();
    for y in 0..height {
        let row = &data[y * width..(y + 1) * width];
        let out = &mut tmp[y * width..(y + 1) * width];
        for (x, idx) in x_index.iter().enumerate() {
            out[x] = idx.iter().zip(&kx.taps).map(|(&j, k)| row[j] * k).sum();
        }
    }
    let ry = ky.radius as isize;
    let mut out = vec![0.0; width * height];
    for y in 0..height as isize {
        let rows: Vec<usize> = (-ry..=ry).map(|j| mirror_index(y + j, height)).collect();
        let dst = &mut out[y as usize * width..(y as usize + 1) * width];
        for (&src_row, k) in rows.iter().zip(&ky.taps) {
            let src = &tmp[src_row * width..(src_row + 1) * width];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += k * s;
            }
        }
    }
    out
}

pub fn gaussian_blur(img: &GrayImage, sigma: f64) -> GrayImage {
    let k = gaussian_kernel(sigma);
    let out = correlate_separable(img.data(), img.width(), img.height(), &k, &k);
    GrayImage::from_clamped(img.width(), img.height(), out)
}
