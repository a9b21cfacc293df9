//! Gaussian-scale Hessian analysis and the multiscale tubular (vesselness) response.

use serde::{Deserialize, Serialize};

use super::filters::{
    correlate_separable, gaussian_d1_kernel, gaussian_d2_kernel, gaussian_kernel, kernel_radius,
    Kernel1D,
};
use super::PreprocessParams;
use crate::error::{Error, Result};
use crate::geometry::{Direction2, Point2};
use crate::image::GrayImage;

/// Eigen-decomposition of a symmetric 2x2 Hessian, ordered `|lambda1| <= |lambda2|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HessianEigen {
    pub lambda1: f64,
    pub lambda2: f64,
    /// Eigenvector of `lambda1`: the direction of least curvature, i.e. along a vessel.
    pub principal_dir: Direction2,
}

/// Eigen-decomposition of `[[xx, xy], [xy, yy]]`.
pub fn eigen_sym2(xx: f64, xy: f64, yy: f64) -> HessianEigen {
    let mean = 0.5 * (xx + yy);
    let half_diff = 0.5 * (xx - yy);
    let radius = half_diff.hypot(xy);
    let (a, b) = (mean + radius, mean - radius);
    let (lambda1, lambda2) = if a.abs() <= b.abs() { (a, b) } else { (b, a) };
    // eigenvector of lambda1: angle phi with tan(2 phi) = 2 xy / (xx - yy) for the
    // larger eigenvalue, rotated by 90 degrees when lambda1 is the smaller one
    let phi_major = 0.5 * xy.atan2(half_diff);
    let phi = if lambda1 == a {
        phi_major
    } else {
        phi_major + std::f64::consts::FRAC_PI_2
    };
    HessianEigen {
        lambda1,
        lambda2,
        principal_dir: Direction2::from_angle(phi),
    }
}

/// Scale-normalized (`sigma^2`) second derivatives over the whole image.
#[derive(Debug, Clone)]
pub struct HessianField {
    pub width: usize,
    pub height: usize,
    pub sigma: f64,
    pub xx: Vec<f64>,
    pub xy: Vec<f64>,
    pub yy: Vec<f64>,
}

impl HessianField {
    pub fn compute(img: &GrayImage, sigma: f64) -> Self {
        let (w, h) = (img.width(), img.height());
        let g = gaussian_kernel(sigma);
        let d1 = gaussian_d1_kernel(sigma);
        let d2 = gaussian_d2_kernel(sigma);
        let s2 = sigma * sigma;
        let scale = |mut v: Vec<f64>| {
            v.iter_mut().for_each(|x| *x *= s2);
            v
        };
        Self {
            width: w,
            height: h,
            sigma,
            xx: scale(correlate_separable(img.data(), w, h, &d2, &g)),
            xy: scale(correlate_separable(img.data(), w, h, &d1, &d1)),
            yy: scale(correlate_separable(img.data(), w, h, &g, &d2)),
        }
    }

    #[inline]
    pub fn eigen(&self, x: usize, y: usize) -> HessianEigen {
        let i = y * self.width + x;
        eigen_sym2(self.xx[i], self.xy[i], self.yy[i])
    }

    /// Largest Frobenius norm over the image.
    pub fn max_norm(&self) -> f64 {
        (0..self.xx.len())
            .map(|i| (self.xx[i].powi(2) + 2.0 * self.xy[i].powi(2) + self.yy[i].powi(2)).sqrt())
            .fold(0.0, f64::max)
    }
}

/// Gaussian-derivative gradient over the whole image.
#[derive(Debug, Clone)]
pub struct GradientField {
    pub width: usize,
    pub height: usize,
    pub gx: Vec<f64>,
    pub gy: Vec<f64>,
}

impl GradientField {
    pub fn compute(img: &GrayImage, sigma: f64) -> Self {
        let (w, h) = (img.width(), img.height());
        let g = gaussian_kernel(sigma);
        let d1 = gaussian_d1_kernel(sigma);
        Self {
            width: w,
            height: h,
            gx: correlate_separable(img.data(), w, h, &d1, &g),
            gy: correlate_separable(img.data(), w, h, &g, &d1),
        }
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> (f64, f64) {
        let i = y * self.width + x;
        (self.gx[i], self.gy[i])
    }
}

/// Direct (non-separable) 2-D correlation at one pixel; the caller guarantees the
/// footprint is inside the image.
pub(crate) fn correlate_at(img: &GrayImage, x: usize, y: usize, kx: &Kernel1D, ky: &Kernel1D) -> f64 {
    let mut acc = 0.0;
    for (j, wy) in ky.offsets() {
        let yy = (y as isize + j) as usize;
        for (i, wx) in kx.offsets() {
            acc += img.get((x as isize + i) as usize, yy) * wx * wy;
        }
    }
    acc
}

/// Hessian eigen-analysis at the pixel nearest to `p`, computed by direct summation.
pub fn hessian_at(img: &GrayImage, p: Point2, sigma: f64) -> Result<HessianEigen> {
    let margin = kernel_radius(sigma) as f64;
    let (xr, yr) = p.round();
    let center = Point2::new(xr as f64, yr as f64);
    if !img.has_margin(center, margin) {
        return Err(Error::NearBorder {
            x: p.x,
            y: p.y,
            margin,
        });
    }
    let (x, y) = (xr as usize, yr as usize);
    let g = gaussian_kernel(sigma);
    let d1 = gaussian_d1_kernel(sigma);
    let d2 = gaussian_d2_kernel(sigma);
    let s2 = sigma * sigma;
    Ok(eigen_sym2(
        s2 * correlate_at(img, x, y, &d2, &g),
        s2 * correlate_at(img, x, y, &d1, &d1),
        s2 * correlate_at(img, x, y, &g, &d2),
    ))
}

/// Curvatures smaller than this are rounding noise of flat regions.
const CURVATURE_FLOOR: f64 = 1e-9;

/// Bright-tube response from ordered eigenvalues; zero unless `lambda2 < 0`.
pub fn tubular_response(lambda1: f64, lambda2: f64, beta: f64, c: f64) -> f64 {
    if !(lambda2 < -CURVATURE_FLOOR) || c <= 0.0 {
        return 0.0;
    }
    let rb = lambda1 / lambda2;
    let s2 = lambda1 * lambda1 + lambda2 * lambda2;
    (-(rb * rb) / (2.0 * beta * beta)).exp() * (1.0 - (-s2 / (2.0 * c * c)).exp())
}

/// Multiscale maximum of the tubular response, rescaled to `[0, 255]`.
pub fn vesselness(img: &GrayImage, params: &PreprocessParams) -> GrayImage {
    let (w, h) = (img.width(), img.height());
    let mut best = vec![0.0f64; w * h];
    let mut c = params.frangi_c;
    for &sigma in &params.frangi_scales {
        let field = HessianField::compute(img, sigma);
        let c = *c.get_or_insert_with(|| 0.5 * field.max_norm());
        for y in 0..h {
            for x in 0..w {
                let e = field.eigen(x, y);
                let v = tubular_response(e.lambda1, e.lambda2, params.frangi_beta, c);
                let b = &mut best[y * w + x];
                if v > *b {
                    *b = v;
                }
            }
        }
    }
    let peak = best.iter().cloned().fold(0.0, f64::max);
    if peak > 0.0 {
        best.iter_mut().for_each(|v| *v *= 255.0 / peak);
    }
    GrayImage::from_clamped(w, h, best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_ordering_and_direction() {
        let e = eigen_sym2(-0.1, 0.0, -5.0);
        assert!((e.lambda1 + 0.1).abs() < 1e-12 && (e.lambda2 + 5.0).abs() < 1e-12);
        assert!(e.principal_dir.uy.abs() < 1e-12);
        let e = eigen_sym2(-5.0, 0.0, -0.1);
        assert!(e.principal_dir.ux.abs() < 1e-12);
        // rotated 45 degrees: eigenvalues -3 (along (1,1)) and 1 (along (1,-1))
        let e = eigen_sym2(-1.0, -2.0, -1.0);
        assert!((e.lambda1 - 1.0).abs() < 1e-12 && (e.lambda2 + 3.0).abs() < 1e-12);
        let v = e.principal_dir;
        assert!((v.ux + v.uy).abs() < 1e-12);
    }

    #[test]
    fn quadratic_gives_exact_second_derivative() {
        // I = a (x - 30)^2 has I_xx = 2a everywhere
        let a = 0.02;
        let img = GrayImage::from_fn(61, 41, |x, _| a * (x as f64 - 30.0).powi(2));
        for sigma in [1.0, 2.0, 3.0] {
            let e = hessian_at(&img, Point2::new(30.0, 20.0), sigma).unwrap();
            assert!(e.lambda1.abs() < 1e-9, "{e:?}");
            assert!((e.lambda2 - 2.0 * a * sigma * sigma).abs() < 1e-9, "{e:?}");
        }
    }

    #[test]
    fn constant_has_zero_eigenvalues() {
        let img = GrayImage::filled(30, 30, 120.0);
        let e = hessian_at(&img, Point2::new(15.0, 15.0), 2.0).unwrap();
        assert!(e.lambda1.abs() < 1e-9 && e.lambda2.abs() < 1e-9);
    }

    #[test]
    fn border_rejected() {
        let img = GrayImage::filled(30, 30, 0.0);
        assert!(matches!(
            hessian_at(&img, Point2::new(2.0, 15.0), 1.0),
            Err(Error::NearBorder { .. })
        ));
    }

    #[test]
    fn field_matches_direct_summation_in_interior() {
        let img = GrayImage::from_fn(40, 40, |x, y| {
            100.0 + 50.0 * ((x as f64) * 0.3).sin() * ((y as f64) * 0.2).cos()
        });
        let field = HessianField::compute(&img, 1.5);
        for (x, y) in [(10, 10), (20, 25), (30, 12)] {
            let direct = hessian_at(&img, Point2::new(x as f64, y as f64), 1.5).unwrap();
            let sep = field.eigen(x, y);
            assert!((direct.lambda1 - sep.lambda1).abs() < 1e-9);
            assert!((direct.lambda2 - sep.lambda2).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_has_no_vesselness() {
        let img = GrayImage::filled(40, 40, 200.0);
        let v = vesselness(&img, &PreprocessParams::default());
        assert!(v.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn dark_line_gives_no_response() {
        let img = GrayImage::from_fn(40, 40, |_, y| if (18..=21).contains(&y) { 20.0 } else { 200.0 });
        let v = vesselness(&img, &PreprocessParams::default());
        assert!(v.get(20, 19) == 0.0 && v.get(20, 20) == 0.0);
    }
}
