//! Two-phase piecewise-constant Chan-Vese evolution.
//!
//! Semi-implicit Gauss-Seidel sweeps on the level set `phi`, with the regularized
//! delta in the time derivative and sharp phase means. Intensities are scaled to
//! `[0, 1]` internally, so `mu` and `nu` are divided by `255^2`.
//!
//! The monitored energy is the sharp two-phase one, with the length of the
//! partition measured as the discrete total variation of its indicator. A sweep that
//! would raise it is retried with half the time step, so the recorded energy sequence
//! never increases.

use std::f64::consts::PI;

use super::{CvParams, VesselMask};
use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Regularization of `|grad phi|` in the curvature weights. It bounds the weights
/// where `phi` is flat, which the two-valued initialization makes common.
const ETA: f64 = 0.1;
const MAX_HALVINGS: u32 = 10;
/// Initial `|phi|`, as a fraction of `eps`.
const PHI0: f64 = 0.1;
/// Consecutive quiet sweeps required before stopping.
const QUIET_SWEEPS: usize = 10;

#[derive(Debug, Clone)]
pub struct CvOutcome {
    pub mask: VesselMask,
    /// Final inside/outside means in 8-bit units.
    pub c_inside: f64,
    pub c_outside: f64,
    pub iterations: usize,
    /// Energy before the first sweep and after each accepted sweep.
    pub energies: Vec<f64>,
    /// One phase vanished.
    pub degenerate: bool,
}

#[inline]
fn delta(phi: f64, eps: f64) -> f64 {
    eps / (PI * (eps * eps + phi * phi))
}

struct Scaled {
    mu: f64,
    nu: f64,
    l_in: f64,
    l_out: f64,
    eps: f64,
}

impl Scaled {
    fn new(p: &CvParams) -> Self {
        let s = 255.0 * 255.0;
        Self {
            mu: p.mu / s,
            nu: p.nu / s,
            l_in: p.lambda_in,
            l_out: p.lambda_out,
            eps: p.eps,
        }
    }
}

fn region_means(f: &[f64], phi: &[f64]) -> (f64, f64) {
    let (mut s1, mut n1, mut s2, mut n2) = (0.0, 0usize, 0.0, 0usize);
    for (&v, &p) in f.iter().zip(phi) {
        if p > 0.0 {
            s1 += v;
            n1 += 1;
        } else {
            s2 += v;
            n2 += 1;
        }
    }
    (
        if n1 > 0 { s1 / n1 as f64 } else { 0.0 },
        if n2 > 0 { s2 / n2 as f64 } else { 0.0 },
    )
}

fn energy(f: &[f64], phi: &[f64], w: usize, h: usize, c1: f64, c2: f64, k: &Scaled) -> f64 {
    let inside = |i: usize| (phi[i] > 0.0) as u8 as f64;
    let mut e = 0.0;
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let chi = inside(i);
            let gx = if x + 1 < w { inside(i + 1) - chi } else { 0.0 };
            let gy = if y + 1 < h { inside(i + w) - chi } else { 0.0 };
            e += k.mu * gx.hypot(gy)
                + k.nu * chi
                + k.l_in * (f[i] - c1).powi(2) * chi
                + k.l_out * (f[i] - c2).powi(2) * (1.0 - chi);
        }
    }
    e
}

/// Energy of the partition `phi > 0` of `img`, with phase means taken from it.
pub fn cv_energy(img: &GrayImage, phi: &[f64], params: &CvParams) -> f64 {
    let f: Vec<f64> = img.data().iter().map(|v| v / 255.0).collect();
    let k = Scaled::new(params);
    let (c1, c2) = region_means(&f, phi);
    energy(&f, phi, img.width(), img.height(), c1, c2, &k)
}

fn sweep(f: &[f64], phi: &mut [f64], w: usize, h: usize, c1: f64, c2: f64, dt: f64, k: &Scaled) {
    let eta2 = ETA * ETA;
    for y in 0..h {
        let (yu, yd) = (y.saturating_sub(1), (y + 1).min(h - 1));
        for x in 0..w {
            let (xl, xr) = (x.saturating_sub(1), (x + 1).min(w - 1));
            let at = |xx: usize, yy: usize| phi[yy * w + xx];
            let p = at(x, y);
            let c_r = 1.0 / (eta2 + (at(xr, y) - p).powi(2) + (0.5 * (at(x, yd) - at(x, yu))).powi(2)).sqrt();
            let c_l = 1.0 / (eta2 + (p - at(xl, y)).powi(2) + (0.5 * (at(xl, yd) - at(xl, yu))).powi(2)).sqrt();
            let c_d = 1.0 / (eta2 + (0.5 * (at(xr, y) - at(xl, y))).powi(2) + (at(x, yd) - p).powi(2)).sqrt();
            let c_u = 1.0 / (eta2 + (0.5 * (at(xr, yu) - at(xl, yu))).powi(2) + (p - at(x, yu)).powi(2)).sqrt();
            let d = dt * delta(p, k.eps);
            let m = d * k.mu;
            let i = y * w + x;
            let num = p
                + m * (c_r * at(xr, y) + c_l * at(xl, y) + c_d * at(x, yd) + c_u * at(x, yu))
                + d * (-k.nu - k.l_in * (f[i] - c1).powi(2) + k.l_out * (f[i] - c2).powi(2));
            phi[i] = num / (1.0 + m * (c_r + c_l + c_d + c_u));
        }
    }
}

/// Mask of the pixels strictly above the `percentile`-th intensity percentile.
pub fn percentile_mask(img: &GrayImage, percentile: f64) -> VesselMask {
    let mut sorted = img.data().to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((percentile / 100.0) * (sorted.len() - 1) as f64).round() as usize;
    let cut = sorted[rank.min(sorted.len() - 1)].round();
    VesselMask {
        width: img.width(),
        height: img.height(),
        inside: img.data().iter().map(|&v| v.round() > cut).collect(),
    }
}

pub fn chan_vese(img: &GrayImage, params: &CvParams, init: &VesselMask) -> Result<CvOutcome> {
    if init.is_empty() {
        return Err(Error::DegenerateInit("initial mask is empty"));
    }
    if init.is_full() {
        return Err(Error::DegenerateInit("initial mask covers the whole image"));
    }
    let (w, h) = (img.width(), img.height());
    let f: Vec<f64> = img.data().iter().map(|v| v / 255.0).collect();
    let k = Scaled::new(params);
    let phi0 = PHI0 * params.eps;
    let mut phi: Vec<f64> = init.inside.iter().map(|&b| if b { phi0 } else { -phi0 }).collect();
    let (mut c1, mut c2) = region_means(&f, &phi);
    let mut e = energy(&f, &phi, w, h, c1, c2, &k);
    let mut energies = vec![e];
    let mut iterations = 0;
    let mut quiet = 0;

    'outer: while iterations < params.max_iters {
        let mut dt = params.dt;
        let mut halvings = 0;
        let (trial, n1, n2, e_new) = loop {
            let mut trial = phi.clone();
            sweep(&f, &mut trial, w, h, c1, c2, dt, &k);
            let (n1, n2) = region_means(&f, &trial);
            let e_new = energy(&f, &trial, w, h, n1, n2, &k);
            if e_new <= e {
                break (trial, n1, n2, e_new);
            }
            halvings += 1;
            if halvings > MAX_HALVINGS {
                break 'outer;
            }
            dt *= 0.5;
        };
        iterations += 1;
        let flipped = phi.iter().zip(&trial).any(|(a, b)| (*a > 0.0) != (*b > 0.0));
        let moved = (n1 - c1).abs().max((n2 - c2).abs());
        let step = phi.iter().zip(&trial).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        phi = trial;
        (c1, c2, e) = (n1, n2, e_new);
        energies.push(e);
        quiet = if !flipped && moved < params.tol && step < params.tol * params.eps { quiet + 1 } else { 0 };
        if quiet >= QUIET_SWEEPS {
            break;
        }
    }

    let mut inside: Vec<bool> = phi.iter().map(|&p| p > 0.0).collect();
    let (mut c_in, mut c_out) = (c1, c2);
    if c_in < c_out {
        inside.iter_mut().for_each(|b| *b = !*b);
        std::mem::swap(&mut c_in, &mut c_out);
    }
    let mask = VesselMask {
        width: w,
        height: h,
        inside,
    };
    let degenerate = mask.is_empty() || mask.is_full();
    Ok(CvOutcome {
        mask,
        c_inside: c_in * 255.0,
        c_outside: c_out * 255.0,
        iterations,
        energies,
        degenerate,
    })
}
