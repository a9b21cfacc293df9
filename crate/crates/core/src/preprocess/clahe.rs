//! Contrast-limited adaptive histogram equalization.

use super::PreprocessParams;
use crate::error::{Error, Result};
use crate::image::GrayImage;

const BINS: usize = 256;

/// Equalization map of one tile, `map[b]` for intensity bin `b`.
#[derive(Debug, Clone)]
pub struct TileMap {
    pub map: [f64; BINS],
}

impl TileMap {
    /// Piecewise-linear evaluation between integer bins.
    fn eval(&self, v: f64) -> f64 {
        let v = v.clamp(0.0, 255.0);
        let lo = v.floor() as usize;
        let hi = (lo + 1).min(BINS - 1);
        let t = v - lo as f64;
        self.map[lo] * (1.0 - t) + self.map[hi] * t
    }
}

/// Clipped-histogram equalization map for the given samples.
///
/// Bins above `clip_fraction * n` are cut to that height and the removed mass is
/// spread evenly over all bins before accumulating.
pub fn tile_map(samples: impl Iterator<Item = f64>, clip_fraction: f64) -> TileMap {
    let mut hist = [0.0f64; BINS];
    let mut n = 0usize;
    for v in samples {
        hist[v.round().clamp(0.0, 255.0) as usize] += 1.0;
        n += 1;
    }
    let mut map = [0.0; BINS];
    if n == 0 {
        return TileMap { map };
    }
    let clip = clip_fraction * n as f64;
    let mut excess = 0.0;
    for h in &mut hist {
        if *h > clip {
            excess += *h - clip;
            *h = clip;
        }
    }
    let share = excess / BINS as f64;
    let mut cdf = 0.0;
    for (m, h) in map.iter_mut().zip(&hist) {
        cdf += h + share;
        *m = 255.0 * cdf / n as f64;
    }
    TileMap { map }
}

fn tile_bounds(len: usize, tiles: usize) -> Vec<usize> {
    (0..=tiles).map(|i| i * len / tiles).collect()
}

/// Interpolation cell lookup: the pair of tile indices bracketing `pos` and the weight of
/// the second one.
fn bracket(centers: &[f64], pos: f64) -> (usize, usize, f64) {
    let last = centers.len() - 1;
    if pos <= centers[0] {
        return (0, 0, 0.0);
    }
    if pos >= centers[last] {
        return (last, last, 0.0);
    }
    let i = centers.iter().rposition(|&c| c <= pos).unwrap_or(0).min(last - 1);
    let t = (pos - centers[i]) / (centers[i + 1] - centers[i]);
    (i, i + 1, t)
}

pub fn clahe(img: &GrayImage, params: &PreprocessParams) -> Result<GrayImage> {
    let tiles = params.clahe_tiles;
    let (w, h) = (img.width(), img.height());
    if tiles == 0 || w < tiles || h < tiles {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            tiles,
        });
    }
    let xb = tile_bounds(w, tiles);
    let yb = tile_bounds(h, tiles);
    let maps: Vec<TileMap> = (0..tiles)
        .flat_map(|ty| (0..tiles).map(move |tx| (tx, ty)))
        .map(|(tx, ty)| {
            let samples = (yb[ty]..yb[ty + 1])
                .flat_map(|y| (xb[tx]..xb[tx + 1]).map(move |x| img.get(x, y)));
            tile_map(samples, params.clahe_clip)
        })
        .collect();
    let centers = |b: &[usize]| -> Vec<f64> {
        b.windows(2).map(|s| 0.5 * (s[0] + s[1]) as f64 - 0.5).collect()
    };
    let cx = centers(&xb);
    let cy = centers(&yb);
    let x_cells: Vec<_> = (0..w).map(|x| bracket(&cx, x as f64)).collect();

    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let (y0, y1, ty) = bracket(&cy, y as f64);
        for (x, &(x0, x1, tx)) in x_cells.iter().enumerate() {
            let v = img.get(x, y);
            let m = |ix: usize, iy: usize| maps[iy * tiles + ix].eval(v);
            let top = m(x0, y0) * (1.0 - tx) + m(x1, y0) * tx;
            let bottom = m(x0, y1) * (1.0 - tx) + m(x1, y1) * tx;
            out.push(top * (1.0 - ty) + bottom * ty);
        }
    }
    Ok(GrayImage::from_clamped(w, h, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(tiles: usize, clip: f64) -> PreprocessParams {
        PreprocessParams {
            clahe_tiles: tiles,
            clahe_clip: clip,
            ..PreprocessParams::default()
        }
    }

    #[test]
    fn constant_stays_constant() {
        let img = GrayImage::filled(64, 48, 77.0);
        let out = clahe(&img, &params(8, 0.01)).unwrap();
        let first = out.data()[0];
        assert!(out.data().iter().all(|&v| (v - first).abs() < 1e-9));
    }

    #[test]
    fn two_level_tile_map_by_hand() {
        // 50 samples at 40 and 50 at 60; clip 1.0 leaves the histogram intact, so the
        // cumulative fractions are 0.5 at bin 40 and 1.0 at bin 60.
        let samples = (0..100).map(|i| if i % 2 == 0 { 40.0 } else { 60.0 });
        let m = tile_map(samples, 1.0);
        assert!((m.map[40] - 127.5).abs() < 1e-9);
        assert!((m.map[60] - 255.0).abs() < 1e-9);
        assert!(m.map[39] == 0.0);
    }

    #[test]
    fn two_level_contrast_grows() {
        let img = GrayImage::from_fn(32, 32, |x, y| if (x + y) % 2 == 0 { 40.0 } else { 60.0 });
        let out = clahe(&img, &params(4, 1.0)).unwrap();
        let lo = out.data().iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = out.data().iter().cloned().fold(0.0, f64::max);
        assert!(hi - lo >= 20.0, "contrast {}", hi - lo);
    }

    #[test]
    fn clipped_map_by_hand() {
        // 10 samples all at bin 0 with clip 0.1: one count stays, nine are spread as
        // 9/256 per bin.
        let m = tile_map(std::iter::repeat_n(0.0, 10), 0.1);
        let share = 9.0 / 256.0;
        assert!((m.map[0] - 255.0 * (1.0 + share) / 10.0).abs() < 1e-9);
        assert!((m.map[255] - 255.0).abs() < 1e-9);
    }

    #[test]
    fn maps_are_monotone() {
        let samples: Vec<f64> = (0..997).map(|i| ((i * 37) % 251) as f64).collect();
        for clip in [0.001, 0.01, 0.1, 1.0] {
            let m = tile_map(samples.iter().copied(), clip);
            assert!(m.map.windows(2).all(|p| p[1] >= p[0]));
        }
    }

    #[test]
    fn too_small_for_grid() {
        let img = GrayImage::filled(6, 20, 1.0);
        assert!(matches!(
            clahe(&img, &params(8, 0.01)),
            Err(Error::ImageTooSmall { .. })
        ));
    }
}
