//! Scalar raster type and 8-bit grayscale PGM/PNG codecs.
//!
//! Pixel `(x, y)` is column `x`, row `y`, origin top-left; pixel centers sit on
//! integer coordinates.

use std::fs;
use std::io::Cursor;
use std::path::Path;

use image::{ColorType, ImageFormat};

use crate::error::ImageError;
use crate::geometry::Point2;

/// Row-major raster of real intensities in `[0, 255]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::Invalid(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(ImageError::Invalid(format!(
                "expected {} samples, got {}",
                width * height,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite() || **v < 0.0 || **v > 255.0) {
            return Err(ImageError::Invalid(format!("intensity {bad} outside [0, 255]")));
        }
        Ok(Self { width, height, data })
    }

    /// Builds an image from unchecked samples, clamping each into `[0, 255]`.
    /// Non-finite samples become 0.
    pub fn from_clamped(width: usize, height: usize, mut data: Vec<f64>) -> Self {
        assert!(width > 0 && height > 0 && data.len() == width * height);
        for v in &mut data {
            *v = if v.is_finite() { v.clamp(0.0, 255.0) } else { 0.0 };
        }
        Self { width, height, data }
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self::from_clamped(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::from_clamped(width, height, data)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Sample with symmetric mirror padding (edge pixel repeated) for out-of-range indices.
    #[inline]
    pub fn get_mirrored(&self, x: isize, y: isize) -> f64 {
        let x = mirror_index(x, self.width);
        let y = mirror_index(y, self.height);
        self.data[y * self.width + x]
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x <= (self.width - 1) as f64 && p.y <= (self.height - 1) as f64
    }

    /// True if `p` is at least `margin` pixels from every border.
    pub fn has_margin(&self, p: Point2, margin: f64) -> bool {
        p.x >= margin
            && p.y >= margin
            && p.x <= (self.width - 1) as f64 - margin
            && p.y <= (self.height - 1) as f64 - margin
    }

    /// Bilinear interpolation; coordinates are clamped to the pixel-center grid.
    pub fn bilinear(&self, p: Point2) -> f64 {
        let x = p.x.clamp(0.0, (self.width - 1) as f64);
        let y = p.y.clamp(0.0, (self.height - 1) as f64);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
        let bottom = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    pub fn transposed(&self) -> Self {
        Self::from_fn(self.height, self.width, |x, y| self.get(y, x))
    }

    /// Rounds every sample to the nearest byte.
    pub fn to_u8(&self) -> Vec<u8> {
        self.data.iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ImageError> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(ImageError::NotFound(path.to_path_buf()));
        }
        let bytes = fs::read(path)?;
        Self::decode(&bytes)
    }

    /// Decodes PGM (P5) or PNG bytes, sniffing the format from the magic number.
    pub fn decode(bytes: &[u8]) -> Result<Self, ImageError> {
        if bytes.starts_with(b"\x89PNG") {
            Self::decode_png(bytes)
        } else if bytes.len() >= 2 && bytes[0] == b'P' {
            decode_pnm(bytes)
        } else {
            Err(ImageError::UnsupportedFormat(
                "expected a PGM (P5) or PNG stream".into(),
            ))
        }
    }

    pub fn decode_png(bytes: &[u8]) -> Result<Self, ImageError> {
        let reader = image::ImageReader::with_format(Cursor::new(bytes), ImageFormat::Png);
        let decoded = reader
            .decode()
            .map_err(|e| ImageError::Malformed(e.to_string()))?;
        match decoded.color() {
            ColorType::L8 => {}
            ColorType::L16 => {
                return Err(ImageError::UnsupportedFormat("16-bit grayscale PNG".into()))
            }
            other => return Err(ImageError::NotGrayscale(format!("PNG color type {other:?}"))),
        }
        let gray = decoded.into_luma8();
        let (w, h) = (gray.width() as usize, gray.height() as usize);
        let data = gray.into_raw().into_iter().map(f64::from).collect();
        Self::new(w, h, data)
    }

    pub fn encode_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.to_u8());
        out
    }

    pub fn encode_png(&self) -> Result<Vec<u8>, ImageError> {
        let buf = image::GrayImage::from_raw(self.width as u32, self.height as u32, self.to_u8())
            .ok_or_else(|| ImageError::Invalid("buffer size".into()))?;
        let mut out = Cursor::new(Vec::new());
        buf.write_to(&mut out, ImageFormat::Png)
            .map_err(|e| ImageError::Malformed(e.to_string()))?;
        Ok(out.into_inner())
    }

    /// Saves as PNG when the extension is `.png`, otherwise as binary PGM.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ImageError> {
        let path = path.as_ref();
        let is_png = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        let bytes = if is_png { self.encode_png()? } else { self.encode_pgm() };
        fs::write(path, bytes)?;
        Ok(())
    }
}

#[inline]
pub(crate) fn mirror_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let n = n as isize;
    let period = 2 * n;
    let mut i = i.rem_euclid(period);
    if i >= n {
        i = period - 1 - i;
    }
    i as usize
}

fn decode_pnm(bytes: &[u8]) -> Result<GrayImage, ImageError> {
    let magic = &bytes[..2];
    match magic {
        b"P5" => {}
        b"P6" | b"P3" => return Err(ImageError::NotGrayscale("PPM color image".into())),
        b"P2" => return Err(ImageError::UnsupportedFormat("ASCII PGM (P2)".into())),
        _ => {
            return Err(ImageError::UnsupportedFormat(format!(
                "unknown PNM magic {:?}",
                String::from_utf8_lossy(magic)
            )))
        }
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        // whitespace and `#` comments between header tokens
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|b| *b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(ImageError::Malformed("PGM header field missing".into()));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| ImageError::Malformed("PGM header field not a number".into()))?;
    }
    let [width, height, maxval] = fields;
    if maxval == 0 || maxval > 255 {
        return Err(ImageError::UnsupportedFormat(format!(
            "PGM maxval {maxval} (only 8-bit supported)"
        )));
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(ImageError::Malformed("missing separator after PGM header".into()));
    }
    pos += 1;
    let n = width
        .checked_mul(height)
        .ok_or_else(|| ImageError::Malformed("PGM dimensions overflow".into()))?;
    let raster = bytes
        .get(pos..pos + n)
        .ok_or_else(|| ImageError::Malformed("truncated PGM raster".into()))?;
    GrayImage::new(width, height, raster.iter().map(|&b| f64::from(b)).collect())
        .map_err(|e| ImageError::Malformed(e.to_string()))
}
