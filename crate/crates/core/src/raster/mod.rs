//! Pixel containers and the raster kernels the rest of the crate builds on.
//!
//! Coordinates are `(x, y)` with the origin at the top-left corner; buffers
//! are stored row-major.

mod blur;
mod components;
mod distance;
mod morphology;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use blur::gaussian_blur_threshold;
pub use components::connected_component;
pub use distance::{argmax_distance, distance_transform, DistanceField};
pub use morphology::{dilate, make_kernel, StructuringElement, COMPASS};

pub type Rgb = [u8; 3];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PixelPoint {
    pub x: i32,
    pub y: i32,
}

impl PixelPoint {
    pub const fn new(x: i32, y: i32) -> Self {
        PixelPoint { x, y }
    }

    pub fn offset(self, dx: i32, dy: i32) -> Self {
        PixelPoint::new(self.x + dx, self.y + dy)
    }

    pub(crate) fn out_of_bounds(self, width: u32, height: u32) -> Error {
        Error::OutOfBounds {
            x: self.x as i64,
            y: self.y as i64,
            width,
            height,
        }
    }
}

impl std::fmt::Display for PixelPoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

#[inline]
fn in_bounds(width: u32, height: u32, x: i64, y: i64) -> bool {
    x >= 0 && y >= 0 && x < width as i64 && y < height as i64
}

fn check_dims(width: u32, height: u32) {
    assert!(width >= 1 && height >= 1, "raster dimensions must be at least 1x1");
}

/// 8-bit RGB image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Raster {
    width: u32,
    height: u32,
    pixels: Vec<Rgb>,
}

impl Raster {
    /// Creates a raster filled with `color`. Panics on a zero dimension.
    pub fn filled(width: u32, height: u32, color: Rgb) -> Self {
        check_dims(width, height);
        Raster {
            width,
            height,
            pixels: vec![color; width as usize * height as usize],
        }
    }

    pub fn from_pixels(width: u32, height: u32, pixels: Vec<Rgb>) -> Result<Self> {
        if width == 0 || height == 0 || pixels.len() != width as usize * height as usize {
            return Err(Error::DimensionMismatch {
                expected: (width, height),
                actual: (pixels.len() as u32, 1),
            });
        }
        Ok(Raster {
            width,
            height,
            pixels,
        })
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> Rgb) -> Self {
        check_dims(width, height);
        let mut pixels = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Raster {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[Rgb] {
        &self.pixels
    }

    pub fn contains(&self, p: PixelPoint) -> bool {
        in_bounds(self.width, self.height, p.x as i64, p.y as i64)
    }

    pub fn get(&self, x: u32, y: u32) -> Rgb {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, color: Rgb) {
        let w = self.width as usize;
        self.pixels[y as usize * w + x as usize] = color;
    }

    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = image::open(path).map_err(|e| Error::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let rgb = img.to_rgb8();
        let (width, height) = rgb.dimensions();
        let pixels = rgb.pixels().map(|p| p.0).collect();
        Raster::from_pixels(width, height, pixels)
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes = self.to_png_bytes();
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    /// Encodes the raster as an RGB8 PNG.
    pub fn to_png_bytes(&self) -> Vec<u8> {
        let flat: Vec<u8> = self.pixels.iter().flatten().copied().collect();
        encode_png(self.width, self.height, png::ColorType::Rgb, &flat)
    }

    pub fn from_png_bytes(bytes: &[u8]) -> Result<Self> {
        let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png).map_err(
            |e| Error::Image {
                path: "<memory>".into(),
                message: e.to_string(),
            },
        )?;
        let rgb = img.to_rgb8();
        let (width, height) = rgb.dimensions();
        Raster::from_pixels(width, height, rgb.pixels().map(|p| p.0).collect())
    }
}

fn encode_png(width: u32, height: u32, color: png::ColorType, data: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, width, height);
        encoder.set_color(color);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder.write_header().expect("in-memory png header");
        writer.write_image_data(data).expect("in-memory png body");
    }
    out
}

/// Per-pixel boolean raster; `true` is foreground.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl std::fmt::Debug for BinaryMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "BinaryMask {}x{}", self.width, self.height)?;
        if self.width <= 64 && self.height <= 64 {
            for row in self.bits.chunks(self.width as usize) {
                let line: String = row.iter().map(|&b| if b { '#' } else { '.' }).collect();
                writeln!(f, "{line}")?;
            }
        }
        Ok(())
    }
}

impl BinaryMask {
    /// All-background mask. Panics on a zero dimension.
    pub fn new(width: u32, height: u32) -> Self {
        check_dims(width, height);
        BinaryMask {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        }
    }

    pub fn full(width: u32, height: u32) -> Self {
        let mut m = BinaryMask::new(width, height);
        m.bits.fill(true);
        m
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        check_dims(width, height);
        let mut bits = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        BinaryMask {
            width,
            height,
            bits,
        }
    }

    pub fn from_bits(width: u32, height: u32, bits: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 || bits.len() != width as usize * height as usize {
            return Err(Error::DimensionMismatch {
                expected: (width, height),
                actual: (bits.len() as u32, 1),
            });
        }
        Ok(BinaryMask {
            width,
            height,
            bits,
        })
    }

    /// Parses rows of `#`/`1` (foreground) and `.`/`0` (background).
    pub fn from_ascii(rows: &[&str]) -> Self {
        let height = rows.len() as u32;
        let width = rows.first().map_or(0, |r| r.len()) as u32;
        BinaryMask::from_fn(width, height, |x, y| {
            matches!(rows[y as usize].as_bytes()[x as usize], b'#' | b'1')
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn contains(&self, p: PixelPoint) -> bool {
        in_bounds(self.width, self.height, p.x as i64, p.y as i64)
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    /// Foreground test that treats everything outside the mask as background.
    pub fn is_foreground(&self, p: PixelPoint) -> bool {
        self.contains(p) && self.get(p.x as u32, p.y as u32)
    }

    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        let w = self.width as usize;
        self.bits[y as usize * w + x as usize] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Foreground pixels in row-major order.
    pub fn foreground(&self) -> impl Iterator<Item = PixelPoint> + '_ {
        let w = self.width as usize;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| PixelPoint::new((i % w) as i32, (i / w) as i32))
    }

    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.dimensions() == other.dimensions()
            && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    pub fn intersection(&self, other: &BinaryMask) -> BinaryMask {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn union(&self, other: &BinaryMask) -> BinaryMask {
        self.zip_with(other, |a, b| a || b)
    }

    fn zip_with(&self, other: &BinaryMask, f: impl Fn(bool, bool) -> bool) -> BinaryMask {
        assert_eq!(self.dimensions(), other.dimensions(), "mask dimensions differ");
        BinaryMask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().zip(&other.bits).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    /// Tight bounding box `(x, y, w, h)` of the foreground.
    pub fn bounding_box(&self) -> Option<(u32, u32, u32, u32)> {
        let mut min_x = u32::MAX;
        let mut min_y = u32::MAX;
        let mut max_x = 0;
        let mut max_y = 0;
        let mut any = false;
        for p in self.foreground() {
            any = true;
            min_x = min_x.min(p.x as u32);
            min_y = min_y.min(p.y as u32);
            max_x = max_x.max(p.x as u32);
            max_y = max_y.max(p.y as u32);
        }
        any.then(|| (min_x, min_y, max_x - min_x + 1, max_y - min_y + 1))
    }

    /// Loads a single-channel PNG; any non-zero value is foreground.
    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = image::open(path).map_err(|e| Error::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let luma = img.to_luma8();
        let (width, height) = luma.dimensions();
        BinaryMask::from_bits(width, height, luma.pixels().map(|p| p.0[0] != 0).collect())
    }

    /// Writes the mask as an 8-bit grayscale PNG, foreground 255 and background 0.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_png_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn to_png_bytes(&self) -> Vec<u8> {
        let data: Vec<u8> = self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
        encode_png(self.width, self.height, png::ColorType::Grayscale, &data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_png_round_trip() {
        let m = BinaryMask::from_ascii(&["#..", ".#.", "..#", "###"]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.png");
        m.save_png(&path).unwrap();
        assert_eq!(BinaryMask::load_png(&path).unwrap(), m);
        let raw = image::open(&path).unwrap();
        assert_eq!(raw.color(), image::ColorType::L8);
        assert_eq!(raw.to_luma8().get_pixel(0, 0).0[0], 255);
        assert_eq!(raw.to_luma8().get_pixel(1, 0).0[0], 0);
    }

    #[test]
    fn raster_png_round_trip() {
        let r = Raster::from_fn(5, 3, |x, y| [x as u8 * 40, y as u8 * 80, 7]);
        let back = Raster::from_png_bytes(&r.to_png_bytes()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn bounding_box_and_foreground_order() {
        let m = BinaryMask::from_ascii(&["....", ".#..", "..##"]);
        assert_eq!(m.bounding_box(), Some((1, 1, 3, 2)));
        let pts: Vec<_> = m.foreground().collect();
        assert_eq!(pts, vec![PixelPoint::new(1, 1), PixelPoint::new(2, 2), PixelPoint::new(3, 2)]);
        assert_eq!(BinaryMask::new(3, 3).bounding_box(), None);
    }

    #[test]
    fn from_pixels_rejects_wrong_length() {
        assert!(Raster::from_pixels(2, 2, vec![[0; 3]; 3]).is_err());
        assert!(BinaryMask::from_bits(2, 2, vec![true; 5]).is_err());
    }
}
