//! Opaque point markers drawn onto images.
//!
//! Markers carry no anti-aliasing: every pixel in the footprint takes the
//! marker color exactly and every other pixel is left untouched, which keeps
//! rendered datasets bit-reproducible.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::RegionAnnotation;
use crate::raster::{BinaryMask, PixelPoint, Raster, Rgb};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarkerShape {
    Dot,
    Circle,
    Square,
    Cross,
}

impl MarkerShape {
    pub const ALL: [MarkerShape; 4] = [
        MarkerShape::Dot,
        MarkerShape::Circle,
        MarkerShape::Square,
        MarkerShape::Cross,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MarkerShape::Dot => "dot",
            MarkerShape::Circle => "circle",
            MarkerShape::Square => "square",
            MarkerShape::Cross => "cross",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        MarkerShape::ALL
            .into_iter()
            .find(|s| s.name().eq_ignore_ascii_case(name.trim()))
    }
}

/// The fixed name/color table used for marker colors and their textual
/// descriptors.
pub const NAMED_COLORS: [(&str, Rgb); 10] = [
    ("red", [255, 0, 0]),
    ("green", [0, 255, 0]),
    ("blue", [0, 0, 255]),
    ("purple", [128, 0, 128]),
    ("yellow", [255, 255, 0]),
    ("orange", [255, 165, 0]),
    ("cyan", [0, 255, 255]),
    ("magenta", [255, 0, 255]),
    ("white", [255, 255, 255]),
    ("black", [0, 0, 0]),
];

pub fn color_by_name(name: &str) -> Option<Rgb> {
    let name = name.trim();
    NAMED_COLORS
        .iter()
        .find(|(n, _)| n.eq_ignore_ascii_case(name))
        .map(|&(_, rgb)| rgb)
}

pub fn color_name(rgb: Rgb) -> Option<&'static str> {
    NAMED_COLORS.iter().find(|(_, c)| *c == rgb).map(|&(n, _)| n)
}

/// Marker shape, color and size.
///
/// `radius` is the disk radius for dots and circles and the half-extent for
/// squares and crosses. `stroke` is the ring thickness of a circle and the
/// bar thickness of a cross; dots and squares ignore it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PromptStyle {
    pub shape: MarkerShape,
    pub color: Rgb,
    pub radius: u32,
    pub stroke: u32,
}

impl PromptStyle {
    pub fn new(shape: MarkerShape, color: Rgb, radius: u32, stroke: u32) -> Result<Self> {
        let style = PromptStyle {
            shape,
            color,
            radius,
            stroke,
        };
        style.validate()?;
        Ok(style)
    }

    /// Red dot sized relative to the image: `max(3, ceil(0.01 * min(w, h)))`.
    pub fn default_for(width: u32, height: u32) -> Self {
        PromptStyle {
            shape: MarkerShape::Dot,
            color: [255, 0, 0],
            radius: default_radius(width, height),
            stroke: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.radius == 0 || self.stroke == 0 {
            return Err(Error::InvalidStyle("radius and stroke must be >= 1".into()));
        }
        if self.shape == MarkerShape::Circle && self.stroke > self.radius {
            return Err(Error::InvalidStyle(format!(
                "circle stroke {} exceeds radius {}",
                self.stroke, self.radius
            )));
        }
        Ok(())
    }

    /// Whether offset `(dx, dy)` from the marker center is painted.
    pub fn covers(&self, dx: i64, dy: i64) -> bool {
        let r = self.radius as i64;
        let d2 = dx * dx + dy * dy;
        match self.shape {
            MarkerShape::Dot => d2 <= r * r,
            MarkerShape::Circle => {
                let inner = r - self.stroke as i64;
                d2 <= r * r && d2 > inner * inner
            }
            MarkerShape::Square => dx.abs() <= r && dy.abs() <= r,
            MarkerShape::Cross => {
                let half = (self.stroke / 2) as i64;
                (dy.abs() <= half && dx.abs() <= r) || (dx.abs() <= half && dy.abs() <= r)
            }
        }
    }

    /// Footprint offsets relative to the marker center, row-major.
    pub fn footprint(&self) -> Vec<(i64, i64)> {
        let r = self.radius as i64;
        let mut out = Vec::new();
        for dy in -r..=r {
            for dx in -r..=r {
                if self.covers(dx, dy) {
                    out.push((dx, dy));
                }
            }
        }
        out
    }
}

pub fn default_radius(width: u32, height: u32) -> u32 {
    let side = width.min(height) as f64;
    ((0.01 * side).ceil() as u32).max(3)
}

/// Marker style whose radius may follow the image size.
///
/// `radius: None` resolves to [`default_radius`] of each image.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StyleSpec {
    pub shape: MarkerShape,
    pub color: Rgb,
    pub radius: Option<u32>,
    pub stroke: u32,
}

impl Default for StyleSpec {
    fn default() -> Self {
        StyleSpec {
            shape: MarkerShape::Dot,
            color: [255, 0, 0],
            radius: None,
            stroke: 1,
        }
    }
}

impl From<PromptStyle> for StyleSpec {
    fn from(s: PromptStyle) -> Self {
        StyleSpec {
            shape: s.shape,
            color: s.color,
            radius: Some(s.radius),
            stroke: s.stroke,
        }
    }
}

impl StyleSpec {
    pub fn resolve(&self, width: u32, height: u32) -> Result<PromptStyle> {
        let radius = self.radius.unwrap_or_else(|| default_radius(width, height));
        PromptStyle::new(self.shape, self.color, radius, self.stroke)
    }

    /// Checks everything that does not depend on the image size.
    pub fn validate(&self) -> Result<()> {
        match self.radius {
            Some(r) => PromptStyle::new(self.shape, self.color, r, self.stroke).map(|_| ()),
            None if self.stroke == 0 => Err(Error::InvalidStyle("radius and stroke must be >= 1".into())),
            None => Ok(()),
        }
    }
}

/// Copy of `img` with one marker drawn at `p`, clipped at the borders.
pub fn render_marker(img: &Raster, p: PixelPoint, style: &PromptStyle) -> Result<Raster> {
    style.validate()?;
    if !img.contains(p) {
        return Err(p.out_of_bounds(img.width(), img.height()));
    }
    let mut out = img.clone();
    for (dx, dy) in style.footprint() {
        let x = p.x as i64 + dx;
        let y = p.y as i64 + dy;
        if x >= 0 && y >= 0 && x < img.width() as i64 && y < img.height() as i64 {
            out.set(x as u32, y as u32, style.color);
        }
    }
    Ok(out)
}

/// One independently rendered copy of `img` per point, in input order.
pub fn render_multi(img: &Raster, points: &[PixelPoint], style: &PromptStyle) -> Result<Vec<Raster>> {
    points.iter().map(|&p| render_marker(img, p, style)).collect()
}

/// Paints the outline of a region instead of a point: the boundary pixels of
/// a mask (foreground pixels with a 4-neighbour outside the mask), the border
/// of a box, or a marker for a point. Used by the no-reformulation baseline.
pub fn render_region_outline(img: &Raster, region: &RegionAnnotation, style: &PromptStyle) -> Result<Raster> {
    let (w, h) = img.dimensions();
    region.validate_in(w, h)?;
    if let RegionAnnotation::Point(p) = region {
        return render_marker(img, *p, style);
    }
    let mask = region.pixel_mask(w, h);
    let mut out = img.clone();
    for p in outline_pixels(&mask) {
        out.set(p.x as u32, p.y as u32, style.color);
    }
    Ok(out)
}

fn outline_pixels(mask: &BinaryMask) -> Vec<PixelPoint> {
    mask.foreground()
        .filter(|p| {
            [(1, 0), (-1, 0), (0, 1), (0, -1)]
                .iter()
                .any(|&(dx, dy)| !mask.is_foreground(p.offset(dx, dy)))
        })
        .collect()
}

/// Sidecar metadata written next to every rendered image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenderSidecar {
    pub point: PixelPoint,
    pub style: PromptStyle,
}

pub fn sidecar_path(png: &Path) -> PathBuf {
    png.with_extension("json")
}

/// Writes `img` as PNG plus a `{point, style}` JSON sidecar with the same stem.
pub fn write_rendered(path: &Path, img: &Raster, point: PixelPoint, style: &PromptStyle) -> Result<()> {
    img.save_png(path)?;
    let sidecar = RenderSidecar {
        point,
        style: *style,
    };
    let json = serde_json::to_string_pretty(&sidecar)?;
    let side = sidecar_path(path);
    std::fs::write(&side, json + "\n").map_err(|e| Error::io(side, e))
}
