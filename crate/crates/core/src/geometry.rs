//! Reformulation of point, box and mask prompts into representative points.
//!
//! Every region, whatever its shape, is reduced to one or more pixel
//! positions where a point marker is drawn: a point stays where it is, a box
//! collapses to its centroid (or to a grid of positions for voting), and a
//! mask collapses to its most interior pixel under the Euclidean distance
//! transform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{argmax_distance, distance_transform, BinaryMask, PixelPoint};

/// Axis-aligned box given by its top-left pixel and extent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BBox {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl BBox {
    pub const fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        BBox { x, y, w, h }
    }

    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    pub fn validate(&self) -> Result<()> {
        if self.w == 0 || self.h == 0 {
            return Err(Error::InvalidBox(format!("{self:?} has zero extent")));
        }
        Ok(())
    }

    pub fn validate_in(&self, width: u32, height: u32) -> Result<()> {
        self.validate()?;
        if self.x as u64 + self.w as u64 > width as u64
            || self.y as u64 + self.h as u64 > height as u64
        {
            return Err(Error::InvalidBox(format!(
                "{self:?} exceeds the {width}x{height} image"
            )));
        }
        Ok(())
    }

    pub fn contains_point(&self, p: PixelPoint) -> bool {
        p.x >= self.x as i32
            && p.y >= self.y as i32
            && (p.x as i64) < self.x as i64 + self.w as i64
            && (p.y as i64) < self.y as i64 + self.h as i64
    }

    pub fn contains_box(&self, other: &BBox) -> bool {
        other.x >= self.x
            && other.y >= self.y
            && other.x as u64 + other.w as u64 <= self.x as u64 + self.w as u64
            && other.y as u64 + other.h as u64 <= self.y as u64 + self.h as u64
    }

    pub fn to_mask(&self, width: u32, height: u32) -> BinaryMask {
        BinaryMask::from_fn(width, height, |x, y| {
            self.contains_point(PixelPoint::new(x as i32, y as i32))
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridLayout {
    /// Top-left, top-right, bottom-left, bottom-right corners of the inset
    /// box, then its center.
    FiveCorner,
    UniformGrid { rows: u32, cols: u32 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub layout: GridLayout,
    pub margin_fraction: f64,
}

impl GridSpec {
    pub const DEFAULT_MARGIN: f64 = 0.1;

    pub fn five_corner() -> Self {
        GridSpec {
            layout: GridLayout::FiveCorner,
            margin_fraction: Self::DEFAULT_MARGIN,
        }
    }

    pub fn uniform(rows: u32, cols: u32, margin_fraction: f64) -> Self {
        GridSpec {
            layout: GridLayout::UniformGrid { rows, cols },
            margin_fraction,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.margin_fraction) {
            return Err(Error::InvalidConfig(format!(
                "grid margin {} not in [0, 0.5)",
                self.margin_fraction
            )));
        }
        if let GridLayout::UniformGrid { rows, cols } = self.layout {
            if rows == 0 || cols == 0 {
                return Err(Error::InvalidConfig("grid rows and cols must be >= 1".into()));
            }
        }
        Ok(())
    }

    pub fn point_count(&self) -> usize {
        match self.layout {
            GridLayout::FiveCorner => 5,
            GridLayout::UniformGrid { rows, cols } => rows as usize * cols as usize,
        }
    }
}

/// Referring prompt attached to an image region.
#[derive(Clone, Debug, PartialEq)]
pub enum RegionAnnotation {
    Point(PixelPoint),
    Box(BBox),
    Mask(BinaryMask),
}

impl RegionAnnotation {
    pub fn kind(&self) -> &'static str {
        match self {
            RegionAnnotation::Point(_) => "point",
            RegionAnnotation::Box(_) => "box",
            RegionAnnotation::Mask(_) => "mask",
        }
    }

    /// Checks that the geometry lies inside a `width` x `height` image.
    pub fn validate_in(&self, width: u32, height: u32) -> Result<()> {
        match self {
            RegionAnnotation::Point(p) => {
                if p.x < 0 || p.y < 0 || p.x as i64 >= width as i64 || p.y as i64 >= height as i64 {
                    return Err(p.out_of_bounds(width, height));
                }
                Ok(())
            }
            RegionAnnotation::Box(b) => b.validate_in(width, height),
            RegionAnnotation::Mask(m) => {
                if m.dimensions() != (width, height) {
                    return Err(Error::DimensionMismatch {
                        expected: (width, height),
                        actual: m.dimensions(),
                    });
                }
                Ok(())
            }
        }
    }

    /// Pixels covered by the region in a `width` x `height` image.
    pub fn pixel_mask(&self, width: u32, height: u32) -> BinaryMask {
        match self {
            RegionAnnotation::Point(p) => {
                let mut m = BinaryMask::new(width, height);
                if m.contains(*p) {
                    m.set(p.x as u32, p.y as u32, true);
                }
                m
            }
            RegionAnnotation::Box(b) => b.to_mask(width, height),
            RegionAnnotation::Mask(m) => m.clone(),
        }
    }
}

/// How a mask is reduced to a single point.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositionStrategy {
    /// Most interior pixel under the distance transform.
    #[default]
    Center,
    /// Uniformly sampled foreground pixel; baseline for ablations.
    Random,
}

/// Identity on points, after a bounds check against a `width` x `height` image.
pub fn point_of_point(p: PixelPoint, width: u32, height: u32) -> Result<PixelPoint> {
    RegionAnnotation::Point(p).validate_in(width, height)?;
    Ok(p)
}

pub fn box_centroid(b: &BBox) -> Result<PixelPoint> {
    b.validate()?;
    Ok(PixelPoint::new((b.x + b.w / 2) as i32, (b.y + b.h / 2) as i32))
}

/// Start and length of the inset interval along one axis.
fn inset_axis(origin: u32, extent: u32, margin: f64) -> (i64, i64) {
    let inset = (margin * extent as f64).round() as i64;
    let lo = origin as i64 + inset;
    let len = extent as i64 - 2 * inset;
    (lo, len)
}

/// Grid positions covering a box, in deterministic order.
///
/// `FiveCorner` yields the four corners of the box inset by
/// `margin_fraction` of its extent (top-left, top-right, bottom-left,
/// bottom-right) followed by the box centroid. `UniformGrid` places the
/// cell centers of a `rows` x `cols` lattice over the inset box, row-major.
pub fn box_grid_points(b: &BBox, grid: &GridSpec) -> Result<Vec<PixelPoint>> {
    b.validate()?;
    grid.validate()?;
    let (x_lo, x_len) = inset_axis(b.x, b.w, grid.margin_fraction);
    let (y_lo, y_len) = inset_axis(b.y, b.h, grid.margin_fraction);
    match grid.layout {
        GridLayout::FiveCorner => {
            let x_hi = (x_lo + x_len).min(b.x as i64 + b.w as i64 - 1);
            let y_hi = (y_lo + y_len).min(b.y as i64 + b.h as i64 - 1);
            let c = box_centroid(b)?;
            let (cx, cy) = (c.x as i64, c.y as i64);
            if !(x_lo < cx && cx < x_hi && y_lo < cy && cy < y_hi) {
                return Err(Error::DegenerateGrid(format!(
                    "five-corner layout needs an inset box wider than 2 px around the center of {b:?}"
                )));
            }
            Ok([
                (x_lo, y_lo),
                (x_hi, y_lo),
                (x_lo, y_hi),
                (x_hi, y_hi),
                (cx, cy),
            ]
            .into_iter()
            .map(|(x, y)| PixelPoint::new(x as i32, y as i32))
            .collect())
        }
        GridLayout::UniformGrid { rows, cols } => {
            let (rows, cols) = (rows as i64, cols as i64);
            if x_len < cols || y_len < rows {
                return Err(Error::DegenerateGrid(format!(
                    "{rows}x{cols} lattice does not fit the inset of {b:?}"
                )));
            }
            let mut points = Vec::with_capacity((rows * cols) as usize);
            for r in 0..rows {
                let y = y_lo + ((2 * r + 1) * y_len) / (2 * rows);
                for c in 0..cols {
                    let x = x_lo + ((2 * c + 1) * x_len) / (2 * cols);
                    points.push(PixelPoint::new(x as i32, y as i32));
                }
            }
            Ok(points)
        }
    }
}

/// Pixel farthest from the mask boundary; always a foreground pixel.
pub fn mask_center(m: &BinaryMask) -> Result<PixelPoint> {
    argmax_distance(&distance_transform(m))
}

/// Uniformly sampled foreground pixel.
pub fn mask_random_point(m: &BinaryMask, seed: u64) -> Result<PixelPoint> {
    let count = m.count();
    if count == 0 {
        return Err(Error::EmptyRegion);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.random_range(0..count);
    Ok(m.foreground().nth(k).expect("k < count"))
}

/// Representative point(s) for a region: the identity for points, the mask
/// center for masks, and for boxes either the centroid or, when a grid is
/// given, the grid positions used for voting.
pub fn disentangle(region: &RegionAnnotation, grid: Option<&GridSpec>) -> Result<Vec<PixelPoint>> {
    match region {
        RegionAnnotation::Point(p) => Ok(vec![*p]),
        RegionAnnotation::Box(b) => match grid {
            Some(g) => box_grid_points(b, g),
            None => Ok(vec![box_centroid(b)?]),
        },
        RegionAnnotation::Mask(m) => Ok(vec![mask_center(m)?]),
    }
}

/// [`disentangle`] with a choice of how masks collapse to a point.
pub fn select_points(
    region: &RegionAnnotation,
    grid: Option<&GridSpec>,
    strategy: PositionStrategy,
    seed: u64,
) -> Result<Vec<PixelPoint>> {
    match (region, strategy) {
        (RegionAnnotation::Mask(m), PositionStrategy::Random) => Ok(vec![mask_random_point(m, seed)?]),
        _ => disentangle(region, grid),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[(i32, i32)]) -> Vec<PixelPoint> {
        v.iter().map(|&(x, y)| PixelPoint::new(x, y)).collect()
    }

    #[test]
    fn point_identity_and_bounds() {
        assert_eq!(point_of_point(PixelPoint::new(10, 20), 64, 64).unwrap(), PixelPoint::new(10, 20));
        assert_eq!(point_of_point(PixelPoint::new(0, 0), 1, 1).unwrap(), PixelPoint::new(0, 0));
        assert!(matches!(
            point_of_point(PixelPoint::new(-1, 0), 8, 8),
            Err(Error::OutOfBounds { .. })
        ));
    }

    #[test]
    fn centroids() {
        assert_eq!(box_centroid(&BBox::new(10, 20, 30, 40)).unwrap(), PixelPoint::new(25, 40));
        assert_eq!(box_centroid(&BBox::new(0, 0, 1, 1)).unwrap(), PixelPoint::new(0, 0));
        assert_eq!(box_centroid(&BBox::new(3, 3, 5, 3)).unwrap(), PixelPoint::new(5, 4));
        assert!(matches!(box_centroid(&BBox::new(0, 0, 0, 3)), Err(Error::InvalidBox(_))));
    }

    #[test]
    fn five_corner_grid() {
        let got = box_grid_points(&BBox::new(0, 0, 100, 100), &GridSpec::five_corner()).unwrap();
        assert_eq!(got, pts(&[(10, 10), (90, 10), (10, 90), (90, 90), (50, 50)]));
    }

    #[test]
    fn five_corner_without_margin_stays_inside() {
        let b = BBox::new(4, 6, 9, 5);
        let got = box_grid_points(&b, &GridSpec { layout: GridLayout::FiveCorner, margin_fraction: 0.0 })
            .unwrap();
        assert_eq!(got, pts(&[(4, 6), (12, 6), (4, 10), (12, 10), (8, 8)]));
        assert!(got.iter().all(|&p| b.contains_point(p)));
    }

    #[test]
    fn five_corner_degenerate() {
        let g = GridSpec::five_corner();
        assert!(matches!(box_grid_points(&BBox::new(0, 0, 2, 50), &g), Err(Error::DegenerateGrid(_))));
    }

    #[test]
    fn uniform_grids() {
        let one = box_grid_points(&BBox::new(0, 0, 10, 10), &GridSpec::uniform(1, 1, 0.0)).unwrap();
        assert_eq!(one, pts(&[(5, 5)]));
        let four = box_grid_points(&BBox::new(0, 0, 4, 4), &GridSpec::uniform(2, 2, 0.0)).unwrap();
        assert_eq!(four, pts(&[(1, 1), (3, 1), (1, 3), (3, 3)]));
        assert!(matches!(
            box_grid_points(&BBox::new(0, 0, 2, 2), &GridSpec::uniform(3, 1, 0.0)),
            Err(Error::DegenerateGrid(_))
        ));
    }

    #[test]
    fn grid_spec_validation() {
        assert!(GridSpec::uniform(0, 2, 0.1).validate().is_err());
        assert!(GridSpec::uniform(2, 2, 0.5).validate().is_err());
        assert!(GridSpec::uniform(2, 2, -0.1).validate().is_err());
    }

    #[test]
    fn mask_centers() {
        let block = BinaryMask::from_fn(7, 7, |x, y| (1..6).contains(&x) && (1..6).contains(&y));
        assert_eq!(mask_center(&block).unwrap(), PixelPoint::new(3, 3));

        let mut single = BinaryMask::new(9, 9);
        single.set(4, 7, true);
        assert_eq!(mask_center(&single).unwrap(), PixelPoint::new(4, 7));

        assert!(matches!(mask_center(&BinaryMask::new(3, 3)), Err(Error::EmptyRegion)));
    }

    #[test]
    fn c_shape_center_is_on_the_stroke() {
        let c = BinaryMask::from_ascii(&[
            "............",
            ".##########.",
            ".##########.",
            ".###........",
            ".###........",
            ".###........",
            ".###........",
            ".##########.",
            ".##########.",
            "............",
        ]);
        let p = mask_center(&c).unwrap();
        assert!(c.is_foreground(p), "{p}");
    }

    #[test]
    fn disentangle_variants() {
        let mut m = BinaryMask::new(3, 3);
        m.set(1, 1, true);
        assert_eq!(disentangle(&RegionAnnotation::Mask(m), None).unwrap(), pts(&[(1, 1)]));
        let b = RegionAnnotation::Box(BBox::new(0, 0, 100, 100));
        assert_eq!(disentangle(&b, None).unwrap(), pts(&[(50, 50)]));
        assert_eq!(disentangle(&b, Some(&GridSpec::five_corner())).unwrap().len(), 5);
        let p = RegionAnnotation::Point(PixelPoint::new(2, 2));
        assert_eq!(disentangle(&p, Some(&GridSpec::five_corner())).unwrap(), pts(&[(2, 2)]));
    }

    #[test]
    fn random_strategy_is_seeded_and_inside() {
        let m = BinaryMask::from_ascii(&["..##", ".###", "...."]);
        let region = RegionAnnotation::Mask(m.clone());
        for seed in 0..20 {
            let a = select_points(&region, None, PositionStrategy::Random, seed).unwrap();
            let b = select_points(&region, None, PositionStrategy::Random, seed).unwrap();
            assert_eq!(a, b);
            assert!(m.is_foreground(a[0]));
        }
    }
}
