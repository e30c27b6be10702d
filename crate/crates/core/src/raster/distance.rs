//! Exact squared Euclidean distance transform.
//!
//! Two separable passes with integer arithmetic throughout: a column pass that
//! finds the vertical distance to the nearest background pixel, followed by a
//! row pass that takes the lower envelope of the parabolas
//! `(x - i)^2 + g(i)^2` (Meijster, Roerdink and Hesselink). Pixels outside the
//! image count as background, so a full-frame mask still has a well defined
//! interior maximum.

use crate::error::{Error, Result};

use super::{BinaryMask, PixelPoint};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DistanceField {
    width: u32,
    height: u32,
    sqdist: Vec<u64>,
}

impl DistanceField {
    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn sqdist(&self) -> &[u64] {
        &self.sqdist
    }

    pub fn get(&self, x: u32, y: u32) -> u64 {
        self.sqdist[y as usize * self.width as usize + x as usize]
    }

    /// Builds a field from raw values, e.g. for exercising [`argmax_distance`].
    pub fn from_values(width: u32, height: u32, sqdist: Vec<u64>) -> Result<Self> {
        if sqdist.len() != width as usize * height as usize {
            return Err(Error::DimensionMismatch {
                expected: (width, height),
                actual: (sqdist.len() as u32, 1),
            });
        }
        Ok(DistanceField {
            width,
            height,
            sqdist,
        })
    }
}

/// Squared distance from every foreground pixel to the nearest background
/// pixel, with the image exterior treated as background.
pub fn distance_transform(mask: &BinaryMask) -> DistanceField {
    let w = mask.width() as usize;
    let h = mask.height() as usize;
    let bits = mask.bits();

    // Column pass: vertical distance to background, exterior rows at -1 and h.
    let mut g = vec![0i64; w * h];
    for x in 0..w {
        let mut run = 0i64;
        for y in 0..h {
            run = if bits[y * w + x] { run + 1 } else { 0 };
            g[y * w + x] = run;
        }
        let mut run = 0i64;
        for y in (0..h).rev() {
            run = if bits[y * w + x] { run + 1 } else { 0 };
            let cell = &mut g[y * w + x];
            *cell = (*cell).min(run);
        }
    }

    // Row pass over sites -1..=w; the two exterior sites have g = 0.
    let m = w + 2;
    let mut gsq = vec![0i64; m];
    let mut site = vec![0usize; m];
    let mut start = vec![0i64; m];
    let mut sqdist = vec![0u64; w * h];
    for y in 0..h {
        let row = &g[y * w..(y + 1) * w];
        gsq[0] = 0;
        gsq[m - 1] = 0;
        for (x, &v) in row.iter().enumerate() {
            gsq[x + 1] = v * v;
        }
        let f = |x: i64, i: usize| -> i64 {
            let d = x - i as i64;
            d * d + gsq[i]
        };
        let sep = |i: usize, u: usize| -> i64 {
            let (i, u) = (i as i64, u as i64);
            (u * u - i * i + gsq[u as usize] - gsq[i as usize]).div_euclid(2 * (u - i))
        };

        let mut q = 0usize;
        site[0] = 0;
        start[0] = 0;
        for u in 1..m {
            loop {
                if f(start[q], site[q]) <= f(start[q], u) {
                    break;
                }
                if q == 0 {
                    break;
                }
                q -= 1;
            }
            if q == 0 && f(start[0], site[0]) > f(start[0], u) {
                site[0] = u;
            } else {
                let next = 1 + sep(site[q], u);
                if next < m as i64 {
                    q += 1;
                    site[q] = u;
                    start[q] = next;
                }
            }
        }
        let out = &mut sqdist[y * w..(y + 1) * w];
        for u in (1..m - 1).rev() {
            while q > 0 && (u as i64) < start[q] {
                q -= 1;
            }
            out[u - 1] = f(u as i64, site[q]) as u64;
        }
    }

    DistanceField {
        width: mask.width(),
        height: mask.height(),
        sqdist,
    }
}

/// Location of the largest distance; ties go to the smallest row-major index.
pub fn argmax_distance(field: &DistanceField) -> Result<PixelPoint> {
    let mut best = 0u64;
    let mut best_idx = None;
    for (i, &d) in field.sqdist.iter().enumerate() {
        if d > best {
            best = d;
            best_idx = Some(i);
        }
    }
    let i = best_idx.ok_or(Error::EmptyRegion)?;
    let w = field.width as usize;
    Ok(PixelPoint::new((i % w) as i32, (i / w) as i32))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_center_pixel() {
        let m = BinaryMask::from_ascii(&["...", ".#.", "..."]);
        let f = distance_transform(&m);
        assert_eq!(f.sqdist(), &[0, 0, 0, 0, 1, 0, 0, 0, 0]);
    }

    #[test]
    fn block_in_seven_by_seven() {
        let m = BinaryMask::from_fn(7, 7, |x, y| (1..6).contains(&x) && (1..6).contains(&y));
        let f = distance_transform(&m);
        assert_eq!(f.get(3, 3), 9);
        assert_eq!(argmax_distance(&f).unwrap(), PixelPoint::new(3, 3));
    }

    #[test]
    fn all_background_is_zero() {
        let f = distance_transform(&BinaryMask::new(4, 4));
        assert!(f.sqdist().iter().all(|&d| d == 0));
        assert!(matches!(argmax_distance(&f), Err(Error::EmptyRegion)));
    }

    #[test]
    fn full_mask_uses_exterior() {
        let f = distance_transform(&BinaryMask::full(5, 3));
        // middle row is 2 away from the top/bottom exterior
        assert_eq!(f.get(2, 1), 4);
        assert_eq!(f.get(0, 0), 1);
        assert_eq!(argmax_distance(&f).unwrap(), PixelPoint::new(1, 1));
    }

    #[test]
    fn argmax_row_major_tie_break() {
        let f = DistanceField::from_values(5, 3, vec![0, 0, 0, 0, 0, 0, 4, 0, 4, 0, 0, 0, 0, 0, 0])
            .unwrap();
        assert_eq!(argmax_distance(&f).unwrap(), PixelPoint::new(1, 1));
    }

    #[test]
    fn single_pixel_argmax() {
        let mut m = BinaryMask::new(5, 4);
        m.set(2, 1, true);
        assert_eq!(argmax_distance(&distance_transform(&m)).unwrap(), PixelPoint::new(2, 1));
    }
}
