use crate::error::{Error, Result};

use super::BinaryMask;

/// Unit steps of the eight compass directions, counterclockwise from east,
/// with y pointing down.
pub const COMPASS: [(i32, i32); 8] = [
    (1, 0),
    (1, -1),
    (0, -1),
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

/// Offset set for binary dilation. The anchor `(0, 0)` is always present.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StructuringElement {
    size: u32,
    direction: u8,
    offsets: Vec<(i32, i32)>,
}

impl StructuringElement {
    pub fn size(&self) -> u32 {
        self.size
    }

    pub fn direction(&self) -> u8 {
        self.direction
    }

    pub fn offsets(&self) -> &[(i32, i32)] {
        &self.offsets
    }
}

/// Directional stroke kernel: the anchor plus a ray of `size / 2` unit steps
/// along compass direction `direction` (0 = east, counterclockwise).
pub fn make_kernel(size: i32, direction: i32) -> Result<StructuringElement> {
    if size < 1 || size % 2 == 0 || !(0..8).contains(&direction) {
        return Err(Error::InvalidKernelSpec { size, direction });
    }
    let (dx, dy) = COMPASS[direction as usize];
    let offsets = (0..=size / 2).map(|k| (k * dx, k * dy)).collect();
    Ok(StructuringElement {
        size: size as u32,
        direction: direction as u8,
        offsets,
    })
}

/// Minkowski sum of the foreground with the kernel offsets, clipped to the
/// image.
pub fn dilate(mask: &BinaryMask, kernel: &StructuringElement) -> BinaryMask {
    let w = mask.width() as i64;
    let h = mask.height() as i64;
    let src = mask.bits();
    let mut out = src.to_vec();
    for &(dx, dy) in kernel.offsets() {
        if dx == 0 && dy == 0 {
            continue;
        }
        let (dx, dy) = (dx as i64, dy as i64);
        // source x range whose shifted target stays in bounds
        let x0 = (-dx).max(0);
        let x1 = (w - dx).min(w);
        if x0 >= x1 {
            continue;
        }
        for y in 0..h {
            let ty = y + dy;
            if ty < 0 || ty >= h {
                continue;
            }
            let src_row = &src[(y * w) as usize..((y + 1) * w) as usize];
            let dst_row = &mut out[(ty * w) as usize..((ty + 1) * w) as usize];
            for x in x0..x1 {
                if src_row[x as usize] {
                    dst_row[(x + dx) as usize] = true;
                }
            }
        }
    }
    BinaryMask::from_bits(mask.width(), mask.height(), out).expect("same dimensions")
}
