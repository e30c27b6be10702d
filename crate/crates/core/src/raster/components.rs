use super::{BinaryMask, PixelPoint, COMPASS};

/// The 8-connected foreground component containing `seed`. Returns an empty
/// mask when the seed is background or out of bounds.
pub fn connected_component(mask: &BinaryMask, seed: PixelPoint) -> BinaryMask {
    let mut out = BinaryMask::new(mask.width(), mask.height());
    if !mask.is_foreground(seed) {
        return out;
    }
    out.set(seed.x as u32, seed.y as u32, true);
    let mut stack = vec![seed];
    while let Some(p) = stack.pop() {
        for (dx, dy) in COMPASS {
            let n = p.offset(dx, dy);
            if mask.is_foreground(n) && !out.get(n.x as u32, n.y as u32) {
                out.set(n.x as u32, n.y as u32, true);
                stack.push(n);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn picks_only_seeded_blob() {
        let m = BinaryMask::from_ascii(&["##...", "##...", "....#", "...##"]);
        let a = connected_component(&m, PixelPoint::new(0, 0));
        assert_eq!(a, BinaryMask::from_ascii(&["##...", "##...", ".....", "....."]));
    }

    #[test]
    fn background_seed_is_empty() {
        let m = BinaryMask::from_ascii(&["#.", ".#"]);
        assert!(connected_component(&m, PixelPoint::new(1, 0)).is_empty());
        assert!(connected_component(&m, PixelPoint::new(5, 5)).is_empty());
    }

    #[test]
    fn diagonal_l_shape_is_one_component() {
        let m = BinaryMask::from_ascii(&["#....", ".#...", "..#..", "..###"]);
        assert_eq!(connected_component(&m, PixelPoint::new(4, 3)), m);
    }
}
