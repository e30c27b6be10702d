mod common;

use common::{brute_force_sqdist, disk, is_eight_connected};
use pointprompt::degrade::{degrade_box, scribble, BoxShrinkParams, ScribbleParams};
use pointprompt::geometry::{
    box_grid_points, mask_center, mask_random_point, select_points, BBox, GridSpec, PositionStrategy,
    RegionAnnotation,
};
use pointprompt::raster::{BinaryMask, PixelPoint};
use pointprompt::Error;
use proptest::prelude::*;

fn pts(v: &[(i32, i32)]) -> Vec<PixelPoint> {
    v.iter().map(|&(x, y)| PixelPoint::new(x, y)).collect()
}

fn rect_mask(size: u32, x0: u32, y0: u32, w: u32, h: u32) -> BinaryMask {
    BinaryMask::from_fn(size, size, |x, y| x >= x0 && x < x0 + w && y >= y0 && y < y0 + h)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn center_is_a_first_maximum_of_brute_force(
        x0 in 0u32..10, y0 in 0u32..10, w in 1u32..14, h in 1u32..14, disk_shape in any::<bool>(),
    ) {
        let mask = if disk_shape {
            disk(24, x0 as f64 + w as f64 / 2.0, y0 as f64 + h as f64 / 2.0, (w.min(h) as f64) / 2.0 + 0.5)
        } else {
            rect_mask(24, x0, y0, w, h)
        };
        prop_assume!(!mask.is_empty());
        let p = mask_center(&mask).unwrap();
        let d = brute_force_sqdist(&mask);
        let idx = p.y as usize * 24 + p.x as usize;
        let max = *d.iter().max().unwrap();
        prop_assert!(mask.is_foreground(p));
        prop_assert_eq!(d[idx], max);
        prop_assert!(d[..idx].iter().all(|&v| v < max));
    }

    #[test]
    fn center_translates_with_the_mask(w in 1u32..10, h in 1u32..10, tx in 0u32..10, ty in 0u32..10) {
        // shapes kept clear of the border so the exterior does not interfere
        let a = rect_mask(40, 5, 5, w, h);
        let b = rect_mask(40, 5 + tx, 5 + ty, w, h);
        let pa = mask_center(&a).unwrap();
        let pb = mask_center(&b).unwrap();
        prop_assert_eq!(pb, pa.offset(tx as i32, ty as i32));
    }

    #[test]
    fn random_point_is_foreground_and_seeded(seed in any::<u64>(), r in 2.0f64..10.0) {
        let m = disk(24, 12.0, 12.0, r);
        let p = mask_random_point(&m, seed).unwrap();
        prop_assert!(m.is_foreground(p));
        prop_assert_eq!(p, mask_random_point(&m, seed).unwrap());
    }

    #[test]
    fn grid_points_lie_inside_box(
        x in 0u32..50, y in 0u32..50, w in 1u32..80, h in 1u32..80,
        rows in 1u32..5, cols in 1u32..5, margin in 0.0f64..0.45, five in any::<bool>(),
    ) {
        let b = BBox::new(x, y, w, h);
        let grid = if five { GridSpec { margin_fraction: margin, ..GridSpec::five_corner() } } else { GridSpec::uniform(rows, cols, margin) };
        match box_grid_points(&b, &grid) {
            Ok(points) => {
                prop_assert_eq!(points.len(), grid.point_count());
                for p in &points {
                    prop_assert!(b.contains_point(*p));
                }
                let mut unique = points.clone();
                unique.sort_by_key(|p| (p.y, p.x));
                unique.dedup();
                prop_assert_eq!(unique.len(), points.len());
            }
            Err(e) => prop_assert!(matches!(e, Error::DegenerateGrid(_)), "{}", e),
        }
    }

    #[test]
    fn scribble_invariants(seed in any::<u64>(), r in 3.0f64..14.0, t in 0u32..30) {
        let gt = disk(32, 15.5, 15.5, r);
        let params = ScribbleParams { iterations: t, seed, ..ScribbleParams::default() };
        let s = scribble(&gt, &params).unwrap();
        prop_assert!(s.mask.is_subset_of(&gt));
        prop_assert!(s.mask.is_foreground(s.start));
        prop_assert!(is_eight_connected(&s.mask));
        prop_assert_eq!(s, scribble(&gt, &params).unwrap());
    }

    #[test]
    fn shrunken_box_stays_inside(
        x in 0u32..100, y in 0u32..100, w in 4u32..300, h in 4u32..300, seed in any::<u64>(), ratio in 0.1f64..1.0,
    ) {
        let gt = BBox::new(x, y, w, h);
        let params = BoxShrinkParams { target_area_ratio: ratio, seed };
        match degrade_box(&gt, &params) {
            Ok(b) => {
                prop_assert!(gt.contains_box(&b));
                prop_assert!(b.w >= 1 && b.h >= 1);
                prop_assert_eq!(b, degrade_box(&gt, &params).unwrap());
            }
            Err(e) => prop_assert!(matches!(e, Error::BoxTooSmall { .. }), "{}", e),
        }
    }
}

#[test]
fn c_shape_center_avoids_the_opening() {
    let mask = BinaryMask::from_fn(30, 24, |x, y| x < 12 || y < 7 || y >= 17);
    let p = mask_center(&mask).unwrap();
    assert!(mask.is_foreground(p));
    let (bx, by, bw, bh) = mask.bounding_box().unwrap();
    assert!(!mask.get(bx + bw / 2, by + bh / 2), "bounding-box center is in the opening");
}

#[test]
fn symmetric_disk_center() {
    for (size, r) in [(33u32, 10.0), (65, 25.0), (21, 7.5)] {
        let c = (size / 2) as f64;
        let p = mask_center(&disk(size, c, c, r)).unwrap();
        assert!((p.x as f64 - c).abs() <= 1.0 && (p.y as f64 - c).abs() <= 1.0, "{p:?}");
    }
}

#[test]
fn grid_layouts() {
    let b = BBox::new(0, 0, 100, 100);
    assert_eq!(
        box_grid_points(&b, &GridSpec::five_corner()).unwrap(),
        pts(&[(10, 10), (90, 10), (10, 90), (90, 90), (50, 50)])
    );
    let small = box_grid_points(&BBox::new(0, 0, 4, 4), &GridSpec::uniform(2, 2, 0.0)).unwrap();
    assert_eq!(small, pts(&[(1, 1), (3, 1), (1, 3), (3, 3)]));
    assert!(matches!(
        box_grid_points(&BBox::new(0, 0, 2, 2), &GridSpec::five_corner()),
        Err(Error::DegenerateGrid(_))
    ));
}

#[test]
fn select_points_dispatch() {
    let b = RegionAnnotation::Box(BBox::new(10, 20, 30, 40));
    assert_eq!(select_points(&b, None, PositionStrategy::Center, 0).unwrap(), pts(&[(25, 40)]));
    let p = RegionAnnotation::Point(PixelPoint::new(3, 4));
    assert_eq!(select_points(&p, None, PositionStrategy::Random, 9).unwrap(), pts(&[(3, 4)]));
    let m = RegionAnnotation::Mask(BinaryMask::new(4, 4));
    assert!(matches!(select_points(&m, None, PositionStrategy::Center, 0), Err(Error::EmptyRegion)));
}

#[test]
fn small_box_degradation_is_exhaustively_bounded() {
    let gt = BBox::new(0, 0, 4, 4);
    for seed in 0..200 {
        let b = degrade_box(&gt, &BoxShrinkParams { target_area_ratio: 0.1, seed }).unwrap();
        assert!(gt.contains_box(&b));
        assert!([1, 2].contains(&b.area()), "seed {seed}: {b:?}");
    }
    assert!(matches!(
        degrade_box(&BBox::new(0, 0, 3, 3), &BoxShrinkParams::default()),
        Err(Error::BoxTooSmall { .. })
    ));
}

#[test]
fn zero_iteration_scribble_is_the_start_pixel() {
    let gt = disk(64, 32.0, 32.0, 20.0);
    for seed in 0..20 {
        let s = scribble(&gt, &ScribbleParams { iterations: 0, seed, ..ScribbleParams::default() }).unwrap();
        assert_eq!(s.mask.count(), 1);
        assert!(s.mask.is_foreground(s.start));
    }
}

#[test]
fn default_scribble_on_disk_is_partial() {
    let gt = disk(64, 32.0, 32.0, 28.0);
    let s = scribble(&gt, &ScribbleParams { seed: 11, ..ScribbleParams::default() }).unwrap();
    assert!(s.mask.count() > 1 && s.mask.count() < gt.count());
}
