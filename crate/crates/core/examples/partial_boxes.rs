//! Shrinks boxes to roughly a tenth of their area, staying inside the original.
//!
//!     cargo run --example partial_boxes

use pointprompt::degrade::{degrade_box, BoxShrinkParams};
use pointprompt::geometry::BBox;

fn main() -> pointprompt::Result<()> {
    for gt in [BBox::new(10, 10, 100, 100), BBox::new(0, 0, 300, 40), BBox::new(5, 5, 4, 4)] {
        for seed in 0..3 {
            let b = degrade_box(&gt, &BoxShrinkParams { target_area_ratio: 0.1, seed })?;
            assert!(gt.contains_box(&b));
            println!(
                "{gt:?} seed {seed} -> {b:?}  area {} / {} = {:.3}",
                b.area(),
                gt.area(),
                b.area() as f64 / gt.area() as f64
            );
        }
    }
    match degrade_box(&BBox::new(0, 0, 3, 3), &BoxShrinkParams::default()) {
        Err(e) => println!("3x3 box: {e}"),
        Ok(b) => println!("3x3 box: {b:?}"),
    }
    Ok(())
}
