//! Picks the most interior pixel of a mask with the exact distance transform.
//!
//!     cargo run --example mask_center

use pointprompt::geometry::{box_centroid, box_grid_points, mask_center, BBox, GridSpec};
use pointprompt::raster::{distance_transform, BinaryMask};

fn main() -> pointprompt::Result<()> {
    // C-shaped region: the bounding-box center falls in the opening.
    let mask = BinaryMask::from_fn(30, 24, |x, y| x < 12 || y < 7 || y >= 17);
    let field = distance_transform(&mask);
    let p = mask_center(&mask)?;
    println!("{mask:?}");
    let (bx, by, bw, bh) = mask.bounding_box().expect("non-empty");
    let mid = (bx + bw / 2, by + bh / 2);
    println!("bounding-box center {mid:?} is foreground: {}", mask.get(mid.0, mid.1));
    println!("interior point ({}, {}), squared distance {}", p.x, p.y, field.get(p.x as u32, p.y as u32));

    let b = BBox::new(0, 0, 100, 100);
    let c = box_centroid(&b)?;
    println!("box centroid ({}, {})", c.x, c.y);
    for (k, q) in box_grid_points(&b, &GridSpec::five_corner())?.iter().enumerate() {
        println!("five-corner {k}: ({}, {})", q.x, q.y);
    }
    for q in box_grid_points(&b, &GridSpec::uniform(2, 3, 0.0))? {
        print!("({}, {}) ", q.x, q.y);
    }
    println!();
    Ok(())
}
