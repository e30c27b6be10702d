//! Grows scribble-like masks out of a ground-truth disk for a few seeds.
//!
//!     cargo run --example degrade_masks

use pointprompt::degrade::{scribble, ScribbleParams};
use pointprompt::raster::BinaryMask;

fn main() -> pointprompt::Result<()> {
    let gt = BinaryMask::from_fn(48, 48, |x, y| {
        let (dx, dy) = (x as i64 - 24, y as i64 - 24);
        dx * dx + dy * dy <= 18 * 18
    });
    println!("ground truth: {} px", gt.count());

    for seed in 0..4 {
        for iterations in [0, 5, 20] {
            let params = ScribbleParams {
                iterations,
                seed,
                ..ScribbleParams::default()
            };
            let s = scribble(&gt, &params)?;
            assert!(s.mask.is_subset_of(&gt));
            println!(
                "seed {seed} T={iterations:<2} start ({:>2}, {:>2}) area {:>4}",
                s.start.x,
                s.start.y,
                s.mask.count()
            );
        }
    }

    let s = scribble(&gt, &ScribbleParams { seed: 7, ..ScribbleParams::default() })?;
    println!("{:?}", s.mask);
    let out = tempfile::tempdir().expect("temp dir");
    s.mask.save_png(out.path().join("scribble.png"))?;
    Ok(())
}
