//! Draws every marker shape at one point and writes the PNGs plus sidecars.
//!
//!     cargo run --example render_markers

use pointprompt::raster::{PixelPoint, Raster};
use pointprompt::render::{render_marker, write_rendered, MarkerShape, PromptStyle};

fn main() -> pointprompt::Result<()> {
    let out = tempfile::tempdir().expect("temp dir");
    let image = Raster::from_fn(96, 64, |x, y| [(x * 2) as u8, (y * 3) as u8, 90]);
    let at = PixelPoint::new(40, 30);

    for (shape, color) in [
        (MarkerShape::Dot, [255, 0, 0]),
        (MarkerShape::Circle, [0, 255, 0]),
        (MarkerShape::Square, [0, 0, 255]),
        (MarkerShape::Cross, [255, 255, 0]),
    ] {
        let style = PromptStyle::new(shape, color, 6, 2)?;
        let rendered = render_marker(&image, at, &style)?;
        let changed = image
            .pixels()
            .iter()
            .zip(rendered.pixels())
            .filter(|(a, b)| a != b)
            .count();
        let path = out.path().join(format!("{}.png", shape.name()));
        write_rendered(&path, &rendered, at, &style)?;
        println!("{:<7} {changed:>3} px changed -> {}", shape.name(), path.display());
    }
    Ok(())
}
