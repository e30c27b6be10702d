//! Deterministic synthetic scenes: flat-colored disks and rectangles on a
//! background, with matching label maps. Used by the examples and tests.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::LabelMap;
use crate::error::{Error, Result};
use crate::manifest::{derive_seed, Category};
use crate::raster::Raster;

/// Category list used by [`write_scene_dataset`]; id 0 is the background.
pub const SCENE_CLASSES: [&str; 5] = ["background", "car", "cat", "person", "traffic light"];

fn class_color(label: u16) -> [u8; 3] {
    const COLORS: [[u8; 3]; 5] = [[40, 40, 40], [200, 60, 60], [60, 180, 60], [60, 60, 200], [220, 200, 50]];
    COLORS[label as usize % COLORS.len()]
}

/// One scene of `size` x `size` pixels. The image is split into a 2x2 grid
/// and every cell holds at most one shape, so shapes never touch.
pub fn scene(index: usize, size: u32, seed: u64) -> (Raster, LabelMap) {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &["scene", &index.to_string()]));
    let mut labels = vec![0u16; size as usize * size as usize];
    let cell = size / 2;
    let n_classes = SCENE_CLASSES.len() as u16;
    let mut placed = 0;
    for cy in 0..2 {
        for cx in 0..2 {
            let last = cx == 1 && cy == 1;
            if !(rng.random_bool(0.6) || (last && placed == 0)) {
                continue;
            }
            placed += 1;
            let label = rng.random_range(1..n_classes);
            let (x0, y0) = (cx * cell + 2, cy * cell + 2);
            let span = cell - 4;
            let w = rng.random_range(span / 3..=span);
            let h = rng.random_range(span / 3..=span);
            let (ox, oy) = (x0 + rng.random_range(0..=span - w), y0 + rng.random_range(0..=span - h));
            let disk = rng.random_bool(0.5);
            for y in oy..oy + h {
                for x in ox..ox + w {
                    let inside = !disk || {
                        let (rx, ry) = (w as f64 / 2.0, h as f64 / 2.0);
                        let (dx, dy) = (x as f64 + 0.5 - ox as f64 - rx, y as f64 + 0.5 - oy as f64 - ry);
                        (dx / rx).powi(2) + (dy / ry).powi(2) <= 1.0
                    };
                    if inside {
                        labels[(y * size + x) as usize] = label;
                    }
                }
            }
        }
    }
    let label_map = LabelMap {
        width: size,
        height: size,
        labels,
    };
    let image = Raster::from_fn(size, size, |x, y| {
        let [r, g, b] = class_color(label_map.get(x, y));
        let shade = ((x + y) % 8) as u8;
        [r.saturating_add(shade), g.saturating_add(shade), b]
    });
    (image, label_map)
}

/// Writes `labels` as an 8-bit grayscale PNG whose gray levels are the labels.
pub fn write_label_png(path: impl AsRef<Path>, labels: &LabelMap) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut enc = png::Encoder::new(std::io::BufWriter::new(file), labels.width, labels.height);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::Eight);
    let data: Vec<u8> = labels.labels.iter().map(|&v| v.min(255) as u8).collect();
    let image_err = |e: png::EncodingError| Error::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    enc.write_header()
        .map_err(image_err)?
        .write_image_data(&data)
        .map_err(image_err)
}

#[derive(Clone, Debug)]
pub struct SceneFiles {
    pub images: PathBuf,
    pub labels: PathBuf,
    pub categories: Vec<Category>,
}

/// Writes `n` scenes as `dir/images/scene_NNN.png` and `dir/labels/scene_NNN.png`.
pub fn write_scene_dataset(dir: &Path, n: usize, size: u32, seed: u64) -> Result<SceneFiles> {
    let images = dir.join("images");
    let labels = dir.join("labels");
    for d in [&images, &labels] {
        std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    for i in 0..n {
        let (img, lab) = scene(i, size, seed);
        let name = format!("scene_{i:03}.png");
        img.save_png(images.join(&name))?;
        write_label_png(labels.join(&name), &lab)?;
    }
    let categories = SCENE_CLASSES
        .iter()
        .enumerate()
        .map(|(i, name)| Category {
            id: i as u32,
            name: name.to_string(),
        })
        .collect();
    Ok(SceneFiles {
        images,
        labels,
        categories,
    })
}
