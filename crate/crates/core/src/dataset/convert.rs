//! Semantic-segmentation label maps to annotation manifests.
//!
//! A label map is a PNG whose raw pixel value (palette index for indexed
//! images, gray level otherwise) is a category id. Every 8-connected
//! component of one value becomes one mask region.

use std::collections::BTreeMap;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::manifest::{
    file_stem, AnnotationManifest, AnnotationRef, Category, Region, Sample, SkipReport,
};
use crate::raster::{BinaryMask, Raster, COMPASS};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMap {
    pub width: u32,
    pub height: u32,
    pub labels: Vec<u16>,
}

impl LabelMap {
    pub fn get(&self, x: u32, y: u32) -> u16 {
        self.labels[y as usize * self.width as usize + x as usize]
    }

    /// 8-connected components of equal label, in row-major order of their
    /// first pixel, as `(label, mask)`.
    pub fn components(&self) -> Vec<(u16, BinaryMask)> {
        let (w, h) = (self.width as usize, self.height as usize);
        let mut seen = vec![false; w * h];
        let mut out = Vec::new();
        let mut stack = Vec::new();
        for start in 0..w * h {
            if seen[start] {
                continue;
            }
            let label = self.labels[start];
            let mut bits = vec![false; w * h];
            seen[start] = true;
            stack.push(start);
            while let Some(i) = stack.pop() {
                bits[i] = true;
                let (x, y) = ((i % w) as i64, (i / w) as i64);
                for (dx, dy) in COMPASS {
                    let (nx, ny) = (x + dx as i64, y + dy as i64);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if !seen[j] && self.labels[j] == label {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
            let mask = BinaryMask::from_bits(self.width, self.height, bits).expect("same dimensions");
            out.push((label, mask));
        }
        out
    }
}

/// Reads raw label values from an 8-bit indexed or 8/16-bit grayscale PNG.
pub fn read_label_map(path: impl AsRef<Path>) -> Result<LabelMap> {
    let path = path.as_ref();
    let image_err = |message: String| Error::Image {
        path: path.to_path_buf(),
        message,
    };
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(|e| image_err(e.to_string()))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| image_err("label map too large".into()))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(|e| image_err(e.to_string()))?;
    let (width, height) = (info.width, info.height);
    let labels: Vec<u16> = match (info.color_type, info.bit_depth) {
        (png::ColorType::Indexed | png::ColorType::Grayscale, png::BitDepth::Eight) => (0..height as usize)
            .flat_map(|y| {
                let row = &buf[y * info.line_size..y * info.line_size + width as usize];
                row.iter().map(|&v| v as u16).collect::<Vec<_>>()
            })
            .collect(),
        (png::ColorType::Grayscale, png::BitDepth::Sixteen) => (0..height as usize)
            .flat_map(|y| {
                let row = &buf[y * info.line_size..y * info.line_size + 2 * width as usize];
                row.chunks_exact(2)
                    .map(|b| u16::from_be_bytes([b[0], b[1]]))
                    .collect::<Vec<_>>()
            })
            .collect(),
        (ct, bd) => {
            return Err(image_err(format!(
                "label maps must be 8-bit indexed or 8/16-bit grayscale, got {ct:?} {bd:?}"
            )))
        }
    };
    Ok(LabelMap {
        width,
        height,
        labels,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvertOptions {
    pub dataset_name: String,
    /// Label values that never become regions (e.g. 255 for "void").
    pub ignore: Vec<u16>,
    /// Components smaller than this many pixels are dropped.
    pub min_area: usize,
}

impl Default for ConvertOptions {
    fn default() -> Self {
        ConvertOptions {
            dataset_name: "converted".into(),
            ignore: vec![255],
            min_area: 1,
        }
    }
}

/// Pairs `images_dir/<stem>.png` with `labels_dir/<stem>.png`, sorted by stem.
pub fn pair_by_stem(images_dir: &Path, labels_dir: &Path) -> Result<Vec<(String, PathBuf, PathBuf)>> {
    let mut images = BTreeMap::new();
    for entry in std::fs::read_dir(images_dir).map_err(|e| Error::io(images_dir, e))? {
        let path = entry.map_err(|e| Error::io(images_dir, e))?.path();
        let is_png = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if let (true, Some(stem)) = (is_png, path.file_stem()) {
            images.insert(stem.to_string_lossy().into_owned(), path);
        }
    }
    Ok(images
        .into_iter()
        .filter_map(|(stem, image)| {
            let label = labels_dir.join(format!("{stem}.png"));
            label.exists().then_some((stem, image, label))
        })
        .collect())
}

/// Builds a manifest from `(sample id, image, label map)` triples, writing one
/// mask PNG per region to `out_dir/masks/`. Unreadable pairs, size mismatches
/// and labels missing from `categories` go to the skip report.
pub fn convert_label_maps(
    pairs: &[(String, PathBuf, PathBuf)],
    categories: Vec<Category>,
    out_dir: &Path,
    opts: &ConvertOptions,
) -> Result<(AnnotationManifest, SkipReport)> {
    let mask_dir = out_dir.join("masks");
    std::fs::create_dir_all(&mask_dir).map_err(|e| Error::io(&mask_dir, e))?;
    let mut manifest = AnnotationManifest::new(opts.dataset_name.clone(), categories);
    manifest.header.insert(
        "region_rule".into(),
        "each 8-connected component of a label value is one region; same-class segments are not merged".into(),
    );
    let ignore: Vec<String> = opts.ignore.iter().map(u16::to_string).collect();
    manifest.header.insert("ignored_labels".into(), ignore.join(","));
    let mut skips = SkipReport::default();

    for (id, image_path, label_path) in pairs {
        let loaded = Raster::load_png(image_path).and_then(|img| Ok((img, read_label_map(label_path)?)));
        let (image, labels) = match loaded {
            Ok(v) => v,
            Err(e) => {
                skips.push(id, None, e);
                continue;
            }
        };
        if image.dimensions() != (labels.width, labels.height) {
            skips.push(
                id,
                None,
                Error::DimensionMismatch {
                    expected: image.dimensions(),
                    actual: (labels.width, labels.height),
                },
            );
            continue;
        }
        let image_abs = std::path::absolute(image_path).map_err(|e| Error::io(image_path, e))?;
        let mut sample = Sample {
            id: id.clone(),
            image_path: image_abs.to_string_lossy().into_owned(),
            regions: Vec::new(),
        };
        for (label, mask) in labels.components() {
            if opts.ignore.contains(&label) || mask.count() < opts.min_area {
                continue;
            }
            let region_id = format!("r{}", sample.regions.len());
            if manifest.category_index(label as u32).is_none() {
                skips.push(id, Some(&region_id), format!("label {label} has no category"));
                continue;
            }
            let name = format!("{}__{}.png", file_stem(id), region_id);
            mask.save_png(mask_dir.join(&name))?;
            sample.regions.push(Region {
                region_id,
                category_id: label as u32,
                annotation: AnnotationRef::Mask {
                    path: format!("masks/{name}"),
                },
                provenance: None,
            });
        }
        manifest.samples.push(sample);
    }
    manifest.validate()?;
    Ok((manifest, skips))
}
