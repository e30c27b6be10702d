//! Synthetic "imprecise" prompts for evaluation: human-drawn-style scribble
//! masks and shrunken partial boxes.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BBox, RegionAnnotation};
use crate::manifest::{
    derive_seed, file_stem, load_image, load_region, rebase_path, AnnotationManifest, AnnotationRef,
    Provenance, Region, Sample, SkipReport,
};
use crate::parallel::ordered_map;
use crate::raster::{
    connected_component, dilate, gaussian_blur_threshold, make_kernel, BinaryMask, PixelPoint,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScribbleParams {
    /// Kernel sizes are drawn as `2 * k + 1` with `k` uniform in `0..=kernel_size_cap`.
    pub kernel_size_cap: u32,
    pub iterations: u32,
    pub sigma: f64,
    pub threshold: f64,
    pub seed: u64,
}

impl Default for ScribbleParams {
    fn default() -> Self {
        ScribbleParams {
            kernel_size_cap: 5,
            iterations: 20,
            sigma: 2.0,
            threshold: 0.5,
            seed: 0,
        }
    }
}

impl ScribbleParams {
    pub fn validate(&self) -> Result<()> {
        if self.kernel_size_cap < 1 {
            return Err(Error::InvalidConfig("kernel size cap must be >= 1".into()));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::InvalidConfig(format!("sigma {} must be positive", self.sigma)));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::InvalidConfig(format!("threshold {} not in (0, 1)", self.threshold)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxShrinkParams {
    pub target_area_ratio: f64,
    pub seed: u64,
}

impl Default for BoxShrinkParams {
    fn default() -> Self {
        BoxShrinkParams {
            target_area_ratio: 0.10,
            seed: 0,
        }
    }
}

impl BoxShrinkParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.target_area_ratio > 0.0 && self.target_area_ratio <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "target area ratio {} not in (0, 1]",
                self.target_area_ratio
            )));
        }
        Ok(())
    }
}

/// A degraded mask together with the pixel it was grown from.
#[derive(Clone, Debug, PartialEq)]
pub struct Scribble {
    pub mask: BinaryMask,
    pub start: PixelPoint,
}

/// Grows a stroke-like mask inside `gt`.
///
/// A start pixel is drawn uniformly from the foreground, then dilated
/// `iterations` times with directional ray kernels of random size and
/// direction. The result is cut back to `gt`, smoothed by a thresholded
/// Gaussian blur, cut back again, and reduced to the 8-connected component
/// holding the start pixel (which is always kept).
pub fn scribble(gt: &BinaryMask, params: &ScribbleParams) -> Result<Scribble> {
    params.validate()?;
    let count = gt.count();
    if count == 0 {
        return Err(Error::EmptyRegion);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let start = gt
        .foreground()
        .nth(rng.random_range(0..count))
        .expect("index below foreground count");

    let mut grown = BinaryMask::new(gt.width(), gt.height());
    grown.set(start.x as u32, start.y as u32, true);
    for _ in 0..params.iterations {
        let size = rng.random_range(0..=params.kernel_size_cap) as i32 * 2 + 1;
        let direction = rng.random_range(0..=7);
        let kernel = make_kernel(size, direction)?;
        grown = dilate(&grown, &kernel);
    }

    let truncated = grown.intersection(gt);
    let mut smoothed = gaussian_blur_threshold(&truncated, params.sigma, params.threshold).intersection(gt);
    smoothed.set(start.x as u32, start.y as u32, true);
    let mask = connected_component(&smoothed, start);
    Ok(Scribble { mask, start })
}

pub fn degrade_mask(gt: &BinaryMask, params: &ScribbleParams) -> Result<BinaryMask> {
    scribble(gt, params).map(|s| s.mask)
}

/// Shrinks `gt` to roughly `target_area_ratio` of its area with a random
/// aspect ratio and a random placement inside the original box.
pub fn degrade_box(gt: &BBox, params: &BoxShrinkParams) -> Result<BBox> {
    params.validate()?;
    gt.validate()?;
    let ratio = params.target_area_ratio;
    let area = gt.area();
    if (area as f64) < (1.0 / ratio).ceil() {
        return Err(Error::BoxTooSmall { area, ratio });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let (w, h) = (gt.w as i64, gt.h as i64);
    let target = ratio * area as f64;

    // widths for which a height in 1..=h can reach the target area
    let w_max = w.min((target.floor() as i64).max(1));
    let w_min = ((target / h as f64).ceil() as i64).clamp(1, w_max);

    let width_ratio: f64 = if ratio < 1.0 { rng.random_range(ratio..=1.0) } else { 1.0 };
    let mut new_w = ((width_ratio * w as f64).round() as i64).clamp(w_min, w_max);
    let mut new_h = ((target / new_w as f64).round() as i64).clamp(1, h);
    // re-derive the longer side from the shorter one to keep rounding error small
    if new_w >= new_h {
        new_w = ((target / new_h as f64).round() as i64).clamp(1, w);
    } else {
        new_h = ((target / new_w as f64).round() as i64).clamp(1, h);
    }

    let dx = rng.random_range(0..=(w - new_w));
    let dy = rng.random_range(0..=(h - new_h));
    Ok(BBox::new(
        gt.x + dx as u32,
        gt.y + dy as u32,
        new_w as u32,
        new_h as u32,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchmarkMode {
    ScribbleMask,
    PartialBox,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkParams {
    pub mode: BenchmarkMode,
    /// Global seed; per-region seeds derive from it and the sample/region ids.
    pub seed: u64,
    pub scribble: ScribbleParams,
    pub partial_box: BoxShrinkParams,
}

impl BenchmarkParams {
    pub fn new(mode: BenchmarkMode, seed: u64) -> Self {
        BenchmarkParams {
            mode,
            seed,
            scribble: ScribbleParams::default(),
            partial_box: BoxShrinkParams::default(),
        }
    }

    fn record(&self) -> serde_json::Value {
        match self.mode {
            BenchmarkMode::ScribbleMask => serde_json::json!({
                "mode": "scribble_mask",
                "kernel_size_cap": self.scribble.kernel_size_cap,
                "iterations": self.scribble.iterations,
                "sigma": self.scribble.sigma,
                "threshold": self.scribble.threshold,
            }),
            BenchmarkMode::PartialBox => serde_json::json!({
                "mode": "partial_box",
                "target_area_ratio": self.partial_box.target_area_ratio,
            }),
        }
    }
}

/// Replaces every region of `manifest` with its degraded counterpart.
///
/// Degraded masks are written under `out_dir/masks/`; the returned manifest is
/// meant to be saved in `out_dir`. Each region keeps its category and records
/// the original geometry, seed and parameters in its provenance. Regions that
/// cannot be degraded go to the skip report. Output is independent of `jobs`.
pub fn build_benchmark(
    manifest: &AnnotationManifest,
    base_dir: &Path,
    out_dir: &Path,
    params: &BenchmarkParams,
    jobs: usize,
) -> Result<(AnnotationManifest, SkipReport)> {
    params.scribble.validate()?;
    params.partial_box.validate()?;
    let mask_dir = out_dir.join("masks");
    let needed = if params.mode == BenchmarkMode::ScribbleMask { &mask_dir } else { out_dir };
    std::fs::create_dir_all(needed).map_err(|e| Error::io(needed, e))?;

    let results = ordered_map(jobs, &manifest.samples, |sample| {
        degrade_sample(sample, base_dir, out_dir, &mask_dir, params)
    });

    let mut out = manifest.clone();
    out.header
        .insert("degradation".into(), params.record().to_string());
    out.header.insert("degradation_seed".into(), params.seed.to_string());
    out.samples.clear();
    let mut skips = SkipReport::default();
    for (sample, sample_skips) in results {
        out.samples.push(sample);
        skips.extend(sample_skips);
    }
    Ok((out, skips))
}

fn degrade_sample(
    sample: &Sample,
    base_dir: &Path,
    out_dir: &Path,
    mask_dir: &Path,
    params: &BenchmarkParams,
) -> (Sample, SkipReport) {
    let mut skips = SkipReport::default();
    let mut out = Sample {
        id: sample.id.clone(),
        image_path: rebase_path(&sample.image_path, base_dir, out_dir),
        regions: Vec::new(),
    };
    let image = match load_image(base_dir, sample) {
        Ok(img) => img,
        Err(e) => {
            skips.push(&sample.id, None, e);
            return (out, skips);
        }
    };
    let (w, h) = image.dimensions();
    for region in &sample.regions {
        let seed = derive_seed(params.seed, &[&sample.id, &region.region_id]);
        let result = load_region(base_dir, &region.annotation, w, h).and_then(|annotation| {
            degrade_region(&annotation, sample, region, seed, mask_dir, params)
        });
        match result {
            Ok((annotation, start_point)) => out.regions.push(Region {
                region_id: region.region_id.clone(),
                category_id: region.category_id,
                annotation,
                provenance: Some(Provenance {
                    original_geometry: original_geometry(&region.annotation, base_dir, out_dir),
                    seed,
                    params: params.record(),
                    start_point,
                }),
            }),
            Err(e) => skips.push(&sample.id, Some(&region.region_id), e),
        }
    }
    (out, skips)
}

fn original_geometry(annotation: &AnnotationRef, base_dir: &Path, out_dir: &Path) -> AnnotationRef {
    match annotation {
        AnnotationRef::Mask { path } => AnnotationRef::Mask {
            path: rebase_path(path, base_dir, out_dir),
        },
        other => other.clone(),
    }
}

fn degrade_region(
    annotation: &RegionAnnotation,
    sample: &Sample,
    region: &Region,
    seed: u64,
    mask_dir: &Path,
    params: &BenchmarkParams,
) -> Result<(AnnotationRef, Option<PixelPoint>)> {
    match (params.mode, annotation) {
        (BenchmarkMode::ScribbleMask, RegionAnnotation::Mask(gt)) => {
            let s = scribble(gt, &ScribbleParams { seed, ..params.scribble })?;
            let name = format!("{}__{}.png", file_stem(&sample.id), file_stem(&region.region_id));
            s.mask.save_png(mask_dir.join(&name))?;
            Ok((
                AnnotationRef::Mask {
                    path: format!("masks/{name}"),
                },
                Some(s.start),
            ))
        }
        (BenchmarkMode::PartialBox, RegionAnnotation::Box(b)) => {
            let shrunk = degrade_box(b, &BoxShrinkParams { seed, ..params.partial_box })?;
            Ok((AnnotationRef::from_box(shrunk), None))
        }
        (BenchmarkMode::PartialBox, RegionAnnotation::Mask(m)) => {
            let (x, y, w, h) = m.bounding_box().ok_or(Error::EmptyRegion)?;
            let shrunk = degrade_box(&BBox::new(x, y, w, h), &BoxShrinkParams { seed, ..params.partial_box })?;
            Ok((AnnotationRef::from_box(shrunk), None))
        }
        (mode, other) => Err(Error::InvalidConfig(format!(
            "{mode:?} cannot degrade a {} annotation",
            other.kind()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk(size: u32, radius: f64) -> BinaryMask {
        let c = (size as f64 - 1.0) / 2.0;
        BinaryMask::from_fn(size, size, |x, y| {
            let (dx, dy) = (x as f64 - c, y as f64 - c);
            dx * dx + dy * dy <= radius * radius
        })
    }

    #[test]
    fn zero_iterations_is_start_pixel() {
        let gt = disk(32, 12.0);
        let s = scribble(&gt, &ScribbleParams { iterations: 0, seed: 3, ..Default::default() }).unwrap();
        assert_eq!(s.mask.count(), 1);
        assert!(s.mask.is_foreground(s.start));
        assert!(gt.is_foreground(s.start));
    }

    #[test]
    fn single_pixel_gt_is_absorbing() {
        let mut gt = BinaryMask::new(9, 9);
        gt.set(6, 2, true);
        for seed in 0..10 {
            let out = degrade_mask(&gt, &ScribbleParams { seed, ..Default::default() }).unwrap();
            assert_eq!(out, gt);
        }
    }

    #[test]
    fn disk_scribble_is_a_proper_connected_subset() {
        let gt = disk(64, 28.0);
        let s = scribble(&gt, &ScribbleParams { seed: 11, ..Default::default() }).unwrap();
        let area = s.mask.count();
        assert!(area > 1 && area < gt.count(), "area {area}");
        assert!(s.mask.is_subset_of(&gt));
        assert_eq!(connected_component(&s.mask, s.start), s.mask);
    }

    #[test]
    fn empty_gt_errors() {
        assert!(matches!(
            degrade_mask(&BinaryMask::new(4, 4), &ScribbleParams::default()),
            Err(Error::EmptyRegion)
        ));
    }

    #[test]
    fn scribble_is_seeded() {
        let gt = disk(40, 15.0);
        let p = ScribbleParams { seed: 99, ..Default::default() };
        assert_eq!(degrade_mask(&gt, &p).unwrap(), degrade_mask(&gt, &p).unwrap());
    }

    #[test]
    fn box_identity_ratio() {
        let gt = BBox::new(3, 4, 17, 9);
        let p = BoxShrinkParams { target_area_ratio: 1.0, seed: 5 };
        assert_eq!(degrade_box(&gt, &p).unwrap(), gt);
    }

    #[test]
    fn tiny_boxes() {
        let gt = BBox::new(0, 0, 4, 4);
        for seed in 0..200 {
            let b = degrade_box(&gt, &BoxShrinkParams { target_area_ratio: 0.1, seed }).unwrap();
            assert!(matches!(b.area(), 1 | 2), "{b:?}");
            assert!(gt.contains_box(&b));
        }
        let err = degrade_box(&BBox::new(0, 0, 1, 1), &BoxShrinkParams::default());
        assert!(matches!(err, Err(Error::BoxTooSmall { .. })));
    }

    #[test]
    fn narrow_box_reaches_target() {
        let gt = BBox::new(0, 0, 1000, 1);
        let b = degrade_box(&gt, &BoxShrinkParams { target_area_ratio: 0.1, seed: 1 }).unwrap();
        assert_eq!((b.w, b.h), (100, 1));
    }
}
