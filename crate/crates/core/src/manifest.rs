//! On-disk annotation manifest shared by every pipeline stage.
//!
//! A manifest is a JSON document listing categories and samples; each sample
//! points at an RGB image and carries region annotations. Mask regions refer
//! to single-channel PNG files. Relative paths resolve against the directory
//! holding the manifest.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{BBox, RegionAnnotation};
use crate::raster::{BinaryMask, PixelPoint, Raster};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Category {
    pub id: u32,
    pub name: String,
}

/// Serialized form of a region annotation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AnnotationRef {
    Point { x: i32, y: i32 },
    Box { x: u32, y: u32, w: u32, h: u32 },
    Mask { path: String },
}

impl AnnotationRef {
    pub fn from_box(b: BBox) -> Self {
        AnnotationRef::Box {
            x: b.x,
            y: b.y,
            w: b.w,
            h: b.h,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            AnnotationRef::Point { .. } => "point",
            AnnotationRef::Box { .. } => "box",
            AnnotationRef::Mask { .. } => "mask",
        }
    }
}

/// Where a degraded region came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub original_geometry: AnnotationRef,
    pub seed: u64,
    pub params: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_point: Option<PixelPoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub region_id: String,
    pub category_id: u32,
    pub annotation: AnnotationRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub image_path: String,
    pub regions: Vec<Region>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotationManifest {
    pub dataset_name: String,
    /// Free-form notes recording conventions used to produce the manifest.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub header: BTreeMap<String, String>,
    pub categories: Vec<Category>,
    pub samples: Vec<Sample>,
}

impl AnnotationManifest {
    pub fn new(dataset_name: impl Into<String>, categories: Vec<Category>) -> Self {
        AnnotationManifest {
            dataset_name: dataset_name.into(),
            header: BTreeMap::new(),
            categories,
            samples: Vec::new(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let manifest: AnnotationManifest = serde_json::from_str(&text)?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    /// Structural checks: unique category and sample ids, unique region ids
    /// per sample, and every region labelled with a known category.
    pub fn validate(&self) -> Result<()> {
        let mut ids = HashSet::new();
        for c in &self.categories {
            if !ids.insert(c.id) {
                return Err(Error::InvalidManifest(format!("duplicate category id {}", c.id)));
            }
        }
        let mut samples = HashSet::new();
        for s in &self.samples {
            if !samples.insert(s.id.as_str()) {
                return Err(Error::InvalidManifest(format!("duplicate sample id {:?}", s.id)));
            }
            let mut regions = HashSet::new();
            for r in &s.regions {
                if !regions.insert(r.region_id.as_str()) {
                    return Err(Error::InvalidManifest(format!(
                        "duplicate region id {:?} in sample {:?}",
                        r.region_id, s.id
                    )));
                }
                if !ids.contains(&r.category_id) {
                    return Err(Error::InvalidManifest(format!(
                        "region {:?} of sample {:?} has unknown category {}",
                        r.region_id, s.id, r.category_id
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn category_names(&self) -> Vec<String> {
        self.categories.iter().map(|c| c.name.clone()).collect()
    }

    pub fn category_index(&self, id: u32) -> Option<usize> {
        self.categories.iter().position(|c| c.id == id)
    }

    pub fn region_count(&self) -> usize {
        self.samples.iter().map(|s| s.regions.len()).sum()
    }
}

pub fn resolve_path(base_dir: &Path, path: &str) -> PathBuf {
    let p = Path::new(path);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base_dir.join(p)
    }
}

/// Re-expresses `path` (relative to `from`) so it stays valid from `to`.
/// Paths are kept verbatim when both directories are the same.
pub fn rebase_path(path: &str, from: &Path, to: &Path) -> String {
    if Path::new(path).is_absolute() || same_dir(from, to) {
        return path.to_string();
    }
    let joined = from.join(path);
    let abs = joined
        .canonicalize()
        .or_else(|_| std::path::absolute(&joined))
        .unwrap_or(joined);
    abs.to_string_lossy().into_owned()
}

fn same_dir(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(a), Ok(b)) => a == b,
        _ => a == b,
    }
}

pub fn load_image(base_dir: &Path, sample: &Sample) -> Result<Raster> {
    Raster::load_png(resolve_path(base_dir, &sample.image_path))
}

/// Loads and bounds-checks a region against an image of the given size.
pub fn load_region(base_dir: &Path, region: &AnnotationRef, width: u32, height: u32) -> Result<RegionAnnotation> {
    let annotation = match region {
        AnnotationRef::Point { x, y } => RegionAnnotation::Point(PixelPoint::new(*x, *y)),
        AnnotationRef::Box { x, y, w, h } => RegionAnnotation::Box(BBox::new(*x, *y, *w, *h)),
        AnnotationRef::Mask { path } => {
            RegionAnnotation::Mask(BinaryMask::load_png(resolve_path(base_dir, path))?)
        }
    };
    annotation.validate_in(width, height)?;
    Ok(annotation)
}

/// File-name-safe version of an identifier.
pub fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect()
}

/// Stable per-item seed: SHA-256 over the global seed and the identifying
/// parts, so results do not depend on processing order.
pub fn derive_seed(global: u64, parts: &[&str]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(global.to_le_bytes());
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part.as_bytes());
    }
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipEntry {
    pub sample_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region_id: Option<String>,
    pub reason: String,
}

/// Items a batch stage could not process. Batches never abort on these.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipReport {
    pub skipped: Vec<SkipEntry>,
}

impl SkipReport {
    pub fn push(&mut self, sample_id: &str, region_id: Option<&str>, reason: impl ToString) {
        self.skipped.push(SkipEntry {
            sample_id: sample_id.to_string(),
            region_id: region_id.map(str::to_string),
            reason: reason.to_string(),
        });
    }

    pub fn len(&self) -> usize {
        self.skipped.len()
    }

    pub fn is_empty(&self) -> bool {
        self.skipped.is_empty()
    }

    pub fn extend(&mut self, other: SkipReport) {
        self.skipped.extend(other.skipped);
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> AnnotationManifest {
        let mut m = AnnotationManifest::new(
            "tiny",
            vec![Category { id: 0, name: "background".into() }, Category { id: 7, name: "cat".into() }],
        );
        m.samples.push(Sample {
            id: "a".into(),
            image_path: "a.png".into(),
            regions: vec![Region {
                region_id: "r0".into(),
                category_id: 7,
                annotation: AnnotationRef::Box { x: 1, y: 2, w: 3, h: 4 },
                provenance: None,
            }],
        });
        m
    }

    #[test]
    fn json_shape() {
        let json = tiny().to_json();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["samples"][0]["regions"][0]["annotation"]["type"], "box");
        assert!(v.get("header").is_none());
        let back: AnnotationManifest = serde_json::from_str(&json).unwrap();
        assert_eq!(back, tiny());
    }

    #[test]
    fn validation_catches_bad_ids() {
        let mut m = tiny();
        m.samples[0].regions[0].category_id = 3;
        assert!(matches!(m.validate(), Err(Error::InvalidManifest(_))));

        let mut m = tiny();
        m.categories.push(Category { id: 7, name: "dup".into() });
        assert!(m.validate().is_err());

        let mut m = tiny();
        let r = m.samples[0].regions[0].clone();
        m.samples[0].regions.push(r);
        assert!(m.validate().is_err());
    }

    #[test]
    fn seeds_are_stable_and_distinct() {
        let a = derive_seed(42, &["s1", "r1"]);
        assert_eq!(a, derive_seed(42, &["s1", "r1"]));
        assert_ne!(a, derive_seed(43, &["s1", "r1"]));
        assert_ne!(a, derive_seed(42, &["s1r", "1"]));
        assert_ne!(a, derive_seed(42, &["s1", "r2"]));
    }

    #[test]
    fn file_stems_are_safe() {
        assert_eq!(file_stem("2007_000032/r 1"), "2007_000032_r_1");
    }

    #[test]
    fn region_bounds_checked() {
        let dir = Path::new(".");
        let err = load_region(dir, &AnnotationRef::Box { x: 5, y: 0, w: 10, h: 1 }, 8, 8);
        assert!(matches!(err, Err(Error::InvalidBox(_))));
        let err = load_region(dir, &AnnotationRef::Point { x: 8, y: 0 }, 8, 8);
        assert!(matches!(err, Err(Error::OutOfBounds { .. })));
    }
}
