use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EvalMode;
use crate::error::{Error, Result};
use crate::manifest::{AnnotationManifest, SkipReport};

/// Pixel counts for one class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassAccumulator {
    pub intersection: u64,
    pub union: u64,
}

impl ClassAccumulator {
    pub fn new(intersection: u64, union: u64) -> Self {
        ClassAccumulator { intersection, union }
    }

    pub fn merge(&mut self, other: &ClassAccumulator) {
        self.intersection += other.intersection;
        self.union += other.union;
    }

    pub fn iou(&self) -> Option<f64> {
        (self.union > 0).then(|| self.intersection as f64 / self.union as f64)
    }
}

/// Mean IoU over classes with a non-empty union; `None` if there are none.
pub fn miou(accumulators: &[ClassAccumulator]) -> Option<f64> {
    let ious: Vec<f64> = accumulators.iter().filter_map(ClassAccumulator::iou).collect();
    (!ious.is_empty()).then(|| ious.iter().sum::<f64>() / ious.len() as f64)
}

/// [`miou`] with an undefined mean reported as 0.
pub fn compute_miou(accumulators: &[ClassAccumulator]) -> f64 {
    miou(accumulators).unwrap_or(0.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassIou {
    pub category_id: u32,
    pub category: String,
    pub intersection_px: u64,
    pub union_px: u64,
    pub iou: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    pub predicted: String,
    pub gold: String,
    pub correct: bool,
    pub response: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub header: BTreeMap<String, String>,
    pub mode: EvalMode,
    pub per_class: Vec<ClassIou>,
    pub miou: f64,
    /// False when no class had any pixels, in which case `miou` is 0.
    pub miou_defined: bool,
    pub accuracy: f64,
    pub n_samples: usize,
    pub n_skipped: usize,
    pub per_sample: Vec<SampleRecord>,
    pub skips: SkipReport,
}

impl EvalReport {
    pub(crate) fn assemble(
        manifest: &AnnotationManifest,
        mode: EvalMode,
        header: BTreeMap<String, String>,
        accumulators: Vec<ClassAccumulator>,
        per_sample: Vec<SampleRecord>,
        skips: SkipReport,
    ) -> Self {
        let per_class = manifest
            .categories
            .iter()
            .zip(&accumulators)
            .map(|(c, a)| ClassIou {
                category_id: c.id,
                category: c.name.clone(),
                intersection_px: a.intersection,
                union_px: a.union,
                iou: a.iou(),
            })
            .collect();
        let m = miou(&accumulators);
        let n_samples = per_sample.len();
        let correct = per_sample.iter().filter(|r| r.correct).count();
        EvalReport {
            header,
            mode,
            per_class,
            miou: m.unwrap_or(0.0),
            miou_defined: m.is_some(),
            accuracy: if n_samples == 0 { 0.0 } else { correct as f64 / n_samples as f64 },
            n_samples,
            n_skipped: skips.len(),
            per_sample,
            skips,
        }
    }

    /// Fraction of attempted regions that were skipped.
    pub fn skip_rate(&self) -> f64 {
        let total = self.n_samples + self.n_skipped;
        if total == 0 {
            0.0
        } else {
            self.n_skipped as f64 / total as f64
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// One row per class followed by a summary row.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        w.write_record([
            "kind", "category_id", "category", "intersection_px", "union_px", "iou", "accuracy", "n_samples", "n_skipped",
        ])
        .expect("in-memory csv");
        for c in &self.per_class {
            w.write_record([
                "class".to_string(),
                c.category_id.to_string(),
                c.category.clone(),
                c.intersection_px.to_string(),
                c.union_px.to_string(),
                fmt(c.iou),
                String::new(),
                String::new(),
                String::new(),
            ])
            .expect("in-memory csv");
        }
        let inter: u64 = self.per_class.iter().map(|c| c.intersection_px).sum();
        let union: u64 = self.per_class.iter().map(|c| c.union_px).sum();
        w.write_record([
            "summary".to_string(),
            String::new(),
            "mIoU".to_string(),
            inter.to_string(),
            union.to_string(),
            fmt(self.miou_defined.then_some(self.miou)),
            format!("{:.6}", self.accuracy),
            self.n_samples.to_string(),
            self.n_skipped.to_string(),
        ])
        .expect("in-memory csv");
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8 csv")
    }

    /// Writes `report.json` and `report.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, body) in [("report.json", self.to_json()), ("report.csv", self.to_csv())] {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }

    pub fn summary_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:<24} {:>12} {:>12} {:>8}\n", "category", "intersection", "union", "IoU"));
        for c in &self.per_class {
            let iou = c.iou.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into());
            out.push_str(&format!(
                "{:<24} {:>12} {:>12} {:>8}\n",
                c.category, c.intersection_px, c.union_px, iou
            ));
        }
        let miou = if self.miou_defined { format!("{:.4}", self.miou) } else { "undefined (0)".into() };
        out.push_str(&format!("mIoU     {miou}\n"));
        out.push_str(&format!(
            "accuracy {:.4} ({} scored, {} skipped)\n",
            self.accuracy, self.n_samples, self.n_skipped
        ));
        out
    }
}
