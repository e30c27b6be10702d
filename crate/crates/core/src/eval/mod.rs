//! Region-recognition evaluation against a chat model.
//!
//! Each region is turned into a marker image, the model is asked what lies
//! under the marker, and the free-form answer is mapped onto the category
//! list. Two scores come out: recognition accuracy, and a segmentation proxy
//! where the predicted class is painted over the region's pixels and compared
//! with the ground-truth labels painted the same way (mIoU).

mod report;
mod vote;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{validate_style, PromptTemplate};
use crate::error::{Error, Result};
use crate::gateway::{CategoryMatcher, ChatRequest, Gateway, Matcher};
use crate::geometry::{select_points, GridSpec, PositionStrategy, RegionAnnotation};
use crate::manifest::{derive_seed, load_image, load_region, AnnotationManifest, Sample, SkipReport};
use crate::parallel::ordered_map;
use crate::raster::{BinaryMask, Raster};
use crate::render::{color_name, render_marker, render_region_outline, PromptStyle, StyleSpec};

pub use report::{compute_miou, miou, ClassAccumulator, ClassIou, EvalReport, SampleRecord};
pub use vote::{summary_prompt, summary_responses, vote_infer, VoteSession};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    SegProxy,
    BoxAccuracy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregator {
    /// Ask the model to summarize the per-point responses.
    Summarize,
    /// Modal matched category; ties go to the smallest category index.
    Majority,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VoteConfig {
    pub grid: GridSpec,
    pub aggregator: Aggregator,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub mode: EvalMode,
    pub template: PromptTemplate,
    pub style: StyleSpec,
    pub matcher: Matcher,
    pub vote: Option<VoteConfig>,
    pub position: PositionStrategy,
    /// When false, the region outline is drawn instead of a point marker.
    pub gal_enabled: bool,
    pub seed: u64,
    #[serde(skip)]
    pub jobs: usize,
}

impl EvalConfig {
    pub fn new(mode: EvalMode) -> Self {
        EvalConfig {
            mode,
            template: PromptTemplate::default(),
            style: StyleSpec::default(),
            matcher: Matcher::TokenOverlap,
            vote: None,
            position: PositionStrategy::Center,
            gal_enabled: true,
            seed: 0,
            jobs: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.template.validate()?;
        validate_style(&self.style)?;
        if let Some(vote) = &self.vote {
            vote.grid.validate()?;
            if self.mode != EvalMode::BoxAccuracy {
                return Err(Error::InvalidConfig("voting needs box annotations (box-accuracy mode)".into()));
            }
            if !self.gal_enabled {
                return Err(Error::InvalidConfig("voting renders point markers; it cannot be combined with the outline baseline".into()));
            }
        }
        if self.position == PositionStrategy::Random && self.mode == EvalMode::BoxAccuracy {
            return Err(Error::InvalidConfig("random positions apply to masks only".into()));
        }
        Ok(())
    }
}

/// Answer key that makes the mock chat model a perfect oracle for `manifest`.
pub fn perfect_answer_key(manifest: &AnnotationManifest) -> BTreeMap<String, String> {
    let mut key = BTreeMap::new();
    for s in &manifest.samples {
        for r in &s.regions {
            if let Some(i) = manifest.category_index(r.category_id) {
                key.insert(request_id(&s.id, &r.region_id), manifest.categories[i].name.clone());
            }
        }
    }
    key
}

pub(crate) fn request_id(sample_id: &str, region_id: &str) -> String {
    format!("{sample_id}/{region_id}")
}

/// One region of a loaded image, with the marker style to draw on it.
pub struct RegionContext<'a> {
    pub sample_id: &'a str,
    pub region_id: &'a str,
    pub image: &'a Raster,
    pub annotation: &'a RegionAnnotation,
    pub style: PromptStyle,
}

fn outline_form(annotation: &RegionAnnotation, style: &PromptStyle) -> &'static str {
    match annotation {
        RegionAnnotation::Mask(_) => "contour",
        RegionAnnotation::Box(_) => "box",
        RegionAnnotation::Point(_) => style.shape.name(),
    }
}

/// Prediction for one region: `(category index, raw response)`.
fn predict_region(
    ctx: &RegionContext<'_>,
    cfg: &EvalConfig,
    gateway: &Gateway,
    matcher: &CategoryMatcher<'_>,
    categories: &[String],
) -> Result<(usize, String)> {
    if let Some(vote) = &cfg.vote {
        let session = vote_infer(ctx, vote, &cfg.template, gateway, matcher, categories)?;
        return Ok((session.predicted, session.aggregated));
    }
    let (rendered, question) = if cfg.gal_enabled {
        let seed = derive_seed(cfg.seed, &[ctx.sample_id, ctx.region_id]);
        let points = select_points(ctx.annotation, None, cfg.position, seed)?;
        (render_marker(ctx.image, points[0], &ctx.style)?, cfg.template.question_for(&ctx.style)?)
    } else {
        let [r, g, b] = ctx.style.color;
        let color = color_name(ctx.style.color).ok_or(Error::UnnamedColor(r, g, b))?;
        let form = outline_form(ctx.annotation, &ctx.style);
        let question = cfg
            .template
            .question
            .replace("{descriptor}", &format!("{color} {form}"))
            .replace("{color}", color)
            .replace("{form}", form);
        (render_region_outline(ctx.image, ctx.annotation, &ctx.style)?, question)
    };
    let req = ChatRequest::new(request_id(ctx.sample_id, ctx.region_id), question, rendered.to_png_bytes())?;
    let resp = gateway.chat(&req)?;
    Ok((matcher.best(&resp.text)?, resp.text))
}

struct SampleOutcome {
    records: Vec<SampleRecord>,
    accumulators: Vec<ClassAccumulator>,
    skips: SkipReport,
}

fn evaluate_sample(
    manifest: &AnnotationManifest,
    sample: &Sample,
    base_dir: &Path,
    cfg: &EvalConfig,
    gateway: &Gateway,
    matcher: &CategoryMatcher<'_>,
    categories: &[String],
) -> SampleOutcome {
    let mut out = SampleOutcome {
        records: Vec::new(),
        accumulators: vec![ClassAccumulator::default(); categories.len()],
        skips: SkipReport::default(),
    };
    let image = match load_image(base_dir, sample) {
        Ok(img) => img,
        Err(e) => {
            out.skips.push(&sample.id, None, e);
            return out;
        }
    };
    let (w, h) = image.dimensions();
    let style = match cfg.style.resolve(w, h) {
        Ok(s) => s,
        Err(e) => {
            out.skips.push(&sample.id, None, e);
            return out;
        }
    };
    let npx = w as usize * h as usize;
    let mut gold_map: Vec<Option<usize>> = vec![None; npx];
    let mut pred_map: Vec<Option<usize>> = vec![None; npx];

    for region in &sample.regions {
        let gold = manifest.category_index(region.category_id).expect("validated manifest");
        let result = load_region(base_dir, &region.annotation, w, h).and_then(|annotation| {
            if cfg.vote.is_some() && !matches!(annotation, RegionAnnotation::Box(_)) {
                return Err(Error::InvalidConfig(format!(
                    "voting needs a box, got a {}",
                    annotation.kind()
                )));
            }
            let ctx = RegionContext {
                sample_id: &sample.id,
                region_id: &region.region_id,
                image: &image,
                annotation: &annotation,
                style,
            };
            let (pred, response) = predict_region(&ctx, cfg, gateway, matcher, categories)?;
            Ok((annotation, pred, response))
        });
        match result {
            Ok((annotation, pred, response)) => {
                if cfg.mode == EvalMode::SegProxy {
                    paint(&annotation.pixel_mask(w, h), &mut gold_map, &mut pred_map, gold, pred);
                }
                out.records.push(SampleRecord {
                    id: request_id(&sample.id, &region.region_id),
                    predicted: categories[pred].clone(),
                    gold: categories[gold].clone(),
                    correct: pred == gold,
                    response,
                });
            }
            Err(e) => out.skips.push(&sample.id, Some(&region.region_id), e),
        }
    }

    if cfg.mode == EvalMode::SegProxy {
        for (g, p) in gold_map.iter().zip(&pred_map) {
            match (g, p) {
                (Some(g), Some(p)) if g == p => {
                    out.accumulators[*g].intersection += 1;
                    out.accumulators[*g].union += 1;
                }
                (g, p) => {
                    for c in [g, p].into_iter().flatten() {
                        out.accumulators[*c].union += 1;
                    }
                }
            }
        }
    }
    out
}

/// Later regions overwrite earlier ones where they overlap, for both maps.
fn paint(mask: &BinaryMask, gold_map: &mut [Option<usize>], pred_map: &mut [Option<usize>], gold: usize, pred: usize) {
    for (i, &on) in mask.bits().iter().enumerate() {
        if on {
            gold_map[i] = Some(gold);
            pred_map[i] = Some(pred);
        }
    }
}

/// Runs the evaluation over every region of `manifest`. Failures are recorded
/// per region and never abort the run; the report is identical for any
/// `jobs` setting.
pub fn evaluate(manifest: &AnnotationManifest, base_dir: &Path, cfg: &EvalConfig, gateway: &Gateway) -> Result<EvalReport> {
    cfg.validate()?;
    let categories = manifest.category_names();
    let matcher = CategoryMatcher::new(&categories, cfg.matcher, gateway.embedder())?;

    let outcomes = ordered_map(cfg.jobs, &manifest.samples, |s| {
        evaluate_sample(manifest, s, base_dir, cfg, gateway, &matcher, &categories)
    });

    let mut accumulators = vec![ClassAccumulator::default(); categories.len()];
    let mut records = Vec::new();
    let mut skips = SkipReport::default();
    for o in outcomes {
        for (acc, add) in accumulators.iter_mut().zip(&o.accumulators) {
            acc.merge(add);
        }
        records.extend(o.records);
        skips.extend(o.skips);
    }
    let mut header = BTreeMap::new();
    header.insert(
        "overlap_rule".into(),
        "overlapping regions: last writer wins in sample order".into(),
    );
    header.insert("config".into(), serde_json::to_string(cfg)?);
    Ok(EvalReport::assemble(manifest, cfg.mode, header, accumulators, records, skips))
}

/// Vote sessions for every box region of `manifest`; other regions and
/// failed sessions go to the skip report.
pub fn run_votes(
    manifest: &AnnotationManifest,
    base_dir: &Path,
    cfg: &EvalConfig,
    gateway: &Gateway,
) -> Result<(Vec<VoteSession>, SkipReport)> {
    cfg.validate()?;
    let vote = cfg
        .vote
        .ok_or_else(|| Error::InvalidConfig("voting needs a vote configuration".into()))?;
    let categories = manifest.category_names();
    let matcher = CategoryMatcher::new(&categories, cfg.matcher, gateway.embedder())?;
    let per_sample = ordered_map(cfg.jobs, &manifest.samples, |sample| {
        let mut sessions = Vec::new();
        let mut skips = SkipReport::default();
        let image = match load_image(base_dir, sample) {
            Ok(img) => img,
            Err(e) => {
                skips.push(&sample.id, None, e);
                return (sessions, skips);
            }
        };
        let (w, h) = image.dimensions();
        let style = match cfg.style.resolve(w, h) {
            Ok(s) => s,
            Err(e) => {
                skips.push(&sample.id, None, e);
                return (sessions, skips);
            }
        };
        for region in &sample.regions {
            let result = load_region(base_dir, &region.annotation, w, h).and_then(|annotation| {
                if !matches!(annotation, RegionAnnotation::Box(_)) {
                    return Err(Error::InvalidConfig(format!("voting needs a box, got a {}", annotation.kind())));
                }
                let ctx = RegionContext {
                    sample_id: &sample.id,
                    region_id: &region.region_id,
                    image: &image,
                    annotation: &annotation,
                    style,
                };
                vote_infer(&ctx, &vote, &cfg.template, gateway, &matcher, &categories)
            });
            match result {
                Ok(s) => sessions.push(s),
                Err(e) => skips.push(&sample.id, Some(&region.region_id), e),
            }
        }
        (sessions, skips)
    });
    let mut sessions = Vec::new();
    let mut skips = SkipReport::default();
    for (s, k) in per_sample {
        sessions.extend(s);
        skips.extend(k);
    }
    Ok((sessions, skips))
}
