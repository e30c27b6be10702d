//! Visual-prompt instruction data: every annotated region becomes one (or,
//! with a grid, several) images carrying a single point marker, paired with
//! a question that names the marker and an answer naming the category.

mod convert;

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{select_points, GridSpec, PositionStrategy};
use crate::manifest::{derive_seed, file_stem, load_image, load_region, AnnotationManifest, Sample, SkipReport};
use crate::parallel::ordered_map;
use crate::raster::PixelPoint;
use crate::render::{color_name, render_marker, write_rendered, PromptStyle, StyleSpec};

pub use convert::{convert_label_maps, pair_by_stem, read_label_map, ConvertOptions, LabelMap};

/// `"<color name> <shape name>"`, e.g. `"red dot"`.
pub fn region_descriptor(style: &PromptStyle) -> Result<String> {
    let [r, g, b] = style.color;
    let color = color_name(style.color).ok_or(Error::UnnamedColor(r, g, b))?;
    Ok(format!("{color} {}", style.shape.name()))
}

/// Style checks that hold for every image: sizes and a nameable color.
pub fn validate_style(spec: &StyleSpec) -> Result<()> {
    spec.validate()?;
    let [r, g, b] = spec.color;
    color_name(spec.color).ok_or(Error::UnnamedColor(r, g, b))?;
    Ok(())
}

/// Question/answer pair with `{color}`, `{form}`, `{descriptor}` and
/// `{category}` placeholders.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub question: String,
    pub answer: String,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        PromptTemplate {
            question: "What is the category of the object under the {color} {form}?".into(),
            answer: "{category}".into(),
        }
    }
}

impl PromptTemplate {
    pub fn validate(&self) -> Result<()> {
        if !(self.question.contains("{color} {form}") || self.question.contains("{descriptor}")) {
            return Err(Error::InvalidConfig(
                "question must reference the marker as `{color} {form}` or `{descriptor}`".into(),
            ));
        }
        for (name, text, allowed) in [
            ("question", &self.question, &["color", "form", "descriptor"][..]),
            ("answer", &self.answer, &["category"][..]),
        ] {
            if let Some(bad) = placeholders(text).into_iter().find(|p| !allowed.contains(&p.as_str())) {
                return Err(Error::InvalidConfig(format!("unknown placeholder {{{bad}}} in {name}")));
            }
        }
        Ok(())
    }

    pub fn question_for(&self, style: &PromptStyle) -> Result<String> {
        let descriptor = region_descriptor(style)?;
        let color = color_name(style.color).expect("named by region_descriptor");
        Ok(self
            .question
            .replace("{descriptor}", &descriptor)
            .replace("{color}", color)
            .replace("{form}", style.shape.name()))
    }

    pub fn answer_for(&self, category: &str) -> String {
        self.answer.replace("{category}", category)
    }
}

fn placeholders(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(start) = rest.find('{') {
        let Some(len) = rest[start..].find('}') else { break };
        out.push(rest[start + 1..start + len].to_string());
        rest = &rest[start + len + 1..];
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Assistant,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub role: Role,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StyleDescriptor {
    #[serde(flatten)]
    pub style: PromptStyle,
    pub descriptor: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub source_sample: String,
    pub source_region: String,
    pub category_id: u32,
    pub point: PixelPoint,
    pub point_index: usize,
}

/// One line of the output JSONL.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionSample {
    pub id: String,
    pub rendered_image_path: String,
    pub prompt_style: StyleDescriptor,
    pub conversations: Vec<Turn>,
    pub meta: SampleMeta,
}

impl InstructionSample {
    /// Conversation alternates user/assistant, starts with the user, and the
    /// first user turn names the marker.
    pub fn is_well_formed(&self) -> bool {
        let alternates = self.conversations.iter().enumerate().all(|(i, t)| {
            t.role == if i % 2 == 0 { Role::User } else { Role::Assistant }
        });
        alternates
            && self
                .conversations
                .first()
                .is_some_and(|t| t.text.contains(&self.prompt_style.descriptor))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BuildOptions {
    pub style: StyleSpec,
    pub template: PromptTemplate,
    /// Grid used to fan boxes out into several markers.
    pub grid: Option<GridSpec>,
    pub position: PositionStrategy,
    pub seed: u64,
    pub jobs: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            style: StyleSpec::default(),
            template: PromptTemplate::default(),
            grid: None,
            position: PositionStrategy::Center,
            seed: 0,
            jobs: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BuildOutput {
    pub samples: Vec<InstructionSample>,
    pub skips: SkipReport,
}

/// Renders one marker image per representative point of every region and
/// returns the matching instruction samples in manifest order. Images land in
/// `out_dir/images/` with a JSON sidecar each.
pub fn build_dataset(
    manifest: &AnnotationManifest,
    base_dir: &Path,
    out_dir: &Path,
    opts: &BuildOptions,
) -> Result<BuildOutput> {
    opts.template.validate()?;
    validate_style(&opts.style)?;
    if let Some(grid) = &opts.grid {
        grid.validate()?;
    }
    let image_dir = out_dir.join("images");
    std::fs::create_dir_all(&image_dir).map_err(|e| Error::io(&image_dir, e))?;

    let per_sample = ordered_map(opts.jobs, &manifest.samples, |s| {
        build_sample(manifest, s, base_dir, &image_dir, opts)
    });
    let mut out = BuildOutput::default();
    for (samples, skips) in per_sample {
        out.samples.extend(samples);
        out.skips.extend(skips);
    }
    Ok(out)
}

fn build_sample(
    manifest: &AnnotationManifest,
    sample: &Sample,
    base_dir: &Path,
    image_dir: &Path,
    opts: &BuildOptions,
) -> (Vec<InstructionSample>, SkipReport) {
    let mut out = Vec::new();
    let mut skips = SkipReport::default();
    let image = match load_image(base_dir, sample) {
        Ok(img) => img,
        Err(e) => {
            skips.push(&sample.id, None, e);
            return (out, skips);
        }
    };
    let (w, h) = image.dimensions();
    let style = match opts.style.resolve(w, h) {
        Ok(s) => s,
        Err(e) => {
            skips.push(&sample.id, None, e);
            return (out, skips);
        }
    };

    for region in &sample.regions {
        let result = (|| -> Result<Vec<InstructionSample>> {
            let annotation = load_region(base_dir, &region.annotation, w, h)?;
            let seed = derive_seed(opts.seed, &[&sample.id, &region.region_id]);
            let points = select_points(&annotation, opts.grid.as_ref(), opts.position, seed)?;
            let category = manifest
                .categories
                .iter()
                .find(|c| c.id == region.category_id)
                .ok_or_else(|| Error::InvalidManifest(format!("unknown category {}", region.category_id)))?;
            let descriptor = region_descriptor(&style)?;
            let question = opts.template.question_for(&style)?;
            let fan_out = opts.grid.is_some() && points.len() > 1;

            let mut made = Vec::with_capacity(points.len());
            for (k, &point) in points.iter().enumerate() {
                let rendered = render_marker(&image, point, &style)?;
                let mut id = format!("{}/{}", sample.id, region.region_id);
                let mut name = format!("{}__{}", file_stem(&sample.id), file_stem(&region.region_id));
                if fan_out {
                    id.push_str(&format!("/{k}"));
                    name.push_str(&format!("__{k}"));
                }
                let file = format!("{name}.png");
                write_rendered(&image_dir.join(&file), &rendered, point, &style)?;
                made.push(InstructionSample {
                    id,
                    rendered_image_path: format!("images/{file}"),
                    prompt_style: StyleDescriptor {
                        style,
                        descriptor: descriptor.clone(),
                    },
                    conversations: vec![
                        Turn {
                            role: Role::User,
                            text: question.clone(),
                        },
                        Turn {
                            role: Role::Assistant,
                            text: opts.template.answer_for(&category.name),
                        },
                    ],
                    meta: SampleMeta {
                        source_sample: sample.id.clone(),
                        source_region: region.region_id.clone(),
                        category_id: region.category_id,
                        point,
                        point_index: k,
                    },
                });
            }
            Ok(made)
        })();
        match result {
            Ok(made) => out.extend(made),
            Err(e) => skips.push(&sample.id, Some(&region.region_id), e),
        }
    }
    (out, skips)
}

pub fn write_jsonl(path: impl AsRef<Path>, samples: &[InstructionSample]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for s in samples {
        serde_json::to_writer(&mut w, s)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Vec<InstructionSample>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for line in std::io::BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::render::MarkerShape;

    fn style(shape: MarkerShape, color: [u8; 3]) -> PromptStyle {
        PromptStyle::new(shape, color, 4, 2).unwrap()
    }

    #[test]
    fn descriptors() {
        assert_eq!(region_descriptor(&style(MarkerShape::Dot, [255, 0, 0])).unwrap(), "red dot");
        assert_eq!(region_descriptor(&style(MarkerShape::Cross, [0, 255, 0])).unwrap(), "green cross");
        assert_eq!(
            region_descriptor(&style(MarkerShape::Circle, [128, 0, 128])).unwrap(),
            "purple circle"
        );
        assert!(matches!(
            region_descriptor(&style(MarkerShape::Dot, [1, 2, 3])),
            Err(Error::UnnamedColor(1, 2, 3))
        ));
    }

    #[test]
    fn default_template_wording() {
        let t = PromptTemplate::default();
        assert_eq!(
            t.question_for(&style(MarkerShape::Dot, [255, 0, 0])).unwrap(),
            "What is the category of the object under the red dot?"
        );
        assert_eq!(t.answer_for("cat"), "cat");
    }

    #[test]
    fn template_validation() {
        let bad = PromptTemplate {
            question: "What is {thing}?".into(),
            answer: "{category}".into(),
        };
        assert!(bad.validate().is_err());
        let bad = PromptTemplate {
            question: "What is under the {descriptor}?".into(),
            answer: "{label}".into(),
        };
        assert!(bad.validate().is_err());
        let ok = PromptTemplate {
            question: "Describe the object marked by the {descriptor}.".into(),
            answer: "It is a {category}.".into(),
        };
        ok.validate().unwrap();
    }
}
