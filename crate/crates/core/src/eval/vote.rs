use serde::{Deserialize, Serialize};

use super::{request_id, Aggregator, RegionContext, VoteConfig};
use crate::dataset::PromptTemplate;
use crate::error::{Error, Result};
use crate::gateway::{CategoryMatcher, ChatRequest, Gateway};
use crate::geometry::{box_grid_points, RegionAnnotation};
use crate::raster::PixelPoint;
use crate::render::render_multi;

const SUMMARY_HEAD: &str = "Here is a list of responses: [";
const SUMMARY_MID: &str = "]. The instruction from the user is ";
const SUMMARY_TAIL: &str = " Please summarize these responses and answer the instruction from the user.";

/// Prompt asking the model to reconcile per-point responses.
pub fn summary_prompt(responses: &[String], instruction: &str) -> String {
    format!("{SUMMARY_HEAD}{}{SUMMARY_MID}{instruction}{SUMMARY_TAIL}", responses.join(", "))
}

/// Response list of a prompt built by [`summary_prompt`], split on `", "`.
pub fn summary_responses(prompt: &str) -> Option<Vec<String>> {
    let rest = prompt.strip_prefix(SUMMARY_HEAD)?;
    let end = rest.rfind(SUMMARY_MID)?;
    if !rest.ends_with(SUMMARY_TAIL) {
        return None;
    }
    let list = &rest[..end];
    if list.is_empty() {
        return Some(Vec::new());
    }
    Some(list.split(", ").map(str::to_string).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VoteSession {
    pub sample_id: String,
    pub region_id: String,
    pub points: Vec<PixelPoint>,
    /// One slot per grid point; `None` where the query failed.
    pub responses: Vec<Option<String>>,
    pub aggregator: Aggregator,
    pub aggregated: String,
    pub predicted: usize,
    pub predicted_category: String,
}

/// Queries the model once per grid point of a box region and aggregates the
/// answers. Failed points are dropped; the session fails only when every
/// point fails.
pub fn vote_infer(
    ctx: &RegionContext<'_>,
    vote: &VoteConfig,
    template: &PromptTemplate,
    gateway: &Gateway,
    matcher: &CategoryMatcher<'_>,
    categories: &[String],
) -> Result<VoteSession> {
    let RegionAnnotation::Box(b) = ctx.annotation else {
        return Err(Error::InvalidConfig(format!("voting needs a box, got a {}", ctx.annotation.kind())));
    };
    let points = box_grid_points(b, &vote.grid)?;
    let images = render_multi(ctx.image, &points, &ctx.style)?;
    let question = template.question_for(&ctx.style)?;
    let base_id = request_id(ctx.sample_id, ctx.region_id);
    let reqs = images
        .iter()
        .enumerate()
        .map(|(k, img)| ChatRequest::new(format!("{base_id}/p{k}"), question.clone(), img.to_png_bytes()))
        .collect::<Result<Vec<_>>>()?;

    let mut last_err = None;
    let responses: Vec<Option<String>> = gateway
        .chat_batch(&reqs)
        .into_iter()
        .map(|r| match r {
            Ok(resp) => Some(resp.text),
            Err(e) => {
                log::warn!("vote point dropped for {base_id}: {e}");
                last_err = Some(e);
                None
            }
        })
        .collect();
    let answered: Vec<String> = responses.iter().flatten().cloned().collect();
    if answered.is_empty() {
        return Err(last_err.unwrap_or(Error::EmptyRegion));
    }

    let (aggregated, predicted) = match vote.aggregator {
        Aggregator::Majority => {
            let mut counts = vec![0usize; categories.len()];
            for text in &answered {
                counts[matcher.best(text)?] += 1;
            }
            let max = *counts.iter().max().expect("non-empty categories");
            let idx = counts.iter().position(|&c| c == max).expect("max exists");
            (categories[idx].clone(), idx)
        }
        Aggregator::Summarize => {
            let prompt = summary_prompt(&answered, &question);
            let req = ChatRequest::new(format!("{base_id}/summary"), prompt, ctx.image.to_png_bytes())?;
            let text = gateway.chat(&req)?.text;
            let idx = matcher.best(&text)?;
            (text, idx)
        }
    };
    Ok(VoteSession {
        sample_id: ctx.sample_id.to_string(),
        region_id: ctx.region_id.to_string(),
        points,
        responses,
        aggregator: vote.aggregator,
        aggregated,
        predicted,
        predicted_category: categories[predicted].clone(),
    })
}
