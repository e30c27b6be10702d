//! Queries five grid points per box and aggregates the answers by majority
//! and by a summary request.
//!
//!     cargo run --example vote_inference

use std::collections::BTreeMap;
use std::sync::Arc;

use pointprompt::eval::{vote_infer, Aggregator, RegionContext, VoteConfig};
use pointprompt::dataset::PromptTemplate;
use pointprompt::gateway::{AnswerKeyChat, CategoryMatcher, Gateway, Matcher};
use pointprompt::geometry::{BBox, GridSpec, RegionAnnotation};
use pointprompt::raster::Raster;
use pointprompt::render::PromptStyle;

fn main() -> pointprompt::Result<()> {
    let categories: Vec<String> = ["bird", "cat", "dog"].map(String::from).to_vec();
    let answers = BTreeMap::from(
        [("img/r0/p0", "a cat"), ("img/r0/p1", "cat"), ("img/r0/p2", "a dog"), ("img/r0/p3", "cat"), ("img/r0/p4", "a small bird")]
            .map(|(k, v)| (k.to_string(), v.to_string())),
    );
    let gateway = Gateway::new(Arc::new(AnswerKeyChat::new(answers).with_echo_summaries(true)));
    let matcher = CategoryMatcher::new(&categories, Matcher::TokenOverlap, None)?;

    let image = Raster::filled(120, 120, [30, 30, 30]);
    let region = RegionAnnotation::Box(BBox::new(10, 10, 100, 100));
    let ctx = RegionContext {
        sample_id: "img",
        region_id: "r0",
        image: &image,
        annotation: &region,
        style: PromptStyle::default_for(120, 120),
    };
    for aggregator in [Aggregator::Majority, Aggregator::Summarize] {
        let vote = VoteConfig {
            grid: GridSpec::five_corner(),
            aggregator,
        };
        let s = vote_infer(&ctx, &vote, &PromptTemplate::default(), &gateway, &matcher, &categories)?;
        let points: Vec<String> = s.points.iter().map(|p| format!("({}, {})", p.x, p.y)).collect();
        println!("{aggregator:?}: points {}", points.join(" "));
        println!("  responses {:?}", s.responses);
        println!("  aggregated {:?} -> {}", s.aggregated, s.predicted_category);
    }
    Ok(())
}
