//! Scores a scribble benchmark against an answer-key mock: once as a perfect
//! oracle, once with a model that always answers "background".
//!
//!     cargo run --example evaluate_mock

use std::collections::BTreeMap;
use std::sync::Arc;

use pointprompt::dataset::{convert_label_maps, pair_by_stem, ConvertOptions};
use pointprompt::degrade::{build_benchmark, BenchmarkMode, BenchmarkParams};
use pointprompt::eval::{evaluate, perfect_answer_key, EvalConfig, EvalMode};
use pointprompt::gateway::{AnswerKeyChat, Gateway};
use pointprompt::synth::write_scene_dataset;

fn main() -> pointprompt::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let files = write_scene_dataset(dir.path(), 8, 64, 0)?;
    let pairs = pair_by_stem(&files.images, &files.labels)?;
    let gt_dir = dir.path().join("gt");
    let (gt, _) = convert_label_maps(&pairs, files.categories, &gt_dir, &ConvertOptions::default())?;
    let bench_dir = dir.path().join("scribble");
    let (bench, _) = build_benchmark(&gt, &gt_dir, &bench_dir, &BenchmarkParams::new(BenchmarkMode::ScribbleMask, 1), 0)?;

    let cfg = EvalConfig::new(EvalMode::SegProxy);

    let oracle = Gateway::new(Arc::new(AnswerKeyChat::new(perfect_answer_key(&bench))));
    let report = evaluate(&bench, &bench_dir, &cfg, &oracle)?;
    println!("perfect oracle\n{}", report.summary_table());

    let lazy = Gateway::new(Arc::new(AnswerKeyChat::new(BTreeMap::new()).with_fallback("I think it is the background.")));
    let report = evaluate(&bench, &bench_dir, &cfg, &lazy)?;
    println!("always background\n{}", report.summary_table());

    let out = dir.path().join("report");
    report.write(&out)?;
    print!("{}", std::fs::read_to_string(out.join("report.csv")).expect("csv written"));
    Ok(())
}
