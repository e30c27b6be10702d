//! Renders point-marker instruction samples and writes them as JSONL.
//!
//!     cargo run --example build_instructions

use pointprompt::dataset::{build_dataset, convert_label_maps, pair_by_stem, write_jsonl, BuildOptions, ConvertOptions};
use pointprompt::render::{MarkerShape, StyleSpec};
use pointprompt::synth::write_scene_dataset;

fn main() -> pointprompt::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let files = write_scene_dataset(dir.path(), 3, 64, 0)?;
    let pairs = pair_by_stem(&files.images, &files.labels)?;
    let gt_dir = dir.path().join("gt");
    let (gt, _) = convert_label_maps(&pairs, files.categories, &gt_dir, &ConvertOptions::default())?;

    let out = dir.path().join("dataset");
    let opts = BuildOptions {
        style: StyleSpec {
            shape: MarkerShape::Circle,
            color: [128, 0, 128],
            radius: Some(4),
            stroke: 2,
        },
        ..BuildOptions::default()
    };
    let built = build_dataset(&gt, &gt_dir, &out, &opts)?;
    write_jsonl(out.join("dataset.jsonl"), &built.samples)?;

    for s in built.samples.iter().take(4) {
        println!("{}", serde_json::to_string(s)?);
    }
    println!("{} samples, {} skipped", built.samples.len(), built.skips.len());
    Ok(())
}
