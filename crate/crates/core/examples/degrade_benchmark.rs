//! Builds both degraded benchmarks (scribble masks and partial boxes) from a
//! converted manifest.
//!
//!     cargo run --example degrade_benchmark

use pointprompt::dataset::{convert_label_maps, pair_by_stem, ConvertOptions};
use pointprompt::degrade::{build_benchmark, BenchmarkMode, BenchmarkParams};
use pointprompt::manifest::AnnotationRef;
use pointprompt::synth::write_scene_dataset;

fn main() -> pointprompt::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let files = write_scene_dataset(dir.path(), 6, 64, 0)?;
    let pairs = pair_by_stem(&files.images, &files.labels)?;
    let gt_dir = dir.path().join("gt");
    let (gt, _) = convert_label_maps(&pairs, files.categories, &gt_dir, &ConvertOptions::default())?;

    for mode in [BenchmarkMode::ScribbleMask, BenchmarkMode::PartialBox] {
        let out = dir.path().join(format!("{mode:?}"));
        let (bench, skips) = build_benchmark(&gt, &gt_dir, &out, &BenchmarkParams::new(mode, 42), 0)?;
        bench.save(out.join("manifest.json"))?;
        println!("{mode:?}: {} regions, {} skipped", bench.region_count(), skips.len());
        for r in bench.samples[0].regions.iter().take(3) {
            match &r.annotation {
                AnnotationRef::Box { x, y, w, h } => println!("  {} box ({x}, {y}, {w}, {h})", r.region_id),
                AnnotationRef::Mask { path } => println!("  {} mask {path}", r.region_id),
                AnnotationRef::Point { x, y } => println!("  {} point ({x}, {y})", r.region_id),
            }
        }
    }
    Ok(())
}
