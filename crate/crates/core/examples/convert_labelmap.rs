//! Converts label-map PNGs into a mask manifest, one region per connected segment.
//!
//!     cargo run --example convert_labelmap

use pointprompt::dataset::{convert_label_maps, pair_by_stem, ConvertOptions};
use pointprompt::synth::write_scene_dataset;

fn main() -> pointprompt::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let files = write_scene_dataset(dir.path(), 4, 64, 0)?;
    let pairs = pair_by_stem(&files.images, &files.labels)?;
    let out = dir.path().join("converted");
    let (manifest, skips) = convert_label_maps(&pairs, files.categories, &out, &ConvertOptions::default())?;
    manifest.save(out.join("manifest.json"))?;

    for s in &manifest.samples {
        let names: Vec<String> = s
            .regions
            .iter()
            .map(|r| format!("{}={}", r.region_id, manifest.categories[manifest.category_index(r.category_id).unwrap()].name))
            .collect();
        println!("{:<10} {}", s.id, names.join(" "));
    }
    println!("{} regions, {} skipped", manifest.region_count(), skips.len());
    Ok(())
}
