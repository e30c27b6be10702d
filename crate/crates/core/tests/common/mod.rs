#![allow(dead_code)]

use std::path::{Path, PathBuf};

use pointprompt::dataset::{convert_label_maps, pair_by_stem, ConvertOptions};
use pointprompt::manifest::AnnotationManifest;
use pointprompt::raster::BinaryMask;
use pointprompt::synth::write_scene_dataset;

/// Squared distance from every pixel to the nearest background pixel, by
/// scanning all background pixels including a one-pixel exterior ring.
pub fn brute_force_sqdist(mask: &BinaryMask) -> Vec<u64> {
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    let mut background = Vec::new();
    for y in -1..=h {
        for x in -1..=w {
            let inside = x >= 0 && y >= 0 && x < w && y < h;
            if !inside || !mask.get(x as u32, y as u32) {
                background.push((x, y));
            }
        }
    }
    let mut out = Vec::with_capacity((w * h) as usize);
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x as u32, y as u32) {
                out.push(0);
                continue;
            }
            let d = background
                .iter()
                .map(|&(bx, by)| ((bx - x).pow(2) + (by - y).pow(2)) as u64)
                .min()
                .expect("exterior ring is background");
            out.push(d);
        }
    }
    out
}

/// Thresholded 2-D Gaussian convolution over a `ceil(3 sigma)` window with
/// zero padding, evaluated pixel by pixel.
pub fn dense_blur_threshold(mask: &BinaryMask, sigma: f64, threshold: f64) -> BinaryMask {
    let r = (3.0 * sigma).ceil() as i64;
    let mut weights = Vec::new();
    let mut total = 0.0;
    for dy in -r..=r {
        for dx in -r..=r {
            let v = (-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp();
            weights.push((dx, dy, v));
            total += v;
        }
    }
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    BinaryMask::from_fn(mask.width(), mask.height(), |x, y| {
        let mut acc = 0.0;
        for &(dx, dy, v) in &weights {
            let (sx, sy) = (x as i64 + dx, y as i64 + dy);
            if sx >= 0 && sy >= 0 && sx < w && sy < h && mask.get(sx as u32, sy as u32) {
                acc += v;
            }
        }
        acc / total >= threshold
    })
}

/// Whether the foreground is a single 8-connected piece, by union-find.
pub fn is_eight_connected(mask: &BinaryMask) -> bool {
    let w = mask.width() as usize;
    let n = w * mask.height() as usize;
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let bits = mask.bits();
    for i in 0..n {
        if !bits[i] {
            continue;
        }
        let (x, y) = (i % w, i / w);
        let neighbours = [(1i64, 0i64), (-1, 1), (0, 1), (1, 1)];
        for (dx, dy) in neighbours {
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            if nx < 0 || nx >= w as i64 || ny as usize >= mask.height() as usize {
                continue;
            }
            let j = ny as usize * w + nx as usize;
            if bits[j] {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    let mut roots = (0..n).filter(|&i| bits[i]).map(|i| find(&mut parent, i)).collect::<Vec<_>>();
    roots.sort_unstable();
    roots.dedup();
    roots.len() <= 1
}

pub fn disk(size: u32, cx: f64, cy: f64, r: f64) -> BinaryMask {
    BinaryMask::from_fn(size, size, |x, y| {
        let (dx, dy) = (x as f64 - cx, y as f64 - cy);
        dx * dx + dy * dy <= r * r
    })
}

/// Synthetic scenes converted into a ground-truth mask manifest at
/// `dir/gt/manifest.json`.
pub fn scene_manifest(dir: &Path, n: usize) -> (AnnotationManifest, PathBuf) {
    let files = write_scene_dataset(&dir.join("src"), n, 64, 0).unwrap();
    let pairs = pair_by_stem(&files.images, &files.labels).unwrap();
    let gt_dir = dir.join("gt");
    let (m, skips) = convert_label_maps(&pairs, files.categories, &gt_dir, &ConvertOptions::default()).unwrap();
    assert!(skips.is_empty());
    m.save(gt_dir.join("manifest.json")).unwrap();
    (m, gt_dir)
}

/// Every file under `dir`, as sorted (relative path, bytes) pairs.
pub fn tree_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}
