use super::BinaryMask;

fn gaussian_weights(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as i64;
    let mut weights: Vec<f64> = (-radius..=radius)
        .map(|d| (-((d * d) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= sum);
    weights
}

/// Blurs the 0/1 mask with a normalized Gaussian of radius `ceil(3 * sigma)`
/// (zero padding outside the image) and keeps pixels whose blurred value is at
/// least `threshold`.
///
/// Panics if `sigma` is not a positive finite number.
pub fn gaussian_blur_threshold(mask: &BinaryMask, sigma: f64, threshold: f64) -> BinaryMask {
    assert!(sigma.is_finite() && sigma > 0.0, "sigma must be positive");
    let weights = gaussian_weights(sigma);
    let radius = (weights.len() / 2) as i64;
    let w = mask.width() as i64;
    let h = mask.height() as i64;
    let bits = mask.bits();

    let mut horizontal = vec![0.0f64; (w * h) as usize];
    for y in 0..h {
        let row = &bits[(y * w) as usize..((y + 1) * w) as usize];
        for x in 0..w {
            if !row[x as usize] {
                continue;
            }
            // scatter this pixel's unit mass along the row
            for (k, &wt) in weights.iter().enumerate() {
                let tx = x + k as i64 - radius;
                if (0..w).contains(&tx) {
                    horizontal[(y * w + tx) as usize] += wt;
                }
            }
        }
    }

    let mut out = vec![false; (w * h) as usize];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, &wt) in weights.iter().enumerate() {
                let sy = y + k as i64 - radius;
                if (0..h).contains(&sy) {
                    acc += wt * horizontal[(sy * w + x) as usize];
                }
            }
            out[(y * w + x) as usize] = acc >= threshold;
        }
    }
    BinaryMask::from_bits(mask.width(), mask.height(), out).expect("same dimensions")
}
