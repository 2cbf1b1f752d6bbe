//! Seeded synthetic images: uniform noise textures, blurred copies and
//! blurred scenes with a sharp text watermark.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::filter::gaussian_blur;
use crate::font;
use crate::image::GrayImage;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform white noise in `[0, 1]`.
pub fn noise_image(width: usize, height: usize, seed: u64) -> GrayImage {
    let mut r = rng(seed);
    GrayImage::from_fn(width, height, |_, _| r.random::<f64>())
}

/// Noise texture with a random contrast and offset, then lightly smoothed so
/// that it resembles natural texture rather than pure pixel noise.
pub fn texture_image(width: usize, height: usize, seed: u64) -> GrayImage {
    let mut r = rng(seed ^ 0x5eed_7e47);
    let contrast = r.random_range(0.35..1.0);
    let offset = r.random_range(0.0..(1.0 - contrast));
    let smooth = r.random_range(0.0..0.6);
    let base = noise_image(width, height, seed);
    let base = gaussian_blur(&base, smooth);
    GrayImage::from_fn(width, height, |x, y| offset + contrast * base.get(x, y))
}

/// Stamps rows of random digits in a bright (or dark) ink onto `img`.
pub fn overlay_text(img: &GrayImage, seed: u64, lines: usize) -> GrayImage {
    let mut r = rng(seed ^ 0x7e47_0001);
    let (w, h) = (img.width(), img.height());
    let scale = (h / 40).max(1);
    let mut data = img.data().to_vec();
    let ink = if r.random_bool(0.5) { 1.0 } else { 0.0 };
    let (_, line_h) = font::text_size("0", scale);
    for line in 0..lines {
        let len = r.random_range(4..9);
        let text: String = (0..len).map(|_| char::from(b'0' + r.random_range(0..10u8))).collect();
        let (tw, _) = font::text_size(&text, scale);
        let x0 = r.random_range(0..w.saturating_sub(tw).max(1));
        let y0 = (h.saturating_sub((lines - line) * (line_h + scale * 2))).min(h - 1);
        font::render(&text, x0, y0, scale, |x, y| {
            if x < w && y < h {
                data[y * w + x] = ink;
            }
        });
    }
    GrayImage::from_vec_unchecked(w, h, data)
}

/// Labeled synthetic corpus: `n_sharp` textures (label 0), a Gaussian-blurred
/// copy of each (label 1) and `n_watermarked` blurred textures carrying a
/// sharp text overlay (label 1).
pub fn corpus(width: usize, height: usize, n_sharp: usize, n_watermarked: usize, seed: u64) -> Vec<(GrayImage, u8)> {
    let mut r = rng(seed);
    let mut out = Vec::with_capacity(2 * n_sharp + n_watermarked);
    for i in 0..n_sharp {
        let sharp = texture_image(width, height, seed.wrapping_add(i as u64 * 7919));
        let sigma = r.random_range(1.0..3.0);
        let blurred = gaussian_blur(&sharp, sigma);
        out.push((sharp, 0));
        out.push((blurred, 1));
    }
    for i in 0..n_watermarked {
        let base = texture_image(width, height, seed.wrapping_add(1_000_003 + i as u64 * 104_729));
        let sigma = r.random_range(1.5..3.0);
        let blurred = gaussian_blur(&base, sigma);
        out.push((overlay_text(&blurred, seed.wrapping_add(i as u64), 2), 1));
    }
    out
}
