//! Border handling and the separable Gaussian blur used to build test
//! fixtures and synthetic corpora.

use crate::image::GrayImage;

/// Reflect-101 index mapping (`dcb|abcd|cba`), the edge pixel is not repeated.
#[inline]
pub fn reflect101(i: isize, n: usize) -> usize {
    debug_assert!(n > 0);
    if n == 1 {
        return 0;
    }
    let n = n as isize;
    let period = 2 * (n - 1);
    let mut i = i.rem_euclid(period);
    if i >= n {
        i = period - i;
    }
    i as usize
}

/// Normalized 1-D Gaussian taps with radius `ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil().max(1.0) as isize;
    let denom = 2.0 * sigma * sigma;
    let mut taps: Vec<f64> = (-radius..=radius).map(|d| (-((d * d) as f64) / denom).exp()).collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

/// Separable Gaussian blur with reflect-101 borders.
///
/// `sigma <= 0` returns a copy of the input.
pub fn gaussian_blur(img: &GrayImage, sigma: f64) -> GrayImage {
    if sigma <= 0.0 {
        return img.clone();
    }
    let (w, h) = (img.width(), img.height());
    let taps = gaussian_kernel(sigma);
    let radius = (taps.len() / 2) as isize;
    let src = img.data();

    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                acc += t * row[reflect101(x as isize + k as isize - radius, w)];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                acc += t * tmp[reflect101(y as isize + k as isize - radius, h) * w + x];
            }
            out[y * w + x] = acc.clamp(0.0, 1.0);
        }
    }
    GrayImage::from_vec_unchecked(w, h, out)
}
