//! Direct-formula reference implementations, written independently of the
//! library code paths they check.
#![allow(dead_code)]

use patchblur::{GrayImage, Region};

pub fn reflect(mut i: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    loop {
        if i < 0 {
            i = -i;
        } else if i >= n {
            i = 2 * (n - 1) - i;
        } else {
            return i as usize;
        }
    }
}

pub fn px(img: &GrayImage, r: &Region, x: isize, y: isize) -> f64 {
    img.get(r.x0 + reflect(x, r.width), r.y0 + reflect(y, r.height))
}

pub const SOBEL_X: [[f64; 3]; 3] = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
pub const SOBEL_Y: [[f64; 3]; 3] = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]];
pub const LAPLACE: [[f64; 3]; 3] = [[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]];

/// Correlation with a 3x3 kernel, reflect-101 inside the region.
pub fn filter3(img: &GrayImage, r: &Region, k: &[[f64; 3]; 3]) -> Vec<f64> {
    let mut out = Vec::with_capacity(r.area());
    for y in 0..r.height as isize {
        for x in 0..r.width as isize {
            let mut acc = 0.0;
            for (dy, row) in k.iter().enumerate() {
                for (dx, &kv) in row.iter().enumerate() {
                    acc += kv * px(img, r, x + dx as isize - 1, y + dy as isize - 1);
                }
            }
            out.push(acc);
        }
    }
    out
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn pop_var(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64
}

pub fn tenengrad(img: &GrayImage, r: &Region) -> f64 {
    let sx = filter3(img, r, &SOBEL_X);
    let sy = filter3(img, r, &SOBEL_Y);
    let ten: Vec<f64> = sx.iter().zip(&sy).map(|(a, b)| a * a + b * b).collect();
    mean(&ten)
}

pub fn laplacian(img: &GrayImage, r: &Region) -> (f64, f64) {
    let lap = filter3(img, r, &LAPLACE);
    (mean(&lap), pop_var(&lap))
}

pub fn nglv(img: &GrayImage, r: &Region, eps: f64) -> f64 {
    let vals: Vec<f64> = (0..r.height)
        .flat_map(|y| (0..r.width).map(move |x| (x, y)))
        .map(|(x, y)| img.get(r.x0 + x, r.y0 + y))
        .collect();
    pop_var(&vals) / (mean(&vals) + eps)
}

/// riu2 code from an explicit circular list of neighbor bits.
pub fn lbp_code(img: &GrayImage, r: &Region, x: isize, y: isize, threshold: f64) -> u8 {
    let offsets = [(-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0)];
    let c = px(img, r, x, y);
    let bits: Vec<bool> = offsets.iter().map(|&(dx, dy)| px(img, r, x + dx, y + dy) > c + threshold).collect();
    let transitions = (0..8).filter(|&i| bits[i] != bits[(i + 1) % 8]).count();
    if transitions <= 2 {
        bits.iter().filter(|&&b| b).count() as u8
    } else {
        9
    }
}

pub fn lbp_codes(img: &GrayImage, r: &Region, threshold: f64) -> Vec<u8> {
    let mut out = Vec::new();
    for y in 0..r.height as isize {
        for x in 0..r.width as isize {
            out.push(lbp_code(img, r, x, y, threshold));
        }
    }
    out
}

/// Naive O(n * w^2) sliding-window sharpness map.
pub fn sharpness_map(codes: &[u8], width: usize, height: usize, window: usize) -> Vec<f64> {
    let mut out = Vec::new();
    for y in 0..=height - window {
        for x in 0..=width - window {
            let mut count = 0usize;
            for wy in 0..window {
                for wx in 0..window {
                    if codes[(y + wy) * width + x + wx] >= 6 {
                        count += 1;
                    }
                }
            }
            out.push(count as f64 / (window * window) as f64);
        }
    }
    out
}

pub fn lbp_stats(img: &GrayImage, r: &Region, threshold: f64, window: usize) -> (f64, f64) {
    let codes = lbp_codes(img, r, threshold);
    let map = sharpness_map(&codes, r.width, r.height, window);
    (mean(&map), pop_var(&map))
}

/// O(n^2) pair count: (concordant + ties / 2) / (n_pos * n_neg).
pub fn auc_pairs(scores: &[f64], labels: &[u8]) -> f64 {
    let (mut conc, mut ties, mut np, mut nn) = (0u64, 0u64, 0u64, 0u64);
    for (i, &li) in labels.iter().enumerate() {
        if li == 1 {
            np += 1;
        } else {
            nn += 1;
        }
        if li != 1 {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj == 0 {
                if scores[i] > scores[j] {
                    conc += 1;
                } else if scores[i] == scores[j] {
                    ties += 1;
                }
            }
        }
    }
    (conc as f64 + 0.5 * ties as f64) / (np * nn) as f64
}

/// `|a - b| <= tol * max(|a|, |b|, floor)`. `floor` is the magnitude of the
/// terms that were summed, so that values produced by cancellation are
/// compared relative to their inputs rather than to a near-zero result.
pub fn close(a: f64, b: f64, tol: f64, floor: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(floor)
}

/// `|a - b| <= tol * max(|a|, |b|)`, with exact equality required at zero.
pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}

/// Logistic-loss fixtures used by the boosting tests.
pub fn line_fixture() -> (Vec<Vec<f64>>, Vec<u8>) {
    ((0..4).map(|i| vec![i as f64]).collect(), vec![0, 0, 1, 1])
}

/// Four points, one per quadrant, labeled by XOR of the quadrant bits.
/// Coordinates are distinct per axis so that single points can be isolated.
pub fn xor_fixture() -> (Vec<Vec<f64>>, Vec<u8>) {
    (vec![vec![0.1, 0.2], vec![0.3, 0.9], vec![0.8, 0.4], vec![0.9, 0.7]], vec![0, 1, 1, 0])
}

pub fn blob_fixture(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<u8>) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n {
        let label = (i % 2) as u8;
        let center = if label == 1 { 5.0 } else { -5.0 };
        rows.push(vec![
            center + rng.random_range(-1.0..1.0),
            rng.random_range(-3.0..3.0),
            center * 0.5 + rng.random_range(-1.0..1.0),
        ]);
        labels.push(label);
    }
    (rows, labels)
}
