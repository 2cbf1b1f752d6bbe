//! Spatial blur features computed over a rectangular region of a
//! [`GrayImage`]: Laplacian mean/variance, Tenengrad mean, normalized
//! gray-level variance and the windowed LBP sharpness statistics.
//!
//! Every convolution treats the region as its own image: neighbors that fall
//! outside the region are reflected back into it (reflect-101), never read
//! from the surrounding image.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::reflect101;
use crate::image::GrayImage;

/// Number of scalar features per region without and with the LBP statistics.
pub const BASE_FEATURES: usize = 4;
pub const LBP_FEATURES: usize = 2;

/// riu2 code assigned to every non-uniform pattern.
pub const NON_UNIFORM_CODE: u8 = 9;
/// Codes counted as "sharp" by the sharpness map.
pub const SHARP_CODE_MIN: u8 = 6;

/// Axis-aligned pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub x0: usize,
    pub y0: usize,
    pub width: usize,
    pub height: usize,
}

impl Region {
    pub fn new(x0: usize, y0: usize, width: usize, height: usize) -> Self {
        Self { x0, y0, width, height }
    }

    pub fn full(img: &GrayImage) -> Self {
        Self::new(0, 0, img.width(), img.height())
    }

    pub fn area(&self) -> usize {
        self.width * self.height
    }

    pub fn validate(&self, img: &GrayImage) -> Result<()> {
        if self.x0 + self.width > img.width() || self.y0 + self.height > img.height() {
            return Err(Error::RegionOutOfBounds {
                x0: self.x0,
                y0: self.y0,
                width: self.width,
                height: self.height,
                image_width: img.width(),
                image_height: img.height(),
            });
        }
        if self.width < 3 || self.height < 3 {
            return Err(Error::RegionTooSmall { width: self.width, height: self.height });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureParams {
    /// A neighbor sets its LBP bit when it exceeds `center + lbp_threshold`.
    pub lbp_threshold: f64,
    /// Side of the square sharpness-map window, odd.
    pub lbp_window: usize,
    /// Guard added to the mean in the NGLV denominator.
    pub epsilon: f64,
}

impl Default for FeatureParams {
    fn default() -> Self {
        Self { lbp_threshold: 0.016, lbp_window: 21, epsilon: 1e-12 }
    }
}

impl FeatureParams {
    pub fn validate(&self) -> Result<()> {
        if self.lbp_window < 3 || self.lbp_window.is_multiple_of(2) {
            return Err(Error::InvalidParams(format!("lbp_window must be odd and >= 3, got {}", self.lbp_window)));
        }
        if !(self.lbp_threshold.is_finite() && self.lbp_threshold >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "lbp_threshold must be finite and >= 0, got {}",
                self.lbp_threshold
            )));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::InvalidParams(format!("epsilon must be finite and > 0, got {}", self.epsilon)));
        }
        Ok(())
    }

    /// Same parameters with the window shrunk to fit a `width x height` patch:
    /// `min(lbp_window, largest odd <= min(width, height))`.
    pub fn fit_window(&self, width: usize, height: usize) -> Self {
        let side = width.min(height);
        let largest_odd = if side % 2 == 1 { side } else { side.saturating_sub(1) };
        Self { lbp_window: self.lbp_window.min(largest_odd.max(3)), ..*self }
    }
}

/// Row-major raster of real values.
#[derive(Debug, Clone, PartialEq)]
pub struct Map {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Map {
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }
}

/// Row-major raster of riu2 codes in `0..=9`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeMap {
    pub width: usize,
    pub height: usize,
    pub codes: Vec<u8>,
}

impl CodeMap {
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.codes[y * self.width + x]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientMaps {
    pub sx: Map,
    pub sy: Map,
    pub lap: Option<Map>,
}

/// Population mean and variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanVar {
    pub mean: f64,
    pub variance: f64,
}

/// Mean and population variance, accumulated relative to the first sample so
/// that constant input gives exactly zero variance.
pub(crate) fn mean_var(values: &[f64]) -> MeanVar {
    let n = values.len() as f64;
    let Some(&pivot) = values.first() else {
        return MeanVar { mean: 0.0, variance: 0.0 };
    };
    let shifted_mean = values.iter().map(|v| v - pivot).sum::<f64>() / n;
    let variance = values
        .iter()
        .map(|v| {
            let d = (v - pivot) - shifted_mean;
            d * d
        })
        .sum::<f64>()
        / n;
    MeanVar { mean: pivot + shifted_mean, variance }
}

/// Region copied into a buffer with a one-pixel reflect-101 border.
struct Padded {
    width: usize,
    height: usize,
    stride: usize,
    data: Vec<f64>,
}

impl Padded {
    fn new(img: &GrayImage, r: &Region) -> Self {
        let (w, h) = (r.width, r.height);
        let stride = w + 2;
        let mut data = Vec::with_capacity(stride * (h + 2));
        for py in 0..h + 2 {
            let sy = r.y0 + reflect101(py as isize - 1, h);
            for px in 0..w + 2 {
                let sx = r.x0 + reflect101(px as isize - 1, w);
                data.push(img.get(sx, sy));
            }
        }
        Self { width: w, height: h, stride, data }
    }

    /// 3x3 neighborhood of region pixel `(x, y)`, row-major.
    #[inline]
    fn window(&self, x: usize, y: usize) -> [f64; 9] {
        let top = y * self.stride + x;
        let mid = top + self.stride;
        let bot = mid + self.stride;
        let d = &self.data;
        [d[top], d[top + 1], d[top + 2], d[mid], d[mid + 1], d[mid + 2], d[bot], d[bot + 1], d[bot + 2]]
    }

    fn interior(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.height).flat_map(move |y| {
            let start = (y + 1) * self.stride + 1;
            self.data[start..start + self.width].iter().copied()
        })
    }

    fn map(&self, f: impl Fn(&[f64; 9]) -> f64) -> Map {
        let mut data = Vec::with_capacity(self.width * self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                data.push(f(&self.window(x, y)));
            }
        }
        Map { width: self.width, height: self.height, data }
    }
}

// Kernels are written as sums of differences so that a constant window
// produces an exact zero.

#[inline]
fn sobel_x(w: &[f64; 9]) -> f64 {
    (w[2] - w[0]) + 2.0 * (w[5] - w[3]) + (w[8] - w[6])
}

#[inline]
fn sobel_y(w: &[f64; 9]) -> f64 {
    (w[6] - w[0]) + 2.0 * (w[7] - w[1]) + (w[8] - w[2])
}

#[inline]
fn laplacian(w: &[f64; 9]) -> f64 {
    let c = w[4];
    (w[1] - c) + (w[3] - c) + (w[5] - c) + (w[7] - c)
}

/// Neighbor indices into a 3x3 window, walking the ring clockwise from the
/// top-left corner.
const RING: [usize; 8] = [0, 1, 2, 5, 8, 7, 6, 3];

/// Maps each 8-bit neighbor pattern to its riu2 code.
const RIU2: [u8; 256] = riu2_table();

const fn riu2_table() -> [u8; 256] {
    let mut table = [0u8; 256];
    let mut p = 0;
    while p < 256 {
        let pattern = p as u8;
        let transitions = (pattern ^ pattern.rotate_right(1)).count_ones();
        table[p] = if transitions <= 2 { pattern.count_ones() as u8 } else { NON_UNIFORM_CODE };
        p += 1;
    }
    table
}

/// riu2 code of an 8-bit circular neighbor pattern.
pub fn riu2_code(pattern: u8) -> u8 {
    RIU2[pattern as usize]
}

#[inline]
fn lbp_pattern(w: &[f64; 9], threshold: f64) -> u8 {
    let cut = w[4] + threshold;
    let mut pattern = 0u8;
    for (bit, &idx) in RING.iter().enumerate() {
        if w[idx] > cut {
            pattern |= 1 << bit;
        }
    }
    pattern
}

/// Horizontal and vertical Sobel responses over the region.
pub fn sobel_maps(img: &GrayImage, r: Region) -> Result<GradientMaps> {
    r.validate(img)?;
    let padded = Padded::new(img, &r);
    Ok(GradientMaps { sx: padded.map(sobel_x), sy: padded.map(sobel_y), lap: None })
}

/// 4-neighbor Laplacian response over the region.
pub fn laplacian_map(img: &GrayImage, r: Region) -> Result<Map> {
    r.validate(img)?;
    Ok(Padded::new(img, &r).map(laplacian))
}

/// Mean of `sx^2 + sy^2` over the region.
pub fn tenengrad_mean(img: &GrayImage, r: Region) -> Result<f64> {
    r.validate(img)?;
    Ok(tenengrad_of(&Padded::new(img, &r)))
}

fn tenengrad_of(padded: &Padded) -> f64 {
    let mut sum = 0.0;
    for y in 0..padded.height {
        for x in 0..padded.width {
            let w = padded.window(x, y);
            let (gx, gy) = (sobel_x(&w), sobel_y(&w));
            sum += gx * gx + gy * gy;
        }
    }
    sum / (padded.width * padded.height) as f64
}

/// Population mean and variance of the Laplacian response.
pub fn laplacian_stats(img: &GrayImage, r: Region) -> Result<MeanVar> {
    r.validate(img)?;
    Ok(laplacian_stats_of(&Padded::new(img, &r)))
}

fn laplacian_stats_of(padded: &Padded) -> MeanVar {
    mean_var(&padded.map(laplacian).data)
}

/// Normalized gray-level variance: population variance over `mean + epsilon`.
pub fn nglv(img: &GrayImage, r: Region, p: &FeatureParams) -> Result<f64> {
    r.validate(img)?;
    p.validate()?;
    Ok(nglv_of(&Padded::new(img, &r), p.epsilon))
}

fn nglv_of(padded: &Padded, epsilon: f64) -> f64 {
    let values: Vec<f64> = padded.interior().collect();
    let mv = mean_var(&values);
    mv.variance / (mv.mean + epsilon)
}

/// Rotation-invariant uniform LBP code of every pixel in the region.
pub fn lbp_riu2_codes(img: &GrayImage, r: Region, p: &FeatureParams) -> Result<CodeMap> {
    r.validate(img)?;
    p.validate()?;
    Ok(codes_of(&Padded::new(img, &r), p.lbp_threshold))
}

fn codes_of(padded: &Padded, threshold: f64) -> CodeMap {
    let mut codes = Vec::with_capacity(padded.width * padded.height);
    for y in 0..padded.height {
        for x in 0..padded.width {
            codes.push(riu2_code(lbp_pattern(&padded.window(x, y), threshold)));
        }
    }
    CodeMap { width: padded.width, height: padded.height, codes }
}

/// Sliding-window fraction of sharp codes (6..=9), valid positions only,
/// computed from an integral image of the indicator raster.
pub fn sharpness_map(codes: &CodeMap, window: usize) -> Result<Map> {
    let (w, h) = (codes.width, codes.height);
    if window == 0 || window > w || window > h {
        return Err(Error::WindowLargerThanRegion { window, width: w, height: h });
    }
    let iw = w + 1;
    let mut integral = vec![0u32; iw * (h + 1)];
    for y in 0..h {
        let mut row = 0u32;
        for x in 0..w {
            row += u32::from(codes.get(x, y) >= SHARP_CODE_MIN);
            integral[(y + 1) * iw + x + 1] = integral[y * iw + x + 1] + row;
        }
    }
    let (mw, mh) = (w - window + 1, h - window + 1);
    let area = (window * window) as f64;
    let mut data = Vec::with_capacity(mw * mh);
    for y in 0..mh {
        for x in 0..mw {
            let count = integral[(y + window) * iw + x + window] + integral[y * iw + x]
                - integral[y * iw + x + window]
                - integral[(y + window) * iw + x];
            data.push(f64::from(count) / area);
        }
    }
    Ok(Map { width: mw, height: mh, data })
}

/// Mean and variance of the LBP sharpness map.
pub fn lbp_sharpness_stats(img: &GrayImage, r: Region, p: &FeatureParams) -> Result<MeanVar> {
    r.validate(img)?;
    p.validate()?;
    lbp_stats_of(&Padded::new(img, &r), p)
}

fn lbp_stats_of(padded: &Padded, p: &FeatureParams) -> Result<MeanVar> {
    let codes = codes_of(padded, p.lbp_threshold);
    Ok(mean_var(&sharpness_map(&codes, p.lbp_window)?.data))
}

/// Feature fragment for one region:
/// `[laplacian_mean, laplacian_variance, tenengrad_mean, nglv]`, followed by
/// `[lbp_mean, lbp_variance]` when `with_lbp` is set.
pub fn extract_features(img: &GrayImage, r: Region, p: &FeatureParams, with_lbp: bool) -> Result<Vec<f64>> {
    r.validate(img)?;
    p.validate()?;
    let padded = Padded::new(img, &r);
    let lap = laplacian_stats_of(&padded);
    let mut out = Vec::with_capacity(BASE_FEATURES + LBP_FEATURES);
    out.extend([lap.mean, lap.variance, tenengrad_of(&padded), nglv_of(&padded, p.epsilon)]);
    if with_lbp {
        let lbp = lbp_stats_of(&padded, p)?;
        out.extend([lbp.mean, lbp.variance]);
    }
    Ok(out)
}

/// Only the two LBP statistics, as `[lbp_mean, lbp_variance]`.
pub fn extract_lbp_features(img: &GrayImage, r: Region, p: &FeatureParams) -> Result<[f64; 2]> {
    let mv = lbp_sharpness_stats(img, r, p)?;
    Ok([mv.mean, mv.variance])
}
