//! Inference latency across image sizes and a least-squares check that it
//! grows linearly with pixel count.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::Summary;
use crate::gbdt::GbdtModel;
use crate::grid::{extract_vector, extract_vector_par};
use crate::image::{resize_bilinear, GrayImage};
use crate::model_config;

pub const MIN_REPEATS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeTiming {
    pub width: usize,
    pub height: usize,
    pub pixel_count: usize,
    pub repeats: usize,
    pub mean_ms: f64,
    pub std_ms: f64,
    /// Per-run latency in milliseconds, averaged over the input images.
    pub runs_ms: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope_ms_per_pixel: f64,
    pub intercept_ms: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub config_id: String,
    pub images: usize,
    pub parallel: bool,
    pub per_size: Vec<SizeTiming>,
    pub linear_fit: LinearFit,
    /// Mean decode time per image, when the caller measured it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decode_ms: Option<f64>,
}

impl TimingReport {
    /// Raw runs as CSV: `width,height,pixels,run,ms`.
    pub fn runs_csv(&self) -> String {
        let mut s = String::from("width,height,pixels,run,ms\n");
        for t in &self.per_size {
            for (i, ms) in t.runs_ms.iter().enumerate() {
                s.push_str(&format!("{},{},{},{},{}\n", t.width, t.height, t.pixel_count, i, ms));
            }
        }
        s
    }
}

/// Ordinary least squares of `y` on `x`. `r_squared` is clamped to `[0, 1]`
/// and is 1 when `y` has no variance.
pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss_tot: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - (intercept + slope * a)).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) } else { 1.0 };
    LinearFit { slope_ms_per_pixel: slope, intercept_ms: intercept, r_squared }
}

/// Times feature extraction plus prediction for every image resized to each
/// size. Resizing happens outside the timed section; one warm-up run per size
/// is discarded.
pub fn bench_inference(
    model: &GbdtModel,
    images: &[GrayImage],
    sizes: &[(usize, usize)],
    repeats: usize,
    parallel: bool,
) -> Result<TimingReport> {
    if repeats < MIN_REPEATS {
        return Err(Error::InvalidParams(format!("repeats must be >= {MIN_REPEATS}, got {repeats}")));
    }
    if sizes.is_empty() {
        return Err(Error::InvalidParams("no benchmark sizes given".into()));
    }
    if images.is_empty() {
        return Err(Error::InvalidParams("no benchmark images given".into()));
    }
    let cfg = model_config(model)?;
    crate::ensure_config(model, &cfg)?;
    let extract = if parallel { extract_vector_par } else { extract_vector };

    let mut per_size = Vec::with_capacity(sizes.len());
    for &(w, h) in sizes {
        let resized = images.iter().map(|img| resize_bilinear(img, w, h)).collect::<Result<Vec<_>>>()?;
        let mut runs_ms = Vec::with_capacity(repeats);
        for run in 0..=repeats {
            let start = Instant::now();
            for img in &resized {
                let v = extract(img, &cfg)?;
                std::hint::black_box(model.predict_proba(&v.values)?);
            }
            let ms = start.elapsed().as_secs_f64() * 1e3 / resized.len() as f64;
            if run > 0 {
                runs_ms.push(ms);
            }
        }
        let s = Summary::of(&runs_ms);
        per_size.push(SizeTiming {
            width: w,
            height: h,
            pixel_count: w * h,
            repeats,
            mean_ms: s.mean,
            std_ms: s.std,
            runs_ms,
        });
    }
    let xs: Vec<f64> = per_size.iter().map(|t| t.pixel_count as f64).collect();
    let ys: Vec<f64> = per_size.iter().map(|t| t.mean_ms).collect();
    Ok(TimingReport {
        config_id: model.config_id.clone(),
        images: images.len(),
        parallel,
        linear_fit: linear_fit(&xs, &ys),
        per_size,
        decode_ms: None,
    })
}
