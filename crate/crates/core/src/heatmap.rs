//! Per-cell blur probabilities from a whole-image model, with a majority vote
//! for the image label and a rendered overlay.

use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{extract_features, Region};
use crate::font;
use crate::gbdt::GbdtModel;
use crate::grid::{split_grid, Variant};
use crate::image::GrayImage;
use crate::model_config;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
    pub region: Region,
    pub probability: f64,
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapResult {
    pub grid: usize,
    pub config_id: String,
    /// Row-major, `grid * grid` entries.
    pub cells: Vec<Cell>,
    pub label: u8,
    pub mean_probability: f64,
}

/// Majority label of the cells. An even split goes to blur when the blur
/// probabilities sum to more than the sharp ones, i.e. when
/// `sum(p) > cells / 2`.
pub fn vote(cells: &[Cell]) -> u8 {
    let blur = cells.iter().filter(|c| c.label == 1).count();
    let sharp = cells.len() - blur;
    match blur.cmp(&sharp) {
        std::cmp::Ordering::Greater => 1,
        std::cmp::Ordering::Less => 0,
        std::cmp::Ordering::Equal => {
            let p_sum: f64 = cells.iter().map(|c| c.probability).sum();
            u8::from(p_sum > cells.len() as f64 / 2.0)
        }
    }
}

/// Scores every cell of a `grid x grid` split as if it were a whole image.
///
/// The model must use a global variant. LBP windows shrink to fit small cells.
pub fn heatmap(model: &GbdtModel, img: &GrayImage, grid: usize) -> Result<HeatmapResult> {
    let cfg = model_config(model)?;
    if !cfg.variant.is_global() {
        return Err(Error::ConfigMismatch {
            expected: "a global or global-lbp model".into(),
            found: model.config_id.clone(),
        });
    }
    crate::ensure_config(model, &cfg)?;
    let with_lbp = cfg.variant == Variant::GlobalLbp;
    let regions = split_grid(img, grid)?;
    let cells = regions
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let params = if with_lbp { cfg.params.fit_window(r.width, r.height) } else { cfg.params };
            let f = extract_features(img, *r, &params, with_lbp)?;
            let probability = model.predict_proba(&f)?;
            Ok(Cell { row: i / grid, col: i % grid, region: *r, probability, label: u8::from(probability > 0.5) })
        })
        .collect::<Result<Vec<_>>>()?;
    let mean_probability = cells.iter().map(|c| c.probability).sum::<f64>() / cells.len() as f64;
    Ok(HeatmapResult { grid, config_id: model.config_id.clone(), label: vote(&cells), mean_probability, cells })
}

/// Grayscale copy of the image with blur cells tinted red, sharp cells tinted
/// green, grid lines, and each cell's probability printed in its corner.
pub fn render_overlay(img: &GrayImage, result: &HeatmapResult) -> RgbImage {
    let (w, h) = (img.width() as u32, img.height() as u32);
    let mut out = RgbImage::from_fn(w, h, |x, y| {
        let v = (img.get(x as usize, y as usize) * 255.0).round() as u8;
        Rgb([v, v, v])
    });
    for cell in &result.cells {
        let r = cell.region;
        let tint = if cell.label == 1 { [255.0, 40.0, 40.0] } else { [40.0, 200.0, 40.0] };
        let alpha = 0.15 + 0.3 * (2.0 * cell.probability - 1.0).abs();
        for y in r.y0..r.y0 + r.height {
            for x in r.x0..r.x0 + r.width {
                let px = out.get_pixel_mut(x as u32, y as u32);
                for (c, t) in px.0.iter_mut().zip(tint) {
                    *c = (f64::from(*c) * (1.0 - alpha) + t * alpha).round() as u8;
                }
                if x == r.x0 || y == r.y0 {
                    px.0 = [255, 255, 0];
                }
            }
        }
        let text = format!("{:.2}", cell.probability);
        let mut scale = (r.width / 24).max(1);
        while scale > 1 && font::text_size(&text, scale).0 + 4 > r.width {
            scale -= 1;
        }
        let (tw, th) = font::text_size(&text, scale);
        let (bx, by) = (r.x0 + 2, r.y0 + 2);
        for y in by.saturating_sub(1)..(by + th + 1).min(r.y0 + r.height) {
            for x in bx.saturating_sub(1)..(bx + tw + 1).min(r.x0 + r.width) {
                out.put_pixel(x as u32, y as u32, Rgb([0, 0, 0]));
            }
        }
        font::render(&text, bx, by, scale, |x, y| {
            if x < r.x0 + r.width && y < r.y0 + r.height {
                out.put_pixel(x as u32, y as u32, Rgb([255, 255, 255]));
            }
        });
    }
    out
}
