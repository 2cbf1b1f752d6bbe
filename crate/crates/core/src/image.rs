//! Image ingestion: decoding to normalized grayscale, bilinear resizing and
//! labeled dataset discovery.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageError};
use walkdir::WalkDir;

use crate::error::{Error, Result};

const LUMA_R: f64 = 0.299;
const LUMA_G: f64 = 0.587;
const LUMA_B: f64 = 0.114;

/// Single-channel raster with row-major intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidDimensions { width, height });
        }
        if data.len() != width * height {
            return Err(Error::ShapeMismatch(format!("{} values for a {width}x{height} image", data.len())));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidParams(format!("intensity {v} outside [0, 1]")));
        }
        Ok(Self { width, height, data })
    }

    pub(crate) fn from_vec_unchecked(width: usize, height: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        Self { width, height, data }
    }

    /// Constant image. `value` is clamped into `[0, 1]`.
    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!(width > 0 && height > 0, "empty image");
        Self::from_vec_unchecked(width, height, vec![value.clamp(0.0, 1.0); width * height])
    }

    /// Builds an image from `f(x, y)`, clamping each value into `[0, 1]`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(width > 0 && height > 0, "empty image");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y).clamp(0.0, 1.0));
            }
        }
        Self::from_vec_unchecked(width, height, data)
    }

    /// Interprets 8-bit gray levels as `v / 255`.
    pub fn from_gray8(width: usize, height: usize, pixels: &[u8]) -> Result<Self> {
        let data = pixels.iter().map(|&p| f64::from(p) / 255.0).collect();
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn flip_horizontal(&self) -> Self {
        Self::from_fn(self.width, self.height, |x, y| self.get(self.width - 1 - x, y))
    }

    pub fn flip_vertical(&self) -> Self {
        Self::from_fn(self.width, self.height, |x, y| self.get(x, self.height - 1 - y))
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.height, self.width, |x, y| self.get(y, x))
    }

    /// Quantizes to 8 bits, rounding to nearest.
    pub fn to_luma8(&self) -> image::GrayImage {
        let buf = self.data.iter().map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8).collect();
        image::GrayImage::from_raw(self.width as u32, self.height as u32, buf)
            .expect("buffer length matches dimensions")
    }
}

/// Converts a decoded image with BT.601 luma weights.
pub fn gray_from_dynamic(img: &DynamicImage) -> GrayImage {
    let (width, height) = (img.width() as usize, img.height() as usize);
    let data = match img {
        DynamicImage::ImageLuma8(g) => g.as_raw().iter().map(|&p| f64::from(p) / 255.0).collect(),
        DynamicImage::ImageLumaA8(_) | DynamicImage::ImageLuma16(_) | DynamicImage::ImageLumaA16(_) => {
            img.to_luma8().as_raw().iter().map(|&p| f64::from(p) / 255.0).collect()
        }
        _ => img
            .to_rgb8()
            .pixels()
            .map(|p| {
                let [r, g, b] = p.0;
                if r == g && g == b {
                    f64::from(r) / 255.0
                } else {
                    let (r, g, b) = (f64::from(r) / 255.0, f64::from(g) / 255.0, f64::from(b) / 255.0);
                    (LUMA_R * r + LUMA_G * g + LUMA_B * b).clamp(0.0, 1.0)
                }
            })
            .collect(),
    };
    GrayImage::from_vec_unchecked(width, height, data)
}

/// Decodes a PNG or JPEG file into a normalized grayscale image.
pub fn load_gray(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let decoded = image::ImageReader::open(path)
        .map_err(|e| Error::UnreadableFile { path: path.to_path_buf(), reason: e.to_string() })?
        .with_guessed_format()
        .map_err(|e| Error::UnreadableFile { path: path.to_path_buf(), reason: e.to_string() })?;
    let img = decoded.decode().map_err(|e| match e {
        ImageError::Unsupported(_) => Error::UnsupportedFormat(path.to_path_buf()),
        other => Error::UnreadableFile { path: path.to_path_buf(), reason: other.to_string() },
    })?;
    Ok(gray_from_dynamic(&img))
}

/// Bilinear resize with edge-aligned sampling: output pixel `i` samples the
/// source at `i * (src - 1) / (dst - 1)`, so corner pixels map onto corners.
pub fn resize_bilinear(img: &GrayImage, width: usize, height: usize) -> Result<GrayImage> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidDimensions { width, height });
    }
    if width == img.width && height == img.height {
        return Ok(img.clone());
    }
    let xs = sample_positions(img.width, width);
    let ys = sample_positions(img.height, height);
    let mut data = Vec::with_capacity(width * height);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            let top = img.get(x0, y0) * (1.0 - fx) + img.get(x1, y0) * fx;
            let bottom = img.get(x0, y1) * (1.0 - fx) + img.get(x1, y1) * fx;
            data.push((top * (1.0 - fy) + bottom * fy).clamp(0.0, 1.0));
        }
    }
    Ok(GrayImage::from_vec_unchecked(width, height, data))
}

fn sample_positions(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    (0..dst)
        .map(|i| {
            let pos = if dst == 1 { (src - 1) as f64 / 2.0 } else { i as f64 * (src - 1) as f64 / (dst - 1) as f64 };
            let lo = (pos.floor() as usize).min(src - 1);
            let hi = (lo + 1).min(src - 1);
            (lo, hi, pos - lo as f64)
        })
        .collect()
}

/// Class label of a dataset entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Sharp = 0,
    Blur = 1,
}

impl Label {
    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(Label::Sharp),
            1 => Some(Label::Blur),
            _ => None,
        }
    }
}

/// Subdirectory names recognized by [`scan_dataset`] and the label each maps to.
pub const CLASS_DIRS: [(&str, Label); 4] = [
    ("sharp", Label::Sharp),
    ("blur", Label::Blur),
    ("defocused_blurred", Label::Blur),
    ("motion_blurred", Label::Blur),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetEntry {
    pub path: PathBuf,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub entries: Vec<DatasetEntry>,
    pub class_counts: BTreeMap<Label, usize>,
}

impl DatasetManifest {
    pub fn count(&self, label: Label) -> usize {
        self.class_counts.get(&label).copied().unwrap_or(0)
    }

    pub fn labels(&self) -> Vec<u8> {
        self.entries.iter().map(|e| e.label.as_u8()).collect()
    }
}

pub fn is_image_path(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
        .unwrap_or(false)
}

/// Enumerates a labeled dataset, requiring both classes.
///
/// `sharp/` maps to label 0; `blur/`, `defocused_blurred/` and
/// `motion_blurred/` all map to label 1. Entries are sorted by path.
pub fn scan_dataset(root: impl AsRef<Path>) -> Result<DatasetManifest> {
    let manifest = scan_dataset_lenient(root)?;
    if manifest.class_counts.len() < 2 {
        let (&label, &count) = manifest.class_counts.iter().next().expect("non-empty manifest has a class");
        return Err(Error::MissingClass { present: label.as_u8(), count });
    }
    Ok(manifest)
}

/// Like [`scan_dataset`] but accepts a single-class dataset, for inference runs.
pub fn scan_dataset_lenient(root: impl AsRef<Path>) -> Result<DatasetManifest> {
    let root = root.as_ref();
    let mut entries = Vec::new();
    for (dir, label) in CLASS_DIRS {
        let class_root = root.join(dir);
        if !class_root.is_dir() {
            continue;
        }
        for entry in WalkDir::new(&class_root).follow_links(true) {
            let entry = entry.map_err(|e| Error::Io(e.into()))?;
            if entry.file_type().is_file() && is_image_path(entry.path()) {
                entries.push(DatasetEntry { path: entry.into_path(), label });
            }
        }
    }
    if entries.is_empty() {
        return Err(Error::EmptyDataset(root.to_path_buf()));
    }
    entries.sort_by(|a, b| a.path.cmp(&b.path));
    let mut class_counts = BTreeMap::new();
    for e in &entries {
        *class_counts.entry(e.label).or_insert(0) += 1;
    }
    Ok(DatasetManifest { entries, class_counts })
}

/// All PNG/JPEG files below `root` (or `root` itself if it is a file), sorted.
pub fn list_images(root: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let root = root.as_ref();
    if root.is_file() {
        return Ok(vec![root.to_path_buf()]);
    }
    if !root.is_dir() {
        return Err(Error::EmptyDataset(root.to_path_buf()));
    }
    let mut paths = Vec::new();
    for entry in WalkDir::new(root).follow_links(true) {
        let entry = entry.map_err(|e| Error::Io(e.into()))?;
        if entry.file_type().is_file() && is_image_path(entry.path()) {
            paths.push(entry.into_path());
        }
    }
    if paths.is_empty() {
        return Err(Error::EmptyDataset(root.to_path_buf()));
    }
    paths.sort();
    Ok(paths)
}
