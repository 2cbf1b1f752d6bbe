//! Patch-wise descriptors: a regular g x g tiling of the image, per-patch
//! feature fragments concatenated in row-major patch order, and the feature
//! CSV exchanged between the `extract` and `train` stages.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{extract_features, extract_lbp_features, FeatureParams, Region, BASE_FEATURES, LBP_FEATURES};
use crate::image::GrayImage;

/// Grid sizes a [`FeatureConfig`] may use.
pub const GRID_SIZES: [usize; 4] = [1, 3, 5, 7];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Four whole-image features.
    Global,
    /// Whole-image features plus LBP statistics.
    GlobalLbp,
    /// Four features per grid patch.
    Grid,
    /// Four features per patch plus whole-image LBP statistics.
    GridGlobalLbp,
    /// Six features per patch.
    LbpGrid,
}

impl Variant {
    pub const ALL: [Variant; 5] =
        [Variant::Global, Variant::GlobalLbp, Variant::Grid, Variant::GridGlobalLbp, Variant::LbpGrid];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Global => "global",
            Variant::GlobalLbp => "global-lbp",
            Variant::Grid => "grid",
            Variant::GridGlobalLbp => "grid-global-lbp",
            Variant::LbpGrid => "lbp-grid",
        }
    }

    pub fn is_global(self) -> bool {
        matches!(self, Variant::Global | Variant::GlobalLbp)
    }

    pub fn uses_lbp(self) -> bool {
        !matches!(self, Variant::Global | Variant::Grid)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidParams(format!("unknown variant `{s}`")))
    }
}

/// Which descriptor to compute and with which parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub variant: Variant,
    pub grid: usize,
    pub params: FeatureParams,
}

impl FeatureConfig {
    /// Global variants normalize `grid` to 1.
    pub fn new(variant: Variant, grid: usize, params: FeatureParams) -> Result<Self> {
        let grid = if variant.is_global() { 1 } else { grid };
        if !GRID_SIZES.contains(&grid) {
            return Err(Error::InvalidParams(format!("grid must be one of {GRID_SIZES:?}, got {grid}")));
        }
        params.validate()?;
        Ok(Self { variant, grid, params })
    }

    pub fn vector_length(&self) -> usize {
        let cells = self.grid * self.grid;
        match self.variant {
            Variant::Global => BASE_FEATURES,
            Variant::GlobalLbp => BASE_FEATURES + LBP_FEATURES,
            Variant::Grid => BASE_FEATURES * cells,
            Variant::GridGlobalLbp => BASE_FEATURES * cells + LBP_FEATURES,
            Variant::LbpGrid => (BASE_FEATURES + LBP_FEATURES) * cells,
        }
    }

    /// Canonical identifier, e.g. `lbp-grid/g7/t0.016/w21/e1e-12`. Parses back
    /// with [`FromStr`].
    pub fn id(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for FeatureConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/g{}/t{:?}/w{}/e{:e}",
            self.variant, self.grid, self.params.lbp_threshold, self.params.lbp_window, self.params.epsilon
        )
    }
}

impl FromStr for FeatureConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParams(format!("malformed feature config id `{s}`"));
        let parts: Vec<&str> = s.split('/').collect();
        let [variant, g, t, w, e] = parts.as_slice() else {
            return Err(bad());
        };
        fn field<'a>(p: &'a str, prefix: char, s: &str) -> Result<&'a str> {
            p.strip_prefix(prefix).ok_or_else(|| Error::InvalidParams(format!("malformed feature config id `{s}`")))
        }
        let params = FeatureParams {
            lbp_threshold: field(t, 't', s)?.parse().map_err(|_| bad())?,
            lbp_window: field(w, 'w', s)?.parse().map_err(|_| bad())?,
            epsilon: field(e, 'e', s)?.parse().map_err(|_| bad())?,
        };
        FeatureConfig::new(variant.parse()?, field(g, 'g', s)?.parse().map_err(|_| bad())?, params)
    }
}

/// Descriptor of one image, bound to the config that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub config_id: String,
}

/// Splits the image into `g * g` disjoint regions in row-major order.
///
/// Each region is `floor(dim / g)` pixels wide (tall); the last `dim % g`
/// columns (rows) get one extra pixel each.
pub fn split_grid(img: &GrayImage, g: usize) -> Result<Vec<Region>> {
    let (w, h) = (img.width(), img.height());
    if g == 0 || w < 3 * g || h < 3 * g {
        return Err(Error::ImageTooSmall { width: w, height: h, grid: g });
    }
    let cols = spans(w, g);
    let rows = spans(h, g);
    Ok(rows
        .iter()
        .flat_map(|&(y0, height)| cols.iter().map(move |&(x0, width)| Region::new(x0, y0, width, height)))
        .collect())
}

fn spans(len: usize, g: usize) -> Vec<(usize, usize)> {
    let base = len / g;
    let extra_from = g - len % g;
    let mut start = 0;
    (0..g)
        .map(|i| {
            let size = base + usize::from(i >= extra_from);
            let span = (start, size);
            start += size;
            span
        })
        .collect()
}

/// Computes the descriptor for `cfg`.
pub fn extract_vector(img: &GrayImage, cfg: &FeatureConfig) -> Result<FeatureVector> {
    extract_impl(img, cfg, false)
}

/// Same as [`extract_vector`], with patches processed on the rayon pool. The
/// output is identical.
pub fn extract_vector_par(img: &GrayImage, cfg: &FeatureConfig) -> Result<FeatureVector> {
    extract_impl(img, cfg, true)
}

fn extract_impl(img: &GrayImage, cfg: &FeatureConfig, parallel: bool) -> Result<FeatureVector> {
    let p = &cfg.params;
    let full = Region::full(img);
    let values = match cfg.variant {
        Variant::Global => extract_features(img, full, p, false)?,
        Variant::GlobalLbp => extract_features(img, full, p, true)?,
        Variant::Grid | Variant::GridGlobalLbp | Variant::LbpGrid => {
            let regions = split_grid(img, cfg.grid)?;
            let with_lbp = cfg.variant == Variant::LbpGrid;
            let patch = |r: &Region| {
                let params = if with_lbp { p.fit_window(r.width, r.height) } else { *p };
                extract_features(img, *r, &params, with_lbp)
            };
            let blocks: Vec<Vec<f64>> = if parallel {
                regions.par_iter().map(patch).collect::<Result<_>>()?
            } else {
                regions.iter().map(patch).collect::<Result<_>>()?
            };
            let mut values: Vec<f64> = blocks.into_iter().flatten().collect();
            if cfg.variant == Variant::GridGlobalLbp {
                values.extend(extract_lbp_features(img, full, p)?);
            }
            values
        }
    };
    debug_assert_eq!(values.len(), cfg.vector_length());
    Ok(FeatureVector { values, config_id: cfg.id() })
}

/// Rows of a feature CSV. Unlabeled rows carry `None`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureTable {
    pub labels: Vec<Option<u8>>,
    pub rows: Vec<Vec<f64>>,
}

impl FeatureTable {
    pub fn n_features(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    /// Labels as plain values, failing if any row is unlabeled.
    pub fn require_labels(&self) -> Result<Vec<u8>> {
        self.labels
            .iter()
            .enumerate()
            .map(|(i, l)| l.ok_or_else(|| Error::Csv(format!("row {} has no label", i + 1))))
            .collect()
    }

    pub fn write_to(&self, mut out: impl Write) -> Result<()> {
        let n = self.n_features();
        let mut header = String::from("label");
        for i in 0..n {
            header.push_str(&format!(",f{i}"));
        }
        writeln!(out, "{header}")?;
        for (label, row) in self.labels.iter().zip(&self.rows) {
            let mut line = label.map(|l| l.to_string()).unwrap_or_default();
            for v in row {
                line.push(',');
                line.push_str(&v.to_string());
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn read_from(input: impl BufRead) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines.next().ok_or_else(|| Error::Csv("empty file".into()))??;
        let columns: Vec<&str> = header.trim_end().split(',').collect();
        if columns.first() != Some(&"label") {
            return Err(Error::Csv("header must start with `label`".into()));
        }
        for (i, c) in columns[1..].iter().enumerate() {
            if *c != format!("f{i}") {
                return Err(Error::Csv(format!("unexpected header column `{c}`")));
            }
        }
        let n = columns.len() - 1;
        let mut table = FeatureTable::default();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != n + 1 {
                return Err(Error::Csv(format!(
                    "line {}: expected {} fields, found {}",
                    lineno + 2,
                    n + 1,
                    fields.len()
                )));
            }
            let label = match fields[0] {
                "" => None,
                "0" => Some(0),
                "1" => Some(1),
                other => return Err(Error::Csv(format!("line {}: bad label `{other}`", lineno + 2))),
            };
            let row = fields[1..]
                .iter()
                .map(|f| f.parse::<f64>().map_err(|_| Error::Csv(format!("line {}: bad number `{f}`", lineno + 2))))
                .collect::<Result<Vec<_>>>()?;
            table.labels.push(label);
            table.rows.push(row);
        }
        if table.rows.is_empty() {
            return Err(Error::Csv("no data rows".into()));
        }
        Ok(table)
    }

    pub fn read_path(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path.as_ref())
            .map_err(|e| Error::Csv(format!("cannot open {}: {e}", path.as_ref().display())))?;
        Self::read_from(std::io::BufReader::new(f))
    }
}
