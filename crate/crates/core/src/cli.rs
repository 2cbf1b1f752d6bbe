//! Command-line interface: `extract`, `train`, `eval`, `predict`, `heatmap`
//! and `bench`.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::bench::bench_inference;
use crate::error::{Error, Result};
use crate::eval::{cross_validate, make_folds};
use crate::gbdt::{train, GbdtModel, TrainParams};
use crate::grid::{extract_vector, FeatureConfig, FeatureTable, Variant};
use crate::heatmap::{heatmap, render_overlay};
use crate::image::{list_images, load_gray, scan_dataset, scan_dataset_lenient};
use crate::io::write_atomic;
use crate::{ensure_config, model_config, FeatureParams};

#[derive(Debug, Parser)]
#[command(
    name = "patchblur",
    version,
    about = "Blur/sharp image classification with patch-wise features and boosted trees"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract a feature CSV from a labeled dataset directory.
    Extract(ExtractArgs),
    /// Train a model from a feature CSV.
    Train(TrainArgs),
    /// Repeated stratified K-fold cross-validation on a feature CSV.
    Eval(EvalArgs),
    /// Score images with a trained model.
    Predict(PredictArgs),
    /// Per-cell blur probabilities from a global-feature model.
    Heatmap(HeatmapArgs),
    /// Time feature extraction and prediction across image sizes.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct FeatureArgs {
    /// Feature variant.
    #[arg(long, value_enum)]
    pub variant: Option<Variant>,
    /// Grid size for patch-wise variants.
    #[arg(long, value_parser = parse_grid)]
    pub grid: Option<usize>,
    /// LBP comparison threshold on [0,1] intensities.
    #[arg(long)]
    pub lbp_threshold: Option<f64>,
    /// Odd side length of the LBP sharpness window.
    #[arg(long)]
    pub lbp_window: Option<usize>,
}

impl FeatureArgs {
    fn is_empty(&self) -> bool {
        self.variant.is_none() && self.grid.is_none() && self.lbp_threshold.is_none() && self.lbp_window.is_none()
    }

    /// Applies the given flags on top of `base`.
    pub fn resolve(&self, base: &FeatureConfig) -> Result<FeatureConfig> {
        let variant = self.variant.unwrap_or(base.variant);
        let grid = match (self.grid, variant.is_global(), base.variant.is_global()) {
            (Some(g), _, _) => g,
            (None, false, true) => 7,
            (None, _, _) => base.grid,
        };
        let params = FeatureParams {
            lbp_threshold: self.lbp_threshold.unwrap_or(base.params.lbp_threshold),
            lbp_window: self.lbp_window.unwrap_or(base.params.lbp_window),
            epsilon: base.params.epsilon,
        };
        FeatureConfig::new(variant, grid, params)
    }

    /// Configuration with `lbp-grid`, `g = 7` and default parameters as the base.
    pub fn config(&self) -> Result<FeatureConfig> {
        self.resolve(&default_config())
    }
}

pub fn default_config() -> FeatureConfig {
    FeatureConfig::new(Variant::LbpGrid, 7, FeatureParams::default()).expect("defaults are valid")
}

#[derive(Debug, Clone, Args)]
pub struct TreeArgs {
    #[arg(long, default_value_t = 6)]
    pub max_depth: usize,
    #[arg(long, default_value_t = 0.3)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 100)]
    pub n_estimators: usize,
    #[arg(long, default_value_t = 0.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    pub min_child_weight: f64,
    #[arg(long, default_value_t = 0.5)]
    pub base_score: f64,
}

impl TreeArgs {
    fn params(&self, seed: u64) -> TrainParams {
        TrainParams {
            max_depth: self.max_depth,
            learning_rate: self.learning_rate,
            n_estimators: self.n_estimators,
            gamma: self.gamma,
            lambda: self.lambda,
            min_child_weight: self.min_child_weight,
            base_score: self.base_score,
            seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Dataset root with sharp/ and blur/ (or defocused_blurred/, motion_blurred/) subdirectories.
    #[arg(long)]
    pub input: PathBuf,
    /// Treat `input` as a flat directory of images with no labels.
    #[arg(long)]
    pub unlabeled: bool,
    #[command(flatten)]
    pub features: FeatureArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Feature CSV produced by `extract`.
    #[arg(long)]
    pub features: PathBuf,
    #[command(flatten)]
    pub feature_args: FeatureArgs,
    #[command(flatten)]
    pub tree: TreeArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[command(flatten)]
    pub feature_args: FeatureArgs,
    #[command(flatten)]
    pub tree: TreeArgs,
    #[arg(long, default_value_t = 5)]
    pub shuffles: usize,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Structured report (JSON).
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the plain-text table here.
    #[arg(long)]
    pub table: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Image file or directory of images.
    #[arg(long)]
    pub input: PathBuf,
    /// Extraction flags; when given they must match the model.
    #[command(flatten)]
    pub features: FeatureArgs,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// CSV output (`path,probability,label`); stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HeatmapArgs {
    /// Model trained on the `global` or `global-lbp` variant.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub grid: usize,
    /// Overlay PNG.
    #[arg(long)]
    pub out: PathBuf,
    /// Cell results as JSON; defaults to the overlay path with a `.json` extension.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Image files or directories.
    #[arg(long, required = true, num_args = 1..)]
    pub images: Vec<PathBuf>,
    /// Comma-separated WIDTHxHEIGHT list.
    #[arg(long, default_value = "256x256,512x512,1024x1024,2048x2048", value_delimiter = ',', value_parser = parse_size)]
    pub sizes: Vec<(usize, usize)>,
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    /// Let extraction use the thread pool across patches.
    #[arg(long)]
    pub parallel: bool,
    #[arg(long)]
    pub out: PathBuf,
    /// Raw per-run timings as CSV.
    #[arg(long)]
    pub raw_csv: Option<PathBuf>,
}

fn parse_grid(s: &str) -> std::result::Result<usize, String> {
    match s.parse::<usize>() {
        Ok(g) if crate::grid::GRID_SIZES.contains(&g) => Ok(g),
        _ => Err(format!("grid must be one of {:?}", crate::grid::GRID_SIZES)),
    }
}

fn parse_size(item: &str) -> std::result::Result<(usize, usize), String> {
    let (w, h) = item.trim().split_once(['x', 'X']).ok_or_else(|| format!("size `{item}` is not WIDTHxHEIGHT"))?;
    let w = w.parse().map_err(|_| format!("bad width in `{item}`"))?;
    let h = h.parse().map_err(|_| format!("bad height in `{item}`"))?;
    Ok((w, h))
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Extract(a) => cmd_extract(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Predict(a) => cmd_predict(&a),
        Command::Heatmap(a) => cmd_heatmap(&a),
        Command::Bench(a) => cmd_bench(&a),
    }
}

fn extract_all(paths: &[PathBuf], cfg: &FeatureConfig) -> Result<Vec<Vec<f64>>> {
    paths.par_iter().map(|p| Ok(extract_vector(&load_gray(p)?, cfg)?.values)).collect()
}

pub fn cmd_extract(a: &ExtractArgs) -> Result<()> {
    let cfg = a.features.config()?;
    let (paths, labels): (Vec<PathBuf>, Vec<Option<u8>>) = if a.unlabeled {
        list_images(&a.input)?.into_iter().map(|p| (p, None)).unzip()
    } else {
        let manifest = match scan_dataset(&a.input) {
            Err(Error::MissingClass { present, count }) => {
                eprintln!("warning: only label {present} present ({count} images)");
                scan_dataset_lenient(&a.input)?
            }
            other => other?,
        };
        manifest.entries.into_iter().map(|e| (e.path, Some(e.label.as_u8()))).unzip()
    };
    eprintln!("extracting `{}` from {} images", cfg.id(), paths.len());
    let rows = extract_all(&paths, &cfg)?;
    let table = FeatureTable { labels, rows };
    let mut buf = Vec::new();
    table.write_to(&mut buf)?;
    write_atomic(&a.out, &buf)?;
    eprintln!("wrote {} rows x {} features to {}", table.rows.len(), cfg.vector_length(), a.out.display());
    Ok(())
}

fn load_training_table(path: &Path, cfg: &FeatureConfig) -> Result<(Vec<Vec<f64>>, Vec<u8>)> {
    let table = FeatureTable::read_path(path)?;
    if table.n_features() != cfg.vector_length() {
        return Err(Error::ConfigMismatch {
            expected: format!("{} ({} features)", cfg.id(), cfg.vector_length()),
            found: format!("{} columns in {}", table.n_features(), path.display()),
        });
    }
    let labels = table.require_labels()?;
    Ok((table.rows, labels))
}

pub fn cmd_train(a: &TrainArgs) -> Result<()> {
    let cfg = a.feature_args.config()?;
    let params = a.tree.params(a.seed);
    let (rows, labels) = load_training_table(&a.features, &cfg)?;
    eprintln!(
        "training on {} samples x {} features; (max_depth, learning_rate, n_estimators, gamma) = {}",
        rows.len(),
        cfg.vector_length(),
        params.summary()
    );
    let model = train(&rows, &labels, &params, cfg.id())?;
    let probs = model.predict_proba_batch(&rows)?;
    let preds: Vec<u8> = probs.iter().map(|&p| u8::from(p > 0.5)).collect();
    let acc = crate::eval::accuracy(&preds, &labels)?;
    model.save(&a.out)?;
    println!("training accuracy: {acc:.4}");
    eprintln!("wrote model ({} trees) to {}", model.trees.len(), a.out.display());
    Ok(())
}

pub fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let cfg = a.feature_args.config()?;
    let params = a.tree.params(a.seed);
    let (rows, labels) = load_training_table(&a.features, &cfg)?;
    let plan = make_folds(&labels, a.shuffles, a.folds, a.seed)?;
    eprintln!(
        "cross-validating `{}`: {} shuffles x {} folds; (max_depth, learning_rate, n_estimators, gamma) = {}",
        cfg.id(),
        a.shuffles,
        a.folds,
        params.summary()
    );
    let report = cross_validate(&rows, &labels, &cfg.id(), &params, &plan)?;
    let json = serde_json::to_string_pretty(&report)?;
    write_atomic(&a.out, format!("{json}\n").as_bytes())?;
    let table = report.to_table();
    if let Some(t) = &a.table {
        write_atomic(t, table.as_bytes())?;
    }
    print!("{table}");
    Ok(())
}

pub fn cmd_predict(a: &PredictArgs) -> Result<()> {
    let model = GbdtModel::load(&a.model)?;
    let model_cfg = model_config(&model)?;
    let cfg = if a.features.is_empty() { model_cfg } else { a.features.resolve(&model_cfg)? };
    ensure_config(&model, &cfg)?;
    let paths = list_images(&a.input)?;
    let scores: Vec<f64> = paths
        .par_iter()
        .map(|p| {
            let v = extract_vector(&load_gray(p)?, &cfg)?;
            model.predict_proba(&v.values)
        })
        .collect::<Result<_>>()?;
    let mut out = String::from("path,probability,label\n");
    for (p, s) in paths.iter().zip(&scores) {
        out.push_str(&format!("{},{},{}\n", p.display(), s, u8::from(*s > a.threshold)));
    }
    match &a.out {
        Some(path) => write_atomic(path, out.as_bytes())?,
        None => std::io::stdout().write_all(out.as_bytes())?,
    }
    Ok(())
}

pub fn cmd_heatmap(a: &HeatmapArgs) -> Result<()> {
    let model = GbdtModel::load(&a.model)?;
    let img = load_gray(&a.image)?;
    let result = heatmap(&model, &img, a.grid)?;
    let overlay = render_overlay(&img, &result);
    let mut png = Vec::new();
    overlay
        .write_to(&mut std::io::Cursor::new(&mut png), image::ImageFormat::Png)
        .map_err(|e| Error::Internal(format!("encoding overlay: {e}")))?;
    write_atomic(&a.out, &png)?;
    let json_path = a.json.clone().unwrap_or_else(|| a.out.with_extension("json"));
    write_atomic(&json_path, format!("{}\n", serde_json::to_string_pretty(&result)?).as_bytes())?;
    println!(
        "label {} (mean cell probability {:.4}); overlay {}, cells {}",
        result.label,
        result.mean_probability,
        a.out.display(),
        json_path.display()
    );
    Ok(())
}

pub fn cmd_bench(a: &BenchArgs) -> Result<()> {
    let model = GbdtModel::load(&a.model)?;
    let mut paths = Vec::new();
    for p in &a.images {
        paths.extend(list_images(p)?);
    }
    let start = Instant::now();
    let images = paths.iter().map(load_gray).collect::<Result<Vec<_>>>()?;
    let decode_ms = start.elapsed().as_secs_f64() * 1e3 / images.len() as f64;
    let mut report = bench_inference(&model, &images, &a.sizes, a.repeats, a.parallel)?;
    report.decode_ms = Some(decode_ms);
    write_atomic(&a.out, format!("{}\n", serde_json::to_string_pretty(&report)?).as_bytes())?;
    if let Some(csv) = &a.raw_csv {
        write_atomic(csv, report.runs_csv().as_bytes())?;
    }
    for t in &report.per_size {
        println!("{:>5}x{:<5} {:>10.3} ms ± {:.3}", t.width, t.height, t.mean_ms, t.std_ms);
    }
    let f = &report.linear_fit;
    println!(
        "linear fit: {:.3e} ms/pixel, intercept {:.3} ms, r^2 = {:.4}; decode {:.3} ms/image",
        f.slope_ms_per_pixel, f.intercept_ms, f.r_squared, decode_ms
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_parse() {
        assert_eq!(parse_size("512X300").unwrap(), (512, 300));
        assert!(parse_size("256").is_err());
        let cli = Cli::try_parse_from([
            "patchblur",
            "bench",
            "--model",
            "m",
            "--images",
            "a",
            "--out",
            "o",
            "--sizes",
            "256x256,64x32",
        ])
        .unwrap();
        match cli.command {
            Command::Bench(b) => assert_eq!(b.sizes, vec![(256, 256), (64, 32)]),
            _ => unreachable!(),
        }
    }

    #[test]
    fn feature_flags_resolve() {
        let base = default_config();
        let empty = FeatureArgs::default();
        assert_eq!(empty.config().unwrap(), base);
        let g = FeatureArgs { variant: Some(Variant::Global), ..Default::default() };
        assert_eq!(g.config().unwrap().id(), "global/g1/t0.016/w21/e1e-12");
        let from_global = FeatureArgs { variant: Some(Variant::Grid), ..Default::default() };
        let global = g.config().unwrap();
        assert_eq!(from_global.resolve(&global).unwrap().grid, 7);
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
