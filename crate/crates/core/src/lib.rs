//! Blur/sharp image classification from patch-wise spatial features and
//! gradient-boosted decision trees.
//!
//! The pipeline: [`image::load_gray`] decodes an image, [`grid::extract_vector`]
//! turns it into a descriptor for a [`grid::FeatureConfig`], and a
//! [`gbdt::GbdtModel`] maps the descriptor to a blur probability.

pub mod bench;
pub mod cli;
pub mod error;
pub mod eval;
pub mod features;
pub mod filter;
pub mod font;
pub mod gbdt;
pub mod grid;
pub mod heatmap;
pub mod image;
pub mod io;
pub mod synth;

pub use error::{Error, Result};
pub use features::{FeatureParams, Region};
pub use gbdt::{GbdtModel, TrainParams};
pub use grid::{FeatureConfig, FeatureVector, Variant};
pub use image::GrayImage;

/// Extracts features for `cfg` and scores them with `model`, after checking
/// that the model was trained on the same feature configuration.
pub fn classify(model: &GbdtModel, img: &GrayImage, cfg: &FeatureConfig) -> Result<f64> {
    ensure_config(model, cfg)?;
    let v = grid::extract_vector(img, cfg)?;
    model.predict_proba(&v.values)
}

/// Fails with [`Error::ConfigMismatch`] unless `model` expects `cfg`'s features.
pub fn ensure_config(model: &GbdtModel, cfg: &FeatureConfig) -> Result<()> {
    let id = cfg.id();
    if model.config_id != id || model.n_features != cfg.vector_length() {
        return Err(Error::ConfigMismatch { expected: model.config_id.clone(), found: id });
    }
    Ok(())
}

/// Parses the feature configuration a model was trained with.
pub fn model_config(model: &GbdtModel) -> Result<FeatureConfig> {
    model.config_id.parse().map_err(|_| Error::ModelFormat(format!("unrecognized config_id `{}`", model.config_id)))
}
